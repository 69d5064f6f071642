"""Coded distributed matrix multiplication that keeps sparsity and uses partial work."""
