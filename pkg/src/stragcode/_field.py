"""Arithmetic mod the Mersenne prime 2^61 - 1, plus rank and matching kernels."""

from __future__ import annotations

import numpy as np
from numba import njit

PRIME = (1 << 61) - 1

_P = np.uint64(PRIME)
_M31 = np.uint64((1 << 31) - 1)
_M30 = np.uint64((1 << 30) - 1)
_S1 = np.uint64(1)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S61 = np.uint64(61)


@njit(cache=True, inline="always")
def mulmod(a, b):
    # split both operands at bit 31 and fold 2^61 == 1
    a_hi = a >> _S31
    a_lo = a & _M31
    b_hi = b >> _S31
    b_lo = b & _M31
    mid = a_hi * b_lo + a_lo * b_hi
    x = ((a_hi * b_hi) << _S1) + (mid >> _S30) + ((mid & _M30) << _S31) + a_lo * b_lo
    x = (x & _P) + (x >> _S61)
    if x >= _P:
        x -= _P
    return x


@njit(cache=True, inline="always")
def submod(a, b):
    if a >= b:
        return a - b
    return a + _P - b


@njit(cache=True)
def powmod(a, e):
    r = np.uint64(1)
    while e > 0:
        if e & 1:
            r = mulmod(r, a)
        a = mulmod(a, a)
        e >>= 1
    return r


@njit(cache=True)
def invmod(a):
    return powmod(a, PRIME - 2)


@njit(cache=True)
def mulmod_array(a, b):
    out = np.empty_like(a)
    for k in range(a.size):
        out.flat[k] = mulmod(a.flat[k], b.flat[k])
    return out


@njit(cache=True)
def kron_mod(a, b):
    out = np.empty(a.size * b.size, dtype=np.uint64)
    for i in range(a.size):
        for j in range(b.size):
            out[i * b.size + j] = mulmod(a[i], b[j])
    return out


@njit(cache=True)
def rank_inplace(m):
    """Row-reduce ``m`` (destroyed) and return its rank mod p."""
    nr, nc = m.shape
    r = 0
    for c in range(nc):
        if r == nr:
            break
        piv = -1
        for i in range(r, nr):
            if m[i, c] != 0:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for j in range(c, nc):
                tmp = m[r, j]
                m[r, j] = m[piv, j]
                m[piv, j] = tmp
        inv = invmod(m[r, c])
        for j in range(c, nc):
            m[r, j] = mulmod(m[r, j], inv)
        for i in range(r + 1, nr):
            f = m[i, c]
            if f != 0:
                for j in range(c, nc):
                    m[i, j] = submod(m[i, j], mulmod(f, m[r, j]))
        r += 1
    return r


@njit(cache=True)
def full_column_rank(m):
    """True iff rank(m) == number of columns; stops at the first column
    without a pivot. ``m`` is destroyed."""
    nr, nc = m.shape
    if nr < nc:
        return False
    r = 0
    for c in range(nc):
        piv = -1
        for i in range(r, nr):
            if m[i, c] != 0:
                piv = i
                break
        if piv < 0:
            return False
        if piv != r:
            for j in range(c, nc):
                tmp = m[r, j]
                m[r, j] = m[piv, j]
                m[piv, j] = tmp
        inv = invmod(m[r, c])
        for j in range(c + 1, nc):
            m[r, j] = mulmod(m[r, j], inv)
        m[r, c] = np.uint64(1)
        for i in range(r + 1, nr):
            f = m[i, c]
            if f != 0:
                for j in range(c, nc):
                    m[i, j] = submod(m[i, j], mulmod(f, m[r, j]))
        r += 1
    return True


@njit(cache=True)
def state_full_rank(rows, w):
    """rows: (n, ell, delta) field elements; w: completed task counts."""
    n, ell, delta = rows.shape
    total = 0
    for i in range(n):
        total += w[i]
    if total < delta:
        return False
    m = np.empty((total, delta), dtype=np.uint64)
    k = 0
    for i in range(n):
        for t in range(w[i]):
            m[k, :] = rows[i, t, :]
            k += 1
    return full_column_rank(m)


@njit(cache=True)
def state_saturating_matching(mask, w):
    """True iff the bipartite graph (unknowns vs processed rows, edges from
    ``mask``) has a matching covering every unknown."""
    n, ell, delta = mask.shape
    total = 0
    for i in range(n):
        total += w[i]
    if total < delta:
        return False
    adj = np.empty((total, delta), dtype=np.bool_)
    k = 0
    for i in range(n):
        for t in range(w[i]):
            adj[k, :] = mask[i, t, :]
            k += 1
    match_row = np.full(total, -1, dtype=np.int64)
    match_u = np.full(delta, -1, dtype=np.int64)
    from_u = np.empty(total, dtype=np.int64)
    seen = np.zeros(total, dtype=np.bool_)
    queue = np.empty(delta, dtype=np.int64)
    for u in range(delta):
        seen[:] = False
        head = 0
        tail = 1
        queue[0] = u
        found = -1
        while head < tail and found < 0:
            x = queue[head]
            head += 1
            for r in range(total):
                if adj[r, x] and not seen[r]:
                    seen[r] = True
                    from_u[r] = x
                    if match_row[r] < 0:
                        found = r
                        break
                    queue[tail] = match_row[r]
                    tail += 1
        if found < 0:
            return False
        r = found
        while True:
            x = from_u[r]
            prev = match_u[x]
            match_row[r] = x
            match_u[x] = r
            if x == u:
                break
            r = prev
    return True
