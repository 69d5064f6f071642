"""Batch command line: strag plan|metrics|simulate|e2e|table.

Exit codes: 0 success, 2 regime error, 3 oracle/analytic mismatch,
4 decode failure, 5 budget exceeded.

Per-command config keys (on top of the scheme keys in experiments.py):
  simulate  speed {base_time, slowdown, overhead, jitter}, trials,
            workload {rows, cols_a, density_a, cols_b, density_b}
            (expectation mode) or matrices {...} (measured mode)
  e2e       matrices {rows, cols_a, density_a, cols_b, density_b, seed},
            dead [...], random_states (default 20), s / q overrides
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import experiments as ex
from .metrics import BudgetExceeded, DEFAULT_BUDGET, SchemeMetrics, compute_metrics, metrics_rows
from .schemes import RegimeError
from .simulator import SpeedModel, Workload, compare_schemes

EXIT_OK, EXIT_REGIME, EXIT_MISMATCH, EXIT_DECODE, EXIT_BUDGET = 0, 2, 3, 4, 5


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    # write then rename so readers never see a half-written file
    path = Path(out)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _configs(args) -> list[dict]:
    cfgs = ex.load_configs(args.config)
    if args.seed is not None:
        cfgs = [{**c, "seed": args.seed} for c in cfgs]
    return cfgs


def cmd_plan(args) -> int:
    cfgs = _configs(args)
    plans = [ex.build_plan(c) for c in cfgs]
    for p in plans:
        print(ex.describe_plan(p), file=sys.stderr)
    data = plans[0].to_json() if len(plans) == 1 else [p.to_json() for p in plans]
    _write(json.dumps(data, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    analytic, oracle = args.analytic, args.oracle
    if not (analytic or oracle):
        analytic = oracle = True
    results, statuses = [], []
    code = EXIT_OK
    for cfg in _configs(args):
        plan = ex.build_plan(cfg)
        try:
            m = compute_metrics(plan, analytic, oracle, args.kappa, args.budget)
        except BudgetExceeded as exc:
            print(f"budget exceeded: {exc}", file=sys.stderr)
            results.append(SchemeMetrics(plan.scheme_id, plan.n, plan.delta, dict(plan.params)))
            statuses.append("budget_exceeded")
            code = max(code, EXIT_BUDGET)
            continue
        bad = m.mismatches() if analytic and oracle else []
        for line in bad:
            print(f"mismatch {plan.scheme_id}: {line}", file=sys.stderr)
        if bad:
            code = EXIT_MISMATCH if code == EXIT_OK else code
        results.append(m)
        statuses.append("mismatch" if bad else "ok")
    _write(metrics_rows(results, statuses), args.out)
    return code


def cmd_simulate(args) -> int:
    cfgs = _configs(args)
    if not cfgs:
        _write(compare_schemes([], 0, SpeedModel()), args.out)
        return EXIT_OK
    head = cfgs[0]
    speed = SpeedModel.from_json(head.get("speed", {}))
    trials = int(head.get("trials", 10))
    work = head.get("workload")
    workload = Workload(**work) if work else None
    runs = []
    for cfg in cfgs:
        plan = ex.build_plan(cfg)
        entry = {"label": cfg.get("label", plan.scheme_id), "plan": plan}
        if workload is None:
            entry["a"], entry["b"] = ex.e2e_matrices(cfg, plan)
            if plan.kind == "matvec":
                entry["b"] = None
        runs.append(entry)
    _write(compare_schemes(runs, trials, speed, seed=args.seed or 0, workload=workload), args.out)
    return EXIT_OK


def cmd_e2e(args) -> int:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["label", "scenario", "state", "kappa", "rel_error", "passed", "message"])
    code = EXIT_OK
    for cfg in _configs(args):
        label = cfg.get("label", cfg["scheme"])
        for name, state, kappa, err, ok, msg in ex.run_e2e(cfg, budget=args.budget):
            wr.writerow([label, name, " ".join(map(str, state)), f"{kappa:.4g}", f"{err:.3g}",
                         int(ok), msg])
            if not ok:
                print(f"{label} {name}: decode failed (kappa {kappa:.4g}, residual {err:.3g}) {msg}",
                      file=sys.stderr)
                code = EXIT_DECODE
    _write(buf.getvalue(), args.out)
    return code


def cmd_table(args) -> int:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(ex.TABLE_HEADER)
    ids = list(ex.TABLES) if args.table == "all" else [args.table]
    for tid in ids:
        for row in ex.table_rows(tid, budget=args.budget, kappa=args.kappa, seed=args.seed or 0):
            wr.writerow(row)
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strag", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="max subsets/states an oracle may enumerate")
        return p

    common(sub.add_parser("plan", help="build and serialize an encoding plan"))
    p = common(sub.add_parser("metrics", help="s, Q and condition numbers as CSV"))
    p.add_argument("--analytic", action="store_true")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--kappa", action="store_true")
    common(sub.add_parser("simulate", help="compare completion times across schemes"))
    common(sub.add_parser("e2e", help="encode, straggle, decode and check against A^T B"))
    p = common(sub.add_parser("table", help="regenerate a desk-scale table"), config=False)
    p.add_argument("table", choices=sorted(ex.TABLES) + ["all"])
    p.add_argument("--kappa", action=argparse.BooleanOptionalAction, default=True)
    return ap


COMMANDS = {"plan": cmd_plan, "metrics": cmd_metrics, "simulate": cmd_simulate,
            "e2e": cmd_e2e, "table": cmd_table}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
