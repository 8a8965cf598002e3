#!/usr/bin/env python3
"""Successive-approximation history R_n for the bundled problems.

For each run prints R_n, the per-step constant C_n = R_{n+1} / (xbar R_n)
and the factorial-envelope estimate (n+1) C_n, which stays roughly flat
when R_n decays like (C xbar)^n / n!.
"""

import argparse
import csv
import sys
from dataclasses import replace

from hypma import config as C
from hypma.cli import build_problem
from hypma.solver import solve


def history(name, h=None):
    cfg = C.load(C.bundled_path(name))
    if h is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, h_x=h, h_y=h))
    cs, init, _ = build_problem(cfg)
    res = solve(cs, init, cfg.grid, raise_on_failure=False)
    xbar = max(cfg.grid.x_max, -cfg.grid.x_min)
    return res.history, xbar


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=["example7_1", "example7_2", "example7_3"])
    ap.add_argument("--h", type=float, default=None, help="override the bundled grid step")
    ap.add_argument("--out", default="contraction_history.csv")
    args = ap.parse_args(argv)

    rows = []
    for name in args.names:
        R, xbar = history(name, args.h)
        print(f"{name}  (xbar = {xbar})")
        for n, r in enumerate(R, start=1):
            c = R[n] / (xbar * r) if n < len(R) and r > 0 else float("nan")
            rows.append({"problem": name, "n": n, "R_n": r, "C_n": c, "envelope": (n + 1) * c})
            print(f"  n={n:2d}  R_n={r:.3e}  C_n={c:.3e}  (n+1)C_n={(n + 1) * c:.3e}")

    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["problem", "n", "R_n", "C_n", "envelope"])
        w.writeheader()
        w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
