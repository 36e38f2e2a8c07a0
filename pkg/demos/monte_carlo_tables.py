"""Repeated-record study of the two-input benchmark.

Runs the configuration in benchmark.cfg (100 records by default) and prints
per-parameter means and spreads of the raw channel coefficients and of the
error variance estimates.  Pass a smaller run count as the first argument
for a quick look, e.g. ``python3 monte_carlo_tables.py 20``.
"""
import os
import sys

from misoeiv.config import load_config
from misoeiv.study import run_study, write_study

here = os.path.dirname(os.path.abspath(__file__))
cfg = load_config(os.path.join(here, "benchmark.cfg"))
if len(sys.argv) > 1:
    cfg.n_runs = int(sys.argv[1])
res = run_study(cfg)
s = res.summary
print(f"{s['n_runs']} runs, {s['failed_runs']} failed; order patterns {s['order_counts']}")
print(f"{'parameter':>10s} {'true':>8s} {'mean':>9s} {'std':>8s}")
for row in s["coefficients"] + s["variances"]:
    print(f"{row['parameter']:>10s} {row['true']:8.4f} {row['mean']:9.4f} {row['std']:8.4f}")
if len(sys.argv) > 2:
    write_study(res, sys.argv[2])
