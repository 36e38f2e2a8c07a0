"""Command line entry point: ``simulate``, ``identify`` and ``montecarlo``.

Exit codes: 0 success, 2 input or config error, 3 identification failure,
4 study failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from .config import ConfigError, load_config
from .datasim import CSVFormatError, read_csv, write_csv
from .pipeline import IdentificationError, PipelineConfig, identify_miso_minimal
from .study import run_study, simulate_dataset, write_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IDENT = 3
EXIT_STUDY = 4
MAX_FAILED_FRACTION = 0.2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load(path, require_system=True):
    try:
        return load_config(path, require_system)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    data, variances = simulate_dataset(cfg, cfg.seed)
    data.meta["realized_variances"] = variances.tolist()
    out = args.out[:-4] if args.out.endswith(".csv") else args.out
    write_csv(data, out + ".csv", out + ".meta.json")
    print(f"wrote {out}.csv ({data.n_samples} rows) and {out}.meta.json")
    return EXIT_OK


def cmd_identify(args) -> int:
    pipe = PipelineConfig()
    if args.config:
        pipe = _load(args.config, require_system=False).pipeline
    try:
        data = read_csv(args.data)
    except OSError as exc:
        _err(f"cannot read {args.data}: {exc.strerror}")
        return EXIT_INPUT
    if data.n_inputs < 1:
        _err("data needs an output column and at least one input column")
        return EXIT_INPUT
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = identify_miso_minimal(data, pipe)
    except IdentificationError as exc:
        _err(f"identification failed: {exc}")
        eig = getattr(exc.cause, "eigenvalues", None)
        if eig is not None:
            print("diagnostic eigenvalues: " + " ".join(f"{v:.6g}" for v in np.asarray(eig)),
                  file=sys.stderr)
        return EXIT_IDENT
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rep.to_json())
        fh.write("\n")
    print(rep.summary())
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _load(args.config)
    if cfg.n_runs < 2:
        raise ConfigError("n_runs", "a study needs at least 2 runs")
    if args.workers is not None:
        cfg.workers = args.workers
    cfg.check_study()
    res = run_study(cfg)
    write_study(res, args.out)
    s = res.summary
    print(f"{s['n_runs']} runs, {s['failed_runs']} failed, orders correct in {s['orders_correct']}")
    for row in s["coefficients"] + s["variances"]:
        if row["mean"] is None:
            print(f"  {row['parameter']:>10s}  true {row['true']:+.4f}  (no runs)")
        else:
            print(f"  {row['parameter']:>10s}  true {row['true']:+.4f}  mean {row['mean']:+.4f}  std {row['std']:.4f}")
    if s["failed_runs"] > MAX_FAILED_FRACTION * s["n_runs"]:
        _err(f"{s['failed_runs']} of {s['n_runs']} runs failed")
        return EXIT_STUDY
    return EXIT_OK


def build_parser():
    p = _Parser(prog="misoeiv", description="Errors-in-variables MISO identification")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate one noisy dataset")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output prefix; writes PREFIX.csv and PREFIX.meta.json")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("identify", help="identify channel transfer functions from a CSV file")
    s.add_argument("--data", required=True)
    s.add_argument("--config", help="optional config supplying pipeline settings")
    s.add_argument("--out", required=True, help="report JSON path")
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("montecarlo", help="run a repeated simulation study")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_montecarlo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CSVFormatError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
