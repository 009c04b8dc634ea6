"""Command-line interface: experiment runs and reliability verification.

    parabound run --problem paper-sect4 --m-min 16 --m-max 256 --out results/
    parabound verify

`run` writes results.csv, breakdown.csv, results.txt and (unless suppressed)
convergence/breakdown figures into the output directory.  Values given in a
JSON config file passed via --config override the corresponding flags.  The
reference cache directory is taken from $PARABOUND_CACHE_DIR unless
--cache-dir is given.
"""

from __future__ import annotations

import argparse
import json
import sys

from .checks import run_all_checks
from .experiments import RunConfig, emit_tables, render_text_tables, run_matrix
from .figures import render_report_figures


def _doubling_range(m_min: int, m_max: int) -> list:
    values = []
    m = m_min
    while m <= m_max:
        values.append(m)
        m *= 2
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parabound",
                                     description="Extrapolated-Euler parabolic solver with "
                                                 "guaranteed maximum-norm error bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment matrix and write report tables")
    run_p.add_argument("--problem", default="paper-sect4",
                       help="builtin problem name or path to a problem JSON file")
    run_p.add_argument("--m-min", type=int, default=16)
    run_p.add_argument("--m-max", type=int, default=256)
    run_p.add_argument("--m-values", type=str, default=None,
                       help="comma-separated list overriding --m-min/--m-max")
    run_p.add_argument("--k-policy", choices=("sweep", "last"), default="sweep")
    run_p.add_argument("--eta-f-mode", choices=("simpson-paper", "quadrature"),
                       default="simpson-paper")
    run_p.add_argument("--estimator", choices=("residual-1d", "residual-1d-sharp"),
                       default="residual-1d")
    run_p.add_argument("--estimator-constant", type=float, default=None,
                       help="override the elliptic estimator reliability constant")
    run_p.add_argument("--oracle-tol", type=float, default=1e-9)
    run_p.add_argument("--reference", choices=("oracle", "exact"), default="oracle")
    run_p.add_argument("--initial-mode", choices=("interpolate", "l2-projection", "ritz"),
                       default="interpolate")
    run_p.add_argument("--n-per-element", type=int, default=9,
                       help="sup-norm sampling density per element")
    run_p.add_argument("--workers", type=int, default=1)
    run_p.add_argument("--chi-reciprocal", action="store_true",
                       help="print efficiencies as 1/chi in the text table")
    run_p.add_argument("--no-figures", action="store_true")
    run_p.add_argument("--cache-dir", default=None)
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--config", default=None,
                       help="JSON config file; its values override the flags")

    sub.add_parser("verify", help="run the reliability check suite")
    return parser


def _config_from_args(args) -> RunConfig:
    if args.m_values:
        m_values = [int(tok) for tok in args.m_values.split(",") if tok.strip()]
    else:
        m_values = _doubling_range(args.m_min, args.m_max)
    options = {
        "problem": args.problem,
        "m_values": m_values,
        "k_policy": args.k_policy,
        "eta_f_mode": args.eta_f_mode,
        "estimator": args.estimator,
        "estimator_constant": args.estimator_constant,
        "oracle_tol": args.oracle_tol,
        "reference": args.reference,
        "initial_mode": args.initial_mode,
        "n_per_element": args.n_per_element,
        "workers": args.workers,
        "chi_reciprocal": args.chi_reciprocal,
        "figures": not args.no_figures,
        "cache_dir": args.cache_dir,
        "out_dir": args.out,
    }
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            overrides = json.load(handle)
        unknown = set(overrides) - set(options)
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        options.update(overrides)
    return RunConfig(**options)


def cmd_run(args) -> int:
    config = _config_from_args(args)
    records = run_matrix(config)
    paths = emit_tables(records, config.out_dir, chi_reciprocal=config.chi_reciprocal)
    if config.figures:
        paths.update(render_report_figures(records, config.out_dir))
    print(render_text_tables(records, chi_reciprocal=config.chi_reciprocal))
    for r in records:
        note = f"  [row M={r.M} failed: {r.error}]" if r.error else ""
        print(f"# M={r.M}: {r.wall_time:.2f}s{note}")
    print("# wrote " + ", ".join(str(p) for p in paths.values()))
    failed = [r for r in records if r.error]
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return 0 if run_all_checks() else 1
    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
