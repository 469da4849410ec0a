"""Command-line entry point for the verification suites.

Every suite is a subcommand; every config field has a flag of the same name,
and flags override values from an optional JSON config file. Exit codes:
0 all assertions passed, 1 bad configuration, 2 a suite assertion failed,
3 a retry budget was exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import SUITES, InvalidConfig, load_config
from .experiments import run_suite, write_record
from .trees import RetryBudgetExceeded

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSERTION = 2
EXIT_RETRY = 3


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _law(text: str):
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brwlab",
        description="Critical branching random walk simulation and verification suites.",
    )
    sub = parser.add_subparsers(dest="suite", required=True)
    for suite in SUITES:
        p = sub.add_parser(suite, help=f"run the {suite} suite")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--law", type=_law, default=None,
                       help="law name (binary, geometric, poisson) or inline JSON pmf")
        p.add_argument("--d", type=int, default=None, help="lattice dimension")
        p.add_argument("--n-grid", dest="n_grid", type=_int_tuple, default=None,
                       help="comma-separated strictly increasing horizons")
        p.add_argument("--r", type=int, default=None, help="multiplicity truncation")
        p.add_argument("--m", type=int, default=None, help="ancestor-marking generation")
        p.add_argument("--j", type=int, default=None, help="multiplicity index for gap/moment checks")
        p.add_argument("--trials", type=int, default=None, help="Monte Carlo sample size")
        p.add_argument("--estimation-n", dest="estimation_n", type=int, default=None,
                       help="horizon of the dedicated coefficient-estimation sample")
        p.add_argument("--estimation-trials", dest="estimation_trials", type=int,
                       default=None, help="trees in the coefficient-estimation sample")
        p.add_argument("--scale-trials", dest="scale_trials", type=int, default=None,
                       help="trees in the covariance-scale sample")
        p.add_argument("--ot-cap", dest="ot_cap", type=int, default=None,
                       help="points per optimal-transport matching")
        p.add_argument("--matchings", type=int, default=None,
                       help="independent matchings per distance")
        p.add_argument("--baseline-pairs", dest="baseline_pairs", type=int, default=None,
                       help="same-law pairs for the baseline")
        p.add_argument("--boot", type=int, default=None, help="bootstrap replicates")
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None,
                       help="trees per engine batch")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
        p.add_argument("--spine-term", dest="spine_term", default=None,
                       choices=("in_tree", "independent"),
                       help="spine-ancestor convention in the gap statistic")
        p.add_argument("--exploratory", action="store_const", const=True, default=None,
                       help="allow out-of-hypothesis dimensions, labeled as such")
        p.add_argument("--c-r", dest="c_r", type=float, default=None,
                       help="override the random-sum bound constant")
        p.add_argument("--c-mvn", dest="c_mvn", type=float, default=None,
                       help="override the Gaussian-comparison bound constant")
        p.add_argument("--p-grid", dest="p_grid", type=_float_tuple, default=None,
                       help="comma-separated stopping parameters in (0,1)")
        p.add_argument("--eps-grid", dest="eps_grid", type=_float_tuple, default=None,
                       help="comma-separated covariance perturbations")
        p.add_argument("--d-grid", dest="d_grid", type=_int_tuple, default=None,
                       help="comma-separated dimensions for the decomposition suite")
        p.add_argument("--no-write", action="store_true", help="skip writing output files")
    return parser


OVERRIDE_KEYS = (
    "law", "d", "n_grid", "r", "m", "j", "trials", "estimation_n",
    "estimation_trials", "scale_trials", "ot_cap", "matchings", "baseline_pairs", "boot",
    "batch_size", "seed", "threads", "out_dir", "spine_term", "exploratory",
    "c_r", "c_mvn", "p_grid", "eps_grid", "d_grid",
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in OVERRIDE_KEYS}
    try:
        cfg = load_config(args.config, args.suite, overrides)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record = run_suite(cfg, write=False)
    except RetryBudgetExceeded as exc:
        print(f"retry budget exhausted: {exc}", file=sys.stderr)
        return EXIT_RETRY
    if not args.no_write:
        paths = write_record(record, cfg.out_dir)
        for path in paths.values():
            print(f"wrote {path}")
    asserted = [c for c in record.cells if c.get("passed") is not None]
    print(
        f"{cfg.suite}: {len(record.cells)} cells, "
        f"{sum(1 for c in asserted if c['passed'])}/{len(asserted)} asserted checks passed, "
        f"{record.wall_clock_s:.1f}s"
    )
    if record.failures:
        for failure in record.failures:
            print(f"FAIL: {failure}", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
