"""Command line entry point: ``hororatio SUBCOMMAND --config PATH --out PATH``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import ConfigError, load_config
from .runs import run_audit_suite, run_counterexample_j, run_ratio_convergence

RUNNERS = {
    "ratio-converge": run_ratio_convergence,
    "audit": run_audit_suite,
    "counterexample-j": run_counterexample_j,
}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hororatio", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value experiment file")
        p.add_argument("--out", help="CSV path (overrides 'out' in the config)")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed)
        out = args.out or (cfg.resolve(cfg.out) if cfg.out else None)
        if out is None:
            raise ConfigError("no output path: pass --out or set 'out' in the config")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        start = time.perf_counter()
        rows = RUNNERS[args.command](cfg, out, threads=args.threads)
    except ConfigError as exc:
        print(f"hororatio: config error: {exc}", file=sys.stderr)
        return 2
    logging.getLogger("hororatio").info(
        "%s: %d rows to %s in %.1fs", args.command, len(rows), out, time.perf_counter() - start
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
