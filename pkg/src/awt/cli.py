"""Command-line entry point.

Subcommands: awt-search, train, eval, toy, bounds, ntk, run.  Global flags:
--config PATH, --seed N (overrides the config seed), --threads N (default
1; applied to the numeric libraries before they load), --out DIR.

Exit codes: 0 success, 2 invalid configuration, 3 IO failure.
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_CONFIG = 2
EXIT_IO = 3


def _set_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="awt",
                                 description="Adversarial winning-ticket "
                                             "search and training")
    ap.add_argument("--config", required=True, help="INI experiment config")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    ap.add_argument("--threads", type=int, default=1,
                    help="numeric library threads (default 1)")
    ap.add_argument("--out", default=None, help="override the output directory")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("awt-search", help="phase one: mask search")
    p = sub.add_parser("train", help="phase two: (adversarial) training")
    p.add_argument("--mask", default=None,
                   help="mask checkpoint (default: mask.ckpt in the out dir "
                        "if present)")
    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    sub.add_parser("toy", help="mixed-Gaussian toy experiment table")
    sub.add_parser("bounds", help="derivative/dynamics bound checks")
    p = sub.add_parser("ntk", help="dump the empirical kernel of a batch")
    p.add_argument("--batch", type=int, default=16)
    sub.add_parser("run", help="full two-phase experiment")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _set_threads(args.threads)

    from .config import ConfigError, load_config
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    from . import runner
    try:
        return runner.dispatch(args.command, cfg, args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
