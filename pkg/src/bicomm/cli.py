"""Command line entry point.

Subcommands ``probe-kernel``, ``bootstrap``, ``awf``, ``norms`` and
``experiment`` all read one TOML config (see :mod:`bicomm.config`) and
write a JSON report.  Exit codes: 0 success, 2 validation error, 3 resource
cap reached.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .budget import ResourceCapExceeded
from .config import ConfigError, load_config
from .harness import report_json, run_awf, run_bootstrap, run_experiment, run_norms, run_probe, write_report

log = logging.getLogger("bicomm")

EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 2, 3

_TASKS = {
    "probe-kernel": (run_probe, "size, regularity and non-degeneracy checks of the configured kernel"),
    "bootstrap": (run_bootstrap, "the separated cube triple around Q1 with its diagnostics"),
    "awf": (run_awf, "approximate weak factorization of the Haar function and the oscillation bound"),
    "norms": (run_norms, "symbol-side and off-support norm estimates"),
    "experiment": (run_experiment, "the full regime experiment across dilations"),
}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bicomm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in _TASKS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--seed", type=_u64, default=None, help="overrides the config seed")
        sp.add_argument("--out", type=Path, default=None, help="report path (default: config out, else stdout)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    task = _TASKS[args.command][0]
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        report = task(cfg, base_dir=args.config.parent)
    except ResourceCapExceeded as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = args.out or (Path(cfg.out) if cfg.out else None)
    if out is None:
        sys.stdout.write(report_json(report))
    else:
        write_report(report, out, with_csv=args.command == "experiment")
        log.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
