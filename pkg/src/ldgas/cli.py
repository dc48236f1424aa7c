"""Command-line entry point.

One subcommand per experiment kind; each takes --config PATH plus optional
--out DIR, --seed N (overrides the config) and --format csv|json|both.
Exit codes: 0 pass, 1 tolerance failure, 2 usage or config error,
3 internal / resource error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import AccuracyError, ConfigError, DomainError, ResourceError
from .harness import KINDS, load_config, run_experiment

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldgas",
        description="Ideal quantum gas fluctuation experiments",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--format",
            choices=("csv", "json", "both"),
            default="json",
            help="emission format",
        )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        cfg = load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError("kind", f"config says {cfg.kind!r}, subcommand is {args.kind!r}")
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    formats = ("csv", "json") if args.format == "both" else (args.format,)
    out_dir = args.out if args.out is not None else cfg.out_dir
    try:
        record = run_experiment(cfg, out_dir=out_dir, formats=formats)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AccuracyError, ResourceError, DomainError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    for row in record.results:
        print("  ".join(f"{k}={v}" for k, v in row.items()))
    verdict = "PASS" if record.passed else "FAIL"
    print(f"{cfg.kind}: {verdict}")
    return EXIT_PASS if record.passed else EXIT_TOLERANCE


if __name__ == "__main__":
    raise SystemExit(main())
