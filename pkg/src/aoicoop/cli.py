"""Command-line entry point.

Subcommands: ``validate`` (check a config and echo the normalized spec),
``trace`` (generate PHY decode-outcome traces and probability tables),
``run`` (execute an experiment sweep), and ``oracle`` (cross-check the event
engine against the brute-force integrator). Exit codes: 0 on success, 1 on
validation errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import AoicoopError, ConfigValidationError
from .experiments import oracle_check, run_experiment, trace_from_spec, validate_config

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoicoop",
        description="Status-update freshness simulator for cooperative access points")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("validate", "validate a config file and echo the normalized spec"),
        ("trace", "generate PHY decode-outcome traces and probability tables"),
        ("run", "run the experiment sweep described by a config file"),
        ("oracle", "cross-check the event engine against the brute-force integrator"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("config", help="path to an INI experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
    return parser


def _overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        dotted, sep, value = pair.partition("=")
        if not sep or "." not in dotted:
            raise ConfigValidationError([f"--set expects SECTION.KEY=VALUE, got {pair!r}"])
        out[dotted.strip()] = value.strip()
    return out


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        spec = validate_config(args.config, overrides=_overrides(args.overrides))
    except ConfigValidationError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        if args.command == "validate":
            print(spec.describe())
            return EXIT_OK
        if args.command == "trace":
            result = trace_from_spec(spec)
            for path in result.trace_paths:
                print(f"wrote {path}")
            print(f"wrote {result.table_path}")
            return EXIT_OK
        if args.command == "run":
            result = run_experiment(spec)
            print(f"wrote {result.csv_path} ({len(result.rows)} rows)")
            for path in result.plot_paths:
                print(f"wrote {path}")
            print(f"wrote {result.manifest_path}")
            if result.table_path:
                print(f"wrote {result.table_path}")
            return EXIT_OK
        # oracle
        reports = oracle_check(spec)
        worst = max(r["rel_err"] for r in reports)
        for r in reports:
            status = "ok" if r["ok"] else "FAIL"
            print(f"{status} {r['mode']:<10s} {r['delay']:<10s} n={r['n_sensors']}"
                  f" engine={r['engine_ms']:.4f}ms oracle={r['oracle_ms']:.4f}ms"
                  f" rel_err={r['rel_err']:.2e}")
        print(f"worst relative disagreement: {worst:.2e}")
        return EXIT_OK if all(r["ok"] for r in reports) else EXIT_RUNTIME
    except AoicoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
