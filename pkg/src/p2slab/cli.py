"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .harness import config as hc
from .harness.fit import FIT_COLUMNS, FitError, fit_power_law
from .harness.io import read_results, rows_to_csv, write_results
from .harness.runner import ExperimentError, columns_for, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route it to the config code instead
    def error(self, message: str):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _threads(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="p2slab", description="Problem-to-simulator mapping laboratory.",
                epilog=hc.schema_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(hc.KINDS + ("fit",)) + "}")
    for kind in hc.KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment", epilog=hc.schema_help(),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="config file; the kind's defaults are used when omitted")
        sp.add_argument("--out", help="output CSV (overrides 'out'; stdout when neither is set)")
        sp.add_argument("--seed", type=_seed, help="overrides 'seed'")
        sp.add_argument("--threads", type=_threads, help=f"overrides 'threads' and ${hc.THREADS_ENV}")
        sp.add_argument("--quiet", action="store_true", help="suppress progress messages")
    fp = sub.add_parser("fit", help="power-law fit of two CSV columns")
    fp.add_argument("--input", required=True, help="CSV produced by a sweep")
    fp.add_argument("--x", required=True, help="x column")
    fp.add_argument("--y", required=True, help="y column")
    fp.add_argument("--where", action="append", default=[], metavar="COL=VALUE",
                    help="keep rows whose column equals the value (repeatable)")
    fp.add_argument("--out", help="output CSV (stdout when omitted)")
    fp.add_argument("--quiet", action="store_true")
    return p


def _log(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _run_kind(args) -> int:
    try:
        if args.config:
            cfg = hc.load_config(args.config, kind=args.command)
        else:
            cfg = hc.default_config(args.command)
        if args.seed is not None:
            cfg.values["seed"] = args.seed
        threads = cfg.resolved_threads(args.threads)
    except hc.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg["out"]
    _log(args, f"running {cfg.kind} on {threads} thread(s)")
    try:
        rows = run_experiment(cfg, threads)
        cols = columns_for(cfg)
        if out:
            write_results(rows, cols, out)
            _log(args, f"wrote {len(rows)} rows to {out}")
        else:
            sys.stdout.write(rows_to_csv(rows, cols))
    except (ExperimentError, OSError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _run_fit(args) -> int:
    filters = []
    for item in args.where:
        if "=" not in item:
            print(f"config error: --where expects COL=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        col, val = item.split("=", 1)
        filters.append((col.strip(), val.strip()))
    try:
        _, rows = read_results(args.input)
        from .harness.io import format_value, parse_value

        def keep(r) -> bool:
            return all(col in r and (format_value(r[col]) == val or r[col] == parse_value(val))
                       for col, val in filters)

        res = fit_power_law(rows, args.x, args.y, keep)
        if args.out:
            write_results([res.as_row()], FIT_COLUMNS, args.out)
        else:
            sys.stdout.write(rows_to_csv([res.as_row()], FIT_COLUMNS))
    except (FitError, OSError, ValueError, KeyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr, end="")
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.command == "fit":
        return _run_fit(args)
    return _run_kind(args)


if __name__ == "__main__":
    sys.exit(main())
