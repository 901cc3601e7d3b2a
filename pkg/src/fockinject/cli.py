"""Command-line entry point.

Exit codes: 0 all checks pass, 1 an embedded check failed, 2 config or I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments, plotting
from .experiments import ConfigError
from .probestim import regime_grid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    path = Path(args.config)
    try:
        cfg = experiments.load_config(path)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    base = path.parent
    try:
        outcome = experiments.execute(cfg, base)
    except ValueError as exc:
        # sizes or states the library rejects: still an input problem, nothing written
        _err(str(exc))
        return EXIT_CONFIG
    try:
        written = experiments.write_artifacts(cfg, outcome, base)
    except (OSError, ValueError) as exc:
        _err(f"could not write artifacts: {exc}")
        return EXIT_CONFIG
    for note in outcome.notes:
        print(f"info {note}")
    for name, ok, detail in outcome.checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK if outcome.passed else EXIT_FAIL


def cmd_validate(args) -> int:
    path = Path(args.config)
    try:
        cfg = experiments.load_config(path)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(f"ok {cfg['experiment']} config {path}")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        xlabel, ylabel, series = plotting.collect_series(args.csv, args.x, args.y, args.series)
        if args.gnuplot:
            for p in plotting.write_gnuplot(args.out, xlabel, ylabel, series):
                print(f"wrote {p}")
        else:
            plotting.write_svg(args.out, xlabel, ylabel, series)
            print(f"wrote {args.out}")
    except (plotting.PlotError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return EXIT_OK


def cmd_regimes(args) -> int:
    rows = [[k, r, v] for k, r, v in regime_grid()]
    text = experiments.render_csv(["k_class", "r_class", "regime"], rows)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            _err(str(exc))
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fockinject", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config and write its CSV artifacts")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="render a result CSV as SVG or gnuplot files")
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    p.add_argument("--x", help="x column (default depends on the CSV header)")
    p.add_argument("--y", help="y column")
    p.add_argument("--series", help="column that splits rows into series")
    p.add_argument("--gnuplot", action="store_true", help="write <out>.dat and <out>.gp instead of SVG")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("regimes", help="print the simulability grid as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_regimes)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
