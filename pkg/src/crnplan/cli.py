"""Command-line entry point: ``crnplan <subcommand> [options]``.

Experiment subcommands write one CSV per call (``--out`` or
``$CRNPLAN_OUTPUT_DIR/<experiment>.csv``).  Environment parameters are set
with their own flags (``--horizon 10``) or with ``--param key=value``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigurationError
from .experiments import (
    DEFAULTS,
    EXPERIMENTS,
    SCHEMES,
    ExperimentConfig,
    default_output,
    gnuplot_script,
    run_experiment,
    write_csv,
)


def _int_list(text: str) -> tuple:
    try:
        values = tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _scheme_list(text: str) -> tuple:
    names = tuple(x for x in text.replace(",", " ").split())
    for name in names:
        if name not in SCHEMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {name!r}; choose from {SCHEMES}")
    return names


def _key_value(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip().replace("-", "_"), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crnplan",
        description="Seeded simulation planning experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENTS:
        d = DEFAULTS[name]
        p = sub.add_parser(name, help=f"run the {name} sweep and write a CSV")
        p.add_argument("--scheme", type=_scheme_list, default=SCHEMES,
                       help="comma-separated schemes (default: all three)")
        p.add_argument("--n-sims", type=_int_list, default=d["sims"],
                       help=f"simulation budgets (default: {','.join(map(str, d['sims']))})")
        p.add_argument("--runs", type=int, default=d["runs"],
                       help=f"runs (games for ludo) per point (default: {d['runs']})")
        p.add_argument("--salt", default="crn", help="master run salt")
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--param", type=_key_value, action="append", default=[],
                       metavar="KEY=VALUE", help="environment parameter override")
        for key, default in d["params"].items():
            p.add_argument("--" + key.replace("_", "-"), dest="p_" + key, type=type(default),
                           default=None, metavar=key.upper(), help=f"environment parameter (default: {default!r})")
        p.set_defaults(handler=_run)

    p = sub.add_parser("verify-fixtures", help="check oracles, seed vectors and Ludo rules")
    p.add_argument("--board-map", default=None, help="board-map file to check")
    p.set_defaults(handler=_verify)

    p = sub.add_parser("emit-plots", help="write a gnuplot script for a result CSV")
    p.add_argument("csv", help="CSV written by an experiment subcommand")
    p.add_argument("--out", default=None, help="script path (default: next to the CSV)")
    p.set_defaults(handler=_emit_plots)
    return parser


def _run(args) -> int:
    params = dict(args.param)
    for key in DEFAULTS[args.command]["params"]:
        value = getattr(args, "p_" + key)
        if value is not None:
            params[key] = value
    config = ExperimentConfig(args.command, args.scheme, args.n_sims, args.runs, args.salt, params)
    path = default_output(args.command, args.out)
    result = run_experiment(config, jobs=args.jobs)
    write_csv(result, path)
    print(f"wrote {path}")
    return 0


def _verify(args) -> int:
    from .fixtures import verify_fixtures

    report = verify_fixtures(board_map=args.board_map)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _emit_plots(args) -> int:
    from .experiments import read_csv

    csv_path = Path(args.csv)
    rows = read_csv(csv_path)
    if not rows:
        raise ConfigurationError(f"{csv_path} has no rows")
    schemes = list(dict.fromkeys(r["scheme"] for r in rows))
    out = Path(args.out) if args.out else csv_path.with_suffix(".gp")
    out.write_text(gnuplot_script(csv_path, schemes, rows[0]["experiment"]))
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigurationError, OSError) as exc:
        print(f"crnplan: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
