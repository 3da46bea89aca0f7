"""Command-line interface: ``charncp {test,nulltable,study,simulate}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import IO_EXIT_CODE, CharnError, ParameterError
from .ingest import IngestSpec, Transform, export_series, ingest
from .kernel import BandwidthRule, Kernel, Mode
from .model import DgpSpec, generate
from .nulldist import (
    DEFAULT_GRID,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
    NullTable,
    build_table,
    load_or_build,
)
from .seqtest import WeightSpec, run_test
from .study import TABLE_PRESETS, Cell, CSV_COLUMNS, csv_row, format_study, load_study, run_study

log = logging.getLogger("charncp")


def write_atomic(path: str | Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    if isinstance(data, str):
        tmp.write_text(data)
    else:
        tmp.write_bytes(data)
    os.replace(tmp, path)


def _null_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="null-table grid size (default %(default)s)")
    p.add_argument("--reps", type=int, default=DEFAULT_REPLICATIONS, help="null-table replications (default %(default)s)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="null-table seed (default %(default)s)")
    p.add_argument("--threads", type=int, default=1)


def _resolve_table(args) -> NullTable:
    if args.null_table:
        path = Path(args.null_table)
        if path.exists():
            return NullTable.load(path)
        log.warning("null table %s not found; building it (grid=%d, reps=%d, seed=%d)", path, args.grid, args.reps, args.seed)
        table = build_table(args.grid, args.reps, args.seed, args.threads)
        table.save(path)
        return table
    return load_or_build(args.grid, args.reps, args.seed, threads=args.threads)


def _weight(text: str) -> WeightSpec:
    try:
        return WeightSpec.parse(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_test(args) -> int:
    series = ingest(
        IngestSpec(
            args.input,
            column=args.column,
            transform=Transform(args.transform),
            delimiter=args.delimiter,
            header=not args.no_header,
            label_column=args.label_column,
        )
    )
    table = _resolve_table(args)
    report = run_test(
        series,
        kernel=Kernel(args.kernel),
        bw=BandwidthRule(c=args.bandwidth_c, exponent=args.bandwidth_exponent),
        wspec=args.weight,
        mode=Mode(args.mode),
        var_floor=args.var_floor,
        on_degenerate=args.on_degenerate,
    )
    p = table.p_value(report.ks_stat)
    report = report.with_null(p, table.critical_values())
    extra = {
        "level": args.level,
        "decision": "reject" if p <= args.level else "fail-to-reject",
        "critical_value": table.critical_value(args.level),
        "changepoint_label": (
            series.row_labels[report.changepoint_index] if series.row_labels is not None else None
        ),
        "weight": str(args.weight),
        "kernel": args.kernel,
        "null_table": {"grid_size": table.grid_size, "replications": table.replications, "seed": table.seed},
    }
    print(report.to_json(**extra))
    if args.out:
        write_atomic(args.out, report.profile_csv())
    return 0


def cmd_nulltable(args) -> int:
    table = build_table(args.grid, args.reps, args.seed, args.threads)
    write_atomic(args.out, table.to_bytes())
    if args.quantiles_out:
        write_atomic(args.quantiles_out, table.quantiles_csv())
    sys.stdout.write(table.quantiles_csv())
    return 0


def cmd_study(args) -> int:
    if args.config:
        configs = load_study(args.config)
    else:
        configs = TABLE_PRESETS[args.preset]
    if args.replications is not None:
        from dataclasses import replace

        configs = [replace(c, replications=args.replications) for c in configs]
    table = _resolve_table(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    partial = out / "partial.csv"
    with partial.open("w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")

        def on_cell(cell: Cell) -> None:
            fh.write(",".join(str(v) for v in csv_row(cell)) + "\n")
            fh.flush()
            print(f"{cell.family} n={cell.n} zeta={cell.zeta:g} c={cell.c:g}: {100 * cell.rejection_rate:.1f}%", file=sys.stderr)

        result = run_study(configs, table, threads=args.threads, on_cell=on_cell)
    write_atomic(out / "rejection.csv", result.to_csv())
    write_atomic(out / "rejection.txt", result.to_text())
    write_atomic(out / "study.ini", format_study(configs))
    partial.unlink()
    sys.stdout.write(result.to_text())
    return 0


def cmd_simulate(args) -> int:
    spec = DgpSpec.load(args.config) if args.config else DgpSpec()
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    text = export_series(generate(spec))
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="charncp",
        description="Residual-based KS test for a change in the innovation law of nonparametric AR(1)/ARCH models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run the change-point test on a data file")
    p.add_argument("--input", required=True)
    p.add_argument("--column", default="0", help="column name or 0-based index")
    p.add_argument("--label-column", default=None, help="column carried through as row labels (dates)")
    p.add_argument("--transform", choices=[t.value for t in Transform], default="none")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="hetero")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], default="gaussian")
    p.add_argument("--bandwidth-c", type=float, default=1.0)
    p.add_argument("--bandwidth-exponent", type=float, default=-0.25)
    p.add_argument("--weight", type=_weight, default=WeightSpec(), help="trivial or interval:a,b,kappa")
    p.add_argument("--var-floor", type=float, default=1e-12, help="variance estimates at or below this fail (default %(default)s)")
    p.add_argument(
        "--on-degenerate",
        choices=["raise", "limit"],
        default="raise",
        help="'limit' gives design points whose kernel neighbourhood underflowed the limiting residual 0",
    )
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--null-table", default=None, help="null-table file (built there if missing)")
    p.add_argument("--out", default=None, help="write the s-profile CSV here")
    _null_args(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("nulltable", help="simulate and save a null table")
    _null_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--quantiles-out", default=None)
    p.set_defaults(func=cmd_nulltable)

    p = sub.add_parser("study", help="run a Monte Carlo rejection-rate study")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="INI study file")
    src.add_argument("--preset", choices=sorted(TABLE_PRESETS))
    p.add_argument("--replications", type=int, default=None, help="override replications of every row")
    p.add_argument("--null-table", default=None)
    p.add_argument("--out", dest="out_dir", required=True, help="output directory")
    _null_args(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("simulate", help="simulate a series from a DGP config")
    p.add_argument("--config", default=None, help="key = value DGP file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CharnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
