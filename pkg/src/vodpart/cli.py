"""Command line: ``vodpart run|preset|compare|validate``.

Exit status is 0 on success, 1 for configuration problems and 2 for
failures while running or writing results.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from vodpart.config import PRESETS, ConfigError, load_config
from vodpart.experiments import (
    OutputError,
    comparison_json,
    compare_analytic,
    ensure_dir,
    format_comparison,
    override,
    replicate,
    run_preset,
    run_sweep,
    write_sweep,
    write_text,
)
from vodpart.metrics import rows_to_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (replication r uses seed + r)")
    p.add_argument("--replications", type=int, help="runs per sweep point")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--warmup-fraction", type=float, help="fraction of the horizon discarded before tallying")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vodpart", description="Partitioned VoD server simulator and Erlang-B tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario or sweep from a JSON config")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("preset", help="run a figure preset")
    p.add_argument("name", help=", ".join(PRESETS))
    _common(p)

    p = sub.add_parser("compare", help="simulated vs analytic blocking per partition")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("validate", help="check a config file and exit")
    p.add_argument("config")
    return parser


def _cmd_run(args) -> int:
    cfg = override(load_config(args.config), seed=args.seed, warmup_fraction=args.warmup_fraction)
    if args.replications is not None and args.replications < 1:
        raise ConfigError("--replications must be at least 1", "replications")
    out = Path(args.out or cfg.output_dir)
    if cfg.sweep is not None:
        points = run_sweep(cfg, args.replications)
        write_sweep(cfg, points, out, args.format)
        for p in points:
            print(f"{p.series}\tx={p.x:g}\ty={p.y}\t[{p.ci_low}, {p.ci_high}]")
        return EXIT_OK

    reps = args.replications or cfg.replications
    reports = replicate(cfg.scenario, reps)
    ensure_dir(out)
    if args.format == "json":
        write_text(out / "reports.json", json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        write_text(out / "reports.csv", rows_to_csv(row for r in reports for row in r.csv_rows()))
    offered = sum(r.offered for r in reports)
    denied = sum(r.denied for r in reports)
    print(f"{reps} replications: offered={offered} denied={denied} blocking={denied / offered if offered else 'n/a'}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    if args.replications is not None and args.replications < 1:
        raise ConfigError("--replications must be at least 1", "replications")
    out = Path(args.out or f"out/{args.name}")
    points = run_preset(args.name, out, replications=args.replications, seed=args.seed,
                       warmup_fraction=args.warmup_fraction, fmt=args.format)
    for p in points:
        print(f"{p.series}\tx={p.x:g}\ty={p.y}\t[{p.ci_low}, {p.ci_high}]")
    print(f"results written to {out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = override(load_config(args.config), seed=args.seed, warmup_fraction=args.warmup_fraction)
    rows = compare_analytic(cfg.scenario)
    text = comparison_json(rows) if args.format == "json" else format_comparison(rows)
    print(text)
    if args.out:
        out = Path(args.out)
        ensure_dir(out)
        write_text(out / ("compare.json" if args.format == "json" else "compare.txt"), text + "\n")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    sc = cfg.scenario
    print(f"ok: {sc.scenario_id}: k={sc.plan.k} C={sc.plan.total} horizon={sc.horizon:g}"
          + (f" sweep={cfg.sweep.parameter} x{len(cfg.sweep.values)}" if cfg.sweep else ""))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "preset": _cmd_preset, "compare": _cmd_compare, "validate": _cmd_validate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutputError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
