"""Command line entry point.

    sociable run      --preset HD --seed 3 --out hd.csv
    sociable compare  --config scenario.cfg --out-dir results/
    sociable sweep    --preset HD --values 0.1,0.5,0.9 --out sweep.csv
    sociable validate --config scenario.cfg

Every scenario field is also a flag (``--vehicle-count 120``); flags override
the config file, which overrides the preset.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .config import (
    ConfigError,
    ScenarioConfig,
    config_from_mapping,
    dump_config,
    parse_config_values,
    parse_value,
)
from .experiments import DEFAULT_SWEEP, format_summary, run_comparison, run_sweep
from .metrics import records_csv, write_atomic
from .simulation import run

FIELD_NAMES = [f.name for f in fields(ScenarioConfig)]


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key = value scenario file")
    group = p.add_argument_group("scenario fields")
    for name in FIELD_NAMES:
        group.add_argument(
            "--" + name.replace("_", "-"), dest=name, metavar="VALUE", default=None
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sociable", description="Simulate SOCIABLE and restricted flooding on a road scenario."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="one run of the configured protocol")
    _add_scenario_flags(p)
    p.add_argument("--out", help="metrics CSV path (default: stdout)")

    p = sub.add_parser("compare", help="SOCIABLE and flooding on the same seed")
    _add_scenario_flags(p)
    p.add_argument("--out-dir", help="directory for the paired CSVs")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="SOCIABLE with the gateway weight pinned at each value")
    _add_scenario_flags(p)
    p.add_argument(
        "--values",
        default=",".join(str(v) for v in DEFAULT_SWEEP),
        help="comma separated W_EC values (default: 0.1..0.9)",
    )
    p.add_argument("--out", help="sweep CSV path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("validate", help="check a scenario and print it with defaults filled in")
    _add_scenario_flags(p)
    return parser


def scenario_from_args(args: argparse.Namespace) -> ScenarioConfig:
    values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values = parse_config_values(fh.read(), args.config)
    for name in FIELD_NAMES:
        raw = getattr(args, name)
        if raw is not None:
            values[name] = parse_value(name, raw)
    return config_from_mapping(values)


def _parse_values(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("values", f"cannot parse {raw!r}") from None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        config = scenario_from_args(args)
        if args.verb == "validate":
            sys.stdout.write(dump_config(config))
        elif args.verb == "run":
            report = run(config)
            text = records_csv(report.records)
            if args.out:
                write_atomic(args.out, text)
                print(format_summary(report.summary()))
            else:
                sys.stdout.write(text)
        elif args.verb == "compare":
            cmp = run_comparison(config, jobs=args.jobs)
            if args.out_dir:
                for path in cmp.write(args.out_dir):
                    print(f"wrote {path}")
            print(format_summary(cmp.summary()))
        elif args.verb == "sweep":
            sweep = run_sweep(config, _parse_values(args.values), jobs=args.jobs)
            if args.out:
                sweep.write(args.out)
                print(f"spearman(w_ec, add_ms) = {sweep.spearman()}")
            else:
                sys.stdout.write(sweep.csv())
    except (ConfigError, ValueError, OSError) as exc:
        print(f"sociable {args.verb}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
