"""Command line entry point for the scenario harness.

Exit codes: 0 on a clean run, 1 on any invariant violation, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ScenarioConfig, load_config
from .scenarios import run_scenario, write_outputs

PROTOCOLS = ["auction", "fba", "rfq", "amm", "liquidation", "invariants"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpacc-sim",
        description="Deterministic commit-reveal protocol simulator",
    )
    sub = parser.add_subparsers(dest="protocol", required=True)
    for name in PROTOCOLS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", help="TOML scenario config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--trials", type=int, help="override the trial count")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=["json", "csv"], default="json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
        else:
            if args.seed is None:
                raise ConfigError(["seed is mandatory (--seed or config file)"])
            cfg = ScenarioConfig(seed=args.seed)
        cfg.protocol = args.protocol
        if args.seed is not None:
            cfg.seed = args.seed
        if args.trials is not None:
            cfg.trials = args.trials
        errors = cfg.validate()
        if errors:
            raise ConfigError(errors)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2

    report = run_scenario(cfg)
    write_outputs(report, args.out, args.format)
    print(
        f"{cfg.protocol}: trials={report.trials} "
        f"violations={report.violations} aggregates={report.aggregates}"
    )
    return 0 if report.violations == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
