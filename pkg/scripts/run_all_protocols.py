#!/usr/bin/env python3
"""Run every protocol scenario once and write reports under results/.

Usage: python3 scripts/run_all_protocols.py [--seed N] [--trials N] [--out DIR]
"""

import argparse
from pathlib import Path

from dpacc.config import ScenarioConfig
from dpacc.scenarios import run_scenario, write_outputs

PROTOCOLS = ["auction", "fba", "rfq", "amm", "liquidation", "invariants"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()

    failures = 0
    for protocol in PROTOCOLS:
        cfg = ScenarioConfig(seed=args.seed, protocol=protocol, trials=args.trials)
        report = run_scenario(cfg)
        out_dir = args.out / protocol
        write_outputs(report, out_dir, "json")
        status = "ok" if report.violations == 0 else "VIOLATIONS"
        failures += report.violations
        print(f"{protocol:12s} trials={report.trials} {status} -> {out_dir}")
        for key, value in sorted(report.aggregates.items()):
            print(f"    {key}: {value}")
    raise SystemExit(0 if failures == 0 else 1)


if __name__ == "__main__":
    main()
