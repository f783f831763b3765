#!/usr/bin/env python3
"""Show the RFQ fee escalator converging to the market makers' fill cost.

Sweeps the per-fill cost with competing MMs racing down the escalator and
prints the realized fee alongside the cost.

Usage: python3 scripts/rfq_fee_convergence.py [--mms N] [--slope F]
"""

import argparse
from fractions import Fraction

from dpacc.market import FeeSchedule, MarketMakerAgent, race_accept


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mms", type=int, default=4)
    parser.add_argument("--slope", type=float, default=0.1)
    args = parser.parse_args()
    slope = Fraction(str(args.slope))

    print(f"{'fill cost':>10s} {'accept H':>9s} {'realized fee':>13s}")
    for cost_tenths in range(0, 51, 5):
        cost = Fraction(cost_tenths, 10)
        mms = [MarketMakerAgent(f"mm{i}", latency=0, fill_cost=cost)
               for i in range(args.mms)]
        schedule = FeeSchedule(created_at=0, slope=slope)
        height, _ = race_accept(schedule, mms)
        fee = schedule.fee(height)
        print(f"{float(cost):>10.2f} {height:>9d} {float(fee):>13.2f}")


if __name__ == "__main__":
    main()
