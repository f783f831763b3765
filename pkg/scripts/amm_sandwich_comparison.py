#!/usr/bin/env python3
"""Compare blind (committed) AMM execution against transparent execution
under a sandwich attacker, sweeping the user order size.

Usage: python3 scripts/amm_sandwich_comparison.py [--seed N] [--trials N]
"""

import argparse
import random
from fractions import Fraction

from dpacc.amm import AMMPool
from dpacc.market import PriceProcess
from dpacc.venues import AMMUserOrder, run_amm_scenario


def run_mode(mode, seed, order_size, pool_fee):
    pool = AMMPool("p", 0, 1, 1_000_000, 100_000_000, pool_fee)
    prices = PriceProcess(Fraction(100), Fraction(1, 100), random.Random(seed))
    orders = [AMMUserOrder("x_for_y", order_size, commit_height=h)
              for h in range(0, 8, 2)]
    return run_amm_scenario(pool, orders, mode, prices, blocks=10)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--pool-fee", type=float, default=0.003)
    args = parser.parse_args()
    fee = Fraction(str(args.pool_fee))

    print(f"{'size':>8s} {'blind out':>12s} {'attacked out':>12s} {'loss %':>8s}")
    for order_size in (1_000, 5_000, 20_000, 50_000):
        blind_total = attacked_total = 0
        for trial in range(args.trials):
            seed = args.seed * 10_000 + trial
            blind = run_mode("dpacc", seed, order_size, fee)
            attacked = run_mode("transparent", seed, order_size, fee)
            blind_total += sum(ex.amount_out for ex in blind)
            attacked_total += sum(ex.amount_out for ex in attacked)
        loss = 100 * (1 - attacked_total / blind_total)
        print(f"{order_size:>8d} {blind_total:>12d} {attacked_total:>12d} "
              f"{loss:>7.3f}%")


if __name__ == "__main__":
    main()
