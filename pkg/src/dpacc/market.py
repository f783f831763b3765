"""External-market model: exact Martingale price process, arbitrageur
against a constant-product pool, and market makers racing a fee escalator.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .amm import AMMPool
from .ledger import LedgerError


@dataclass
class PriceProcess:
    """Multiplicative two-point Martingale: each step multiplies the price
    by (1 + delta) or (1 - delta) with equal probability, so the conditional
    expectation of the next price is exactly the current one.
    """

    price: Fraction
    delta: Fraction
    rng: random.Random

    def __post_init__(self):
        if self.price <= 0:
            raise LedgerError("price must be positive")
        if not (0 <= self.delta < 1):
            raise LedgerError("price step must be in [0, 1)")

    def step(self) -> Fraction:
        if self.delta == 0:
            return self.price
        if self.rng.getrandbits(1):
            self.price = self.price * (1 + self.delta)
        else:
            self.price = self.price * (1 - self.delta)
        return self.price

    def path(self, steps: int) -> list[Fraction]:
        """Price after each of `steps` blocks, starting from the current one."""
        return [self.step() for _ in range(steps)]


def write_price_path_csv(path, rows: list[tuple[int, Fraction]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["height", "price"])
        for height, price in rows:
            writer.writerow([height, float(price)])


@dataclass(frozen=True)
class ArbTrade:
    direction: str
    amount_in: int
    amount_out: int
    profit: Fraction  # in Y units at the external price


def _profit_x_for_y(pool: AMMPool, eps: Fraction, dx: int) -> Fraction:
    if dx < 1:
        return Fraction(0)
    return Fraction(pool.quote_out("x_for_y", dx)) - eps * dx


def _profit_y_for_x(pool: AMMPool, eps: Fraction, dy: int) -> Fraction:
    if dy < 1:
        return Fraction(0)
    return eps * pool.quote_out("y_for_x", dy) - dy


def _hill_climb(profit_fn, start: int) -> int:
    # profit is unimodal in the trade size; walk to the integer peak
    d = max(start, 0)
    while profit_fn(d + 1) > profit_fn(d):
        d += 1
    while d > 0 and profit_fn(d - 1) >= profit_fn(d):
        d -= 1
    return d


def arbitrageur_act(pool: AMMPool, eps: Fraction) -> Optional[ArbTrade]:
    """Trade the pool toward the external price.

    Executes the profit-maximizing integer trade against a frictionless
    external market at `eps`; afterwards the marginal price sits inside the
    no-arbitrage band [eps*(1-fee), eps/(1-fee)] up to one-unit granularity.
    Returns None when no profitable trade exists.
    """
    gamma = 1 - pool.fee
    price = pool.price()
    if price > eps / gamma:
        # pool overprices X: sell X into the pool
        est = (math.sqrt(float(gamma) * pool.reserve_x * pool.reserve_y / float(eps))
               - pool.reserve_x) / float(gamma)
        best = _hill_climb(lambda d: _profit_x_for_y(pool, eps, d), int(est))
        if best < 1 or _profit_x_for_y(pool, eps, best) <= 0:
            return None
        out = pool.swap("x_for_y", best)
        return ArbTrade("x_for_y", best, out, Fraction(out) - eps * best)
    if price < eps * gamma:
        # pool underprices X: buy X from the pool
        est = (math.sqrt(float(gamma) * pool.reserve_x * pool.reserve_y * float(eps))
               - pool.reserve_y) / float(gamma)
        best = _hill_climb(lambda d: _profit_y_for_x(pool, eps, d), int(est))
        if best < 1 or _profit_y_for_x(pool, eps, best) <= 0:
            return None
        out = pool.swap("y_for_x", best)
        return ArbTrade("y_for_x", best, out, eps * out - best)
    return None


@dataclass
class MarketMakerAgent:
    """Quotes at the current external price; accepts a fee-escalated request
    as soon as the fee covers its per-fill cost."""

    mm_id: str
    latency: int = 0  # blocks before the MM can respond
    fill_cost: Fraction = Fraction(0)


@dataclass(frozen=True)
class FeeSchedule:
    """Escalating inclusion fee: zero at the block directly after creation,
    then growing linearly with height."""

    created_at: int
    slope: Fraction

    def __post_init__(self):
        if self.slope < 0:
            raise LedgerError("fee slope must be non-negative")

    def fee(self, height: int) -> Fraction:
        if height <= self.created_at:
            raise LedgerError("fee undefined before the first eligible block")
        return self.slope * (height - self.created_at - 1)


def mm_accept_height(
    schedule: FeeSchedule, mm: MarketMakerAgent, horizon: int = 10_000
) -> Optional[int]:
    """Earliest height at which the fee covers this MM's fill cost."""
    first = schedule.created_at + 1 + mm.latency
    if mm.fill_cost <= 0:
        return first
    if schedule.slope == 0:
        return None
    # fee(H) >= cost  <=>  H >= created_at + 1 + cost/slope
    h = schedule.created_at + 1 + math.ceil(mm.fill_cost / schedule.slope)
    h = max(h, first)
    return h if h <= schedule.created_at + horizon else None


def race_accept(
    schedule: FeeSchedule, mms: list[MarketMakerAgent], horizon: int = 10_000
) -> Optional[tuple[int, MarketMakerAgent]]:
    """Dutch-auction race: the first MM whose threshold is met wins.

    Ties break toward lower latency, then MM id, for determinism.
    """
    best = None
    for mm in mms:
        h = mm_accept_height(schedule, mm, horizon)
        if h is None:
            continue
        key = (h, mm.latency, mm.mm_id)
        if best is None or key < best[0]:
            best = (key, h, mm)
    if best is None:
        return None
    return best[1], best[2]
