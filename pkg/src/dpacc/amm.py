"""Constant-product AMM pool with integer reserves and an input fee.

Reserves are whole token units; swap output is rounded down, so the product
of reserves never decreases and conservation checks stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .ledger import ExecError, LedgerError, TokenVector


class AMMPool:
    def __init__(
        self,
        pool_id: str,
        token_x: int,
        token_y: int,
        reserve_x: int,
        reserve_y: int,
        fee: Fraction = Fraction(0),
    ):
        if reserve_x <= 0 or reserve_y <= 0:
            raise LedgerError("reserves must be positive")
        if not (0 <= fee < 1):
            raise LedgerError("pool fee must be in [0, 1)")
        self.pool_id = pool_id
        self.token_x = token_x
        self.token_y = token_y
        self.reserve_x = reserve_x
        self.reserve_y = reserve_y
        self.fee = fee

    def price(self) -> Fraction:
        """Marginal price, Y per X."""
        return Fraction(self.reserve_y, self.reserve_x)

    def invariant(self) -> int:
        return self.reserve_x * self.reserve_y

    def reserves(self) -> tuple[int, int]:
        return self.reserve_x, self.reserve_y

    def set_reserves(self, rx: int, ry: int) -> None:
        self.reserve_x, self.reserve_y = rx, ry

    def reserves_vector(self, n: int) -> TokenVector:
        amounts = [0] * n
        amounts[self.token_x] += self.reserve_x
        amounts[self.token_y] += self.reserve_y
        return TokenVector(tuple(amounts))

    def token_pair(self, direction: str) -> tuple[int, int]:
        if direction == "x_for_y":
            return self.token_x, self.token_y
        if direction == "y_for_x":
            return self.token_y, self.token_x
        raise LedgerError(f"unknown direction {direction!r}")

    def quote_out(self, direction: str, amount_in: int) -> int:
        """Output for an input, without mutating the pool."""
        if amount_in < 1:
            raise ExecError("swap input must be at least 1")
        if direction == "x_for_y":
            r_in, r_out = self.reserve_x, self.reserve_y
        elif direction == "y_for_x":
            r_in, r_out = self.reserve_y, self.reserve_x
        else:
            raise LedgerError(f"unknown direction {direction!r}")
        effective = amount_in * (1 - self.fee)
        out = int(Fraction(r_out) * effective / (r_in + effective))
        return out

    def swap(self, direction: str, amount_in: int) -> int:
        out = self.quote_out(direction, amount_in)
        if out == 0:
            raise ExecError("swap output rounds to zero (dust)")
        if direction == "x_for_y":
            self.reserve_x += amount_in
            self.reserve_y -= out
        else:
            self.reserve_y += amount_in
            self.reserve_x -= out
        return out


def amm_swap(pool: AMMPool, direction: str, amount_in: int) -> int:
    return pool.swap(direction, amount_in)
