import random
from fractions import Fraction

import pytest

from dpacc import crypto, venues
from dpacc.amm import AMMPool
from dpacc.crypto import Randomness, RootKey
from dpacc.ledger import ChainState, TokenVector
from dpacc.market import MarketMakerAgent, PriceProcess
from dpacc.venues import (
    AMMUserOrder,
    AuctionConfig,
    FBAOrder,
    FBAParticipant,
    LiquidationPosition,
    SealedBidder,
    VenueError,
    clearing_price,
    run_amm_scenario,
    run_fba,
    run_liquidation,
    run_rfq,
    run_sealed_bid_auction,
    settle_sealed_bids,
    verify_clearing,
)


def tv(*amounts):
    return TokenVector(tuple(amounts))


def key_of(seed: int) -> RootKey:
    return RootKey(random.Random(seed).randbytes(32))


def rnd_of(seed: int) -> Randomness:
    return Randomness(random.Random(seed + 10**6).randbytes(32))


class TestSettleSealedBids:
    def test_first_price(self):
        winner, price = settle_sealed_bids([("a", 5), ("b", 9)], "first")
        assert (winner, price) == ("b", 9)

    def test_second_price(self):
        winner, price = settle_sealed_bids([("a", 5), ("b", 9)], "second")
        assert (winner, price) == ("b", 5)

    def test_second_price_single_bid_uses_reserve(self):
        winner, price = settle_sealed_bids([("a", 9)], "second", reserve=3)
        assert (winner, price) == ("a", 3)

    def test_empty(self):
        assert settle_sealed_bids([], "first") == (None, None)


def auction_setup(disposition="lock"):
    chain = ChainState(2, 3, disposition=disposition)
    from dpacc.wallet import new_wallet

    for i in range(3):
        chain.add_wallet(new_wallet(f"b{i}", tv(100, 100)))
    chain.add_wallet(new_wallet("seller", tv(0, 0)))
    chain.freeze_supply()
    return chain


def bidders_for(chain, bids, reveal=(True, True, True)):
    return [
        SealedBidder(
            wallet=chain.wallets[f"b{i}"],
            root_key=key_of(i + 1),
            randomness=rnd_of(i + 1),
            bid=bid,
            reveal=rv,
            include_delay=1,
            reveal_offset=1,
        )
        for i, (bid, rv) in enumerate(zip(bids, reveal))
    ]


AUCTION_FEE = tv(1, 0)
AUCTION_COLL = tv(0, 2)


def auction_cfg(pricing="first"):
    return AuctionConfig(
        auction_id="A",
        commit_window=2,
        reveal_window=3,
        pricing=pricing,
        numeraire=0,
        reserve_price=0,
        item="widget",
    )


class TestSealedBidAuction:
    def test_first_price_winner_pays_bid(self):
        chain = auction_setup()
        result = run_sealed_bid_auction(
            chain, auction_cfg("first"), bidders_for(chain, [10, 7, 5]),
            "relay", AUCTION_FEE, AUCTION_COLL, "seller",
        )
        assert not result.no_sale
        assert result.winner == "b0" and result.price == 10
        assert chain.wallets["seller"].balance() == tv(10, 0)
        # losers fully refunded (minus relayer fee)
        assert chain.wallets["b1"].spendable() == tv(99, 100)
        assert chain.wallets["b2"].spendable() == tv(99, 100)
        assert chain.relayers["relay"] == tv(3, 0)
        assert chain.conservation_ok()

    def test_second_price_winner_pays_second(self):
        chain = auction_setup()
        result = run_sealed_bid_auction(
            chain, auction_cfg("second"), bidders_for(chain, [10, 7, 5]),
            "relay", AUCTION_FEE, AUCTION_COLL, "seller",
        )
        assert result.winner == "b0" and result.price == 7
        assert chain.wallets["seller"].balance() == tv(7, 0)
        assert chain.wallets["b0"].spendable() == tv(92, 100)
        assert chain.conservation_ok()

    def test_withholder_forfeits_collateral_burn_mode(self):
        chain = auction_setup(disposition="burn")
        result = run_sealed_bid_auction(
            chain, auction_cfg("first"),
            bidders_for(chain, [10, 7, 5], reveal=(True, True, False)),
            "relay", AUCTION_FEE, AUCTION_COLL, "seller",
        )
        assert result.winner == "b0"
        assert result.burned == AUCTION_COLL
        assert chain.conservation_ok()

    def test_withholder_locked_in_lock_mode(self):
        chain = auction_setup(disposition="lock")
        result = run_sealed_bid_auction(
            chain, auction_cfg("first"),
            bidders_for(chain, [10, 7, 5], reveal=(True, True, False)),
            "relay", AUCTION_FEE, AUCTION_COLL, "seller",
        )
        assert result.locked == ["b2"]
        w = chain.wallets["b2"]
        assert w.balance() - w.spendable() != tv(0, 0)
        assert chain.conservation_ok()

    def test_nobody_reveals_no_sale(self):
        chain = auction_setup(disposition="burn")
        result = run_sealed_bid_auction(
            chain, auction_cfg("first"),
            bidders_for(chain, [10, 7, 5], reveal=(False, False, False)),
            "relay", AUCTION_FEE, AUCTION_COLL, "seller",
        )
        assert result.no_sale
        assert result.burned == tv(0, 6)
        assert chain.conservation_ok()


def buy(limit, vol):
    return FBAOrder("buy", vol, limit * vol)


def sell(limit, vol):
    return FBAOrder("sell", vol, limit * vol)


class TestClearing:
    def test_reference_book(self):
        orders = [buy(12, 10), buy(9, 5), sell(8, 6), sell(10, 8)]
        result = clearing_price(orders)
        assert result.price == Fraction(11)
        assert result.volume == 10
        assert verify_clearing(orders, result)
        assert sum(f for _, f in result.buy_fills) == sum(
            f for _, f in result.sell_fills
        )

    def test_uncrossed_book(self):
        orders = [buy(5, 10), sell(9, 10)]
        result = clearing_price(orders)
        assert result.price is None and result.volume == 0
        assert verify_clearing(orders, result)

    def test_symmetric_cross(self):
        orders = [buy(10, 7), sell(10, 7)]
        result = clearing_price(orders)
        assert result.price == Fraction(10)
        assert result.executed == 7

    def test_empty_book_rejected(self):
        with pytest.raises(VenueError):
            clearing_price([])

    def test_verify_rejects_wrong_price(self):
        orders = [buy(12, 10), buy(9, 5), sell(8, 6), sell(10, 8)]
        result = clearing_price(orders)
        forged = venues.ClearingResult(
            Fraction(9), result.volume, result.executed,
            result.buy_fills, result.sell_fills,
        )
        assert not verify_clearing(orders, forged)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_books_maximize_volume(self, seed):
        rng = random.Random(seed)
        orders = [
            FBAOrder(
                rng.choice(["buy", "sell"]),
                rng.randint(1, 40),
                rng.randint(1, 400),
            )
            for _ in range(rng.randint(1, 12))
        ]
        result = clearing_price(orders)
        assert verify_clearing(orders, result)
        # brute force: no candidate price crosses more volume
        best = max(
            min(venues._demand(orders, o.limit), venues._supply(orders, o.limit))
            for o in orders
        )
        assert result.volume == best

    def test_order_wire_roundtrip(self):
        order = FBAOrder("sell", 1234, 567890)
        assert FBAOrder.deserialize(order.serialize()) == order


def fba_setup():
    chain = ChainState(2, 3, disposition="burn")
    from dpacc.wallet import new_wallet

    for i in range(4):
        chain.add_wallet(new_wallet(f"p{i}", tv(1000, 1000)))
    chain.freeze_supply()
    return chain


def fba_participants(chain, orders, reveal=None):
    reveal = reveal or [True] * len(orders)
    return [
        FBAParticipant(
            wallet=chain.wallets[f"p{i}"],
            root_key=key_of(100 + i),
            randomness=rnd_of(100 + i),
            order=o,
            reveal=rv,
            include_delay=1,
            reveal_offset=1,
        )
        for i, (o, rv) in enumerate(zip(orders, reveal))
    ]


class TestRunFBA:
    def test_batch_settles_and_conserves(self):
        chain = fba_setup()
        orders = [buy(12, 10), buy(9, 5), sell(8, 6), sell(10, 8)]
        start = chain.height
        result = run_fba(
            chain, "B", 0, 1, fba_participants(chain, orders),
            "relay", tv(1, 0), tv(0, 2),
        )
        assert not result.voided
        assert result.clearing.price == Fraction(11)
        assert chain.height == start + 2 * chain.delta + 1
        assert chain.conservation_ok()
        # buyer p0 got its fill of X and paid p* per unit (floored)
        order, fill = result.executions["p0"]
        assert order.side == "buy" and fill > 0
        w = chain.wallets["p0"]
        assert w.balance().amounts[0] == 1000 - 1 + fill  # -fee, +fill

    def test_withheld_orders_excluded(self):
        chain = fba_setup()
        orders = [buy(12, 10), buy(9, 5), sell(8, 6), sell(10, 8)]
        result = run_fba(
            chain, "B", 0, 1,
            fba_participants(chain, orders, reveal=[True, True, True, False]),
            "relay", tv(1, 0), tv(0, 2),
        )
        # only the limit-8 seller remains: it is fully rationed
        assert not result.voided
        assert result.clearing.executed <= 6
        assert "p3" not in result.executions
        assert chain.conservation_ok()

    def test_all_withheld_voids(self):
        chain = fba_setup()
        orders = [buy(12, 10), sell(8, 6)]
        result = run_fba(
            chain, "B", 0, 1,
            fba_participants(chain, orders, reveal=[False, False]),
            "relay", tv(1, 0), tv(0, 2),
        )
        assert result.voided
        assert chain.conservation_ok()


def rfq_setup():
    chain = ChainState(2, 3, disposition="lock")
    from dpacc.wallet import new_wallet

    user = new_wallet("user", tv(1000, 1000))
    mm_a = new_wallet("mmA", tv(5000, 5000))
    mm_b = new_wallet("mmB", tv(5000, 5000))
    chain.add_wallet(user)
    chain.add_wallet(mm_a)
    chain.add_wallet(mm_b)
    chain.freeze_supply()
    mms = [
        MarketMakerAgent("mmA", latency=0, fill_cost=Fraction(4)),
        MarketMakerAgent("mmB", latency=0, fill_cost=Fraction(10)),
    ]
    return chain, user, {"mmA": mm_a, "mmB": mm_b}, mms


class TestRunRFQ:
    def test_filled_fair_price_minus_fee(self):
        chain, user, wallets, mms = rfq_setup()
        result = run_rfq(
            chain, user, key_of(9), rnd_of(9), wallets, mms,
            "sell_x", 0, 1, x_amount=50, eps=Fraction(2), fee_slope=Fraction(2),
        )
        assert result.filled
        assert result.mm_id == "mmA"  # cheaper fill cost wins the race
        assert result.fee >= Fraction(4)
        fee_int = int(result.fee)
        assert result.user_paid == tv(50, 0)
        assert result.user_received == tv(0, 100 - fee_int)
        assert chain.relayers["mmA"] == tv(0, fee_int)
        assert user.spendable() == tv(950, 1100 - fee_int)
        assert chain.conservation_ok()

    def test_sell_y_direction(self):
        chain, user, wallets, mms = rfq_setup()
        result = run_rfq(
            chain, user, key_of(9), rnd_of(9), wallets, mms,
            "sell_y", 0, 1, x_amount=50, eps=Fraction(2), fee_slope=Fraction(2),
        )
        assert result.filled
        assert result.user_paid == tv(0, 100)
        assert result.user_received.amounts[0] <= 50
        assert chain.conservation_ok()

    def test_late_reveal_burns(self):
        chain, user, wallets, mms = rfq_setup()
        result = run_rfq(
            chain, user, key_of(9), rnd_of(9), wallets, mms,
            "sell_x", 0, 1, x_amount=50, eps=Fraction(2), fee_slope=Fraction(2),
            reveal_offset=chain.delta + 2,
        )
        assert not result.filled and result.burned
        assert chain.burn_sink == tv(50, 0)
        # the MM's collateral went back untouched
        assert wallets["mmA"].balance() == tv(5000, 5000)
        assert chain.conservation_ok()

    def test_never_reveal_locks(self):
        chain, user, wallets, mms = rfq_setup()
        result = run_rfq(
            chain, user, key_of(9), rnd_of(9), wallets, mms,
            "sell_x", 0, 1, x_amount=50, eps=Fraction(2), fee_slope=Fraction(2),
            reveal_offset=None,
        )
        assert not result.filled and result.locked
        assert user.balance() == tv(1000, 1000)
        assert user.spendable() == tv(950, 1000)
        assert chain.conservation_ok()

    def test_zero_slope_expires(self):
        chain, user, wallets, mms = rfq_setup()
        result = run_rfq(
            chain, user, key_of(9), rnd_of(9), wallets, mms,
            "sell_x", 0, 1, x_amount=50, eps=Fraction(2), fee_slope=Fraction(0),
            horizon=50,
        )
        assert result.expired and not result.filled


class TestAMMScenario:
    def orders(self):
        return [AMMUserOrder("x_for_y", 500, commit_height=h) for h in range(0, 6, 2)]

    def test_blind_mode_executes_post_arbitrage(self):
        pool = AMMPool("p", 0, 1, 100_000, 10_000_000, Fraction(3, 1000))
        prices = PriceProcess(Fraction(100), Fraction(1, 100), random.Random(3))
        report = run_amm_scenario(pool, self.orders(), "dpacc", prices, blocks=8)
        assert len(report) == 3
        for ex in report:
            assert ex.amount_out > 0
            assert ex.realized_price > 0

    def test_transparent_sandwich_never_better(self):
        orders = self.orders()
        outs = {}
        for mode in ("dpacc", "transparent"):
            pool = AMMPool("p", 0, 1, 100_000, 10_000_000, Fraction(3, 1000))
            prices = PriceProcess(Fraction(100), Fraction(1, 100), random.Random(3))
            report = run_amm_scenario(pool, orders, mode, prices, blocks=8)
            outs[mode] = [ex.amount_out for ex in report]
        for blind, attacked in zip(outs["dpacc"], outs["transparent"]):
            assert attacked < blind

    def test_bad_mode_rejected(self):
        pool = AMMPool("p", 0, 1, 1000, 1000, Fraction(0))
        prices = PriceProcess(Fraction(1), Fraction(0), random.Random(0))
        with pytest.raises(VenueError):
            run_amm_scenario(pool, [], "mystery", prices, blocks=1)


class TestLiquidation:
    def path(self):
        return [Fraction(100), Fraction(90), Fraction(70), Fraction(60)]

    def position(self):
        # healthy at 100 and 90, unhealthy at 70: 70*100 < 1.5*5000
        return LiquidationPosition(collateral=100, debt=5000, threshold=Fraction(3, 2))

    def test_triggers_at_first_unhealthy_height(self):
        result = run_liquidation(self.position(), self.path(), bidders=3)
        assert result.trigger_height == 2
        assert result.trigger_price == Fraction(70)

    def test_symmetric_bidders_pay_market_value(self):
        result = run_liquidation(self.position(), self.path(), bidders=3)
        assert result.revenue == int(Fraction(70) * 100)
        assert result.debt_repaid == 5000
        assert result.shortfall == 0

    def test_shortfall_when_value_below_debt(self):
        # undercollateralized trigger: value at the trigger is below the debt
        position = LiquidationPosition(100, 8000, Fraction(1, 2))
        path = self.path() + [Fraction(30)]
        result = run_liquidation(position, path, bidders=3)
        assert result.revenue == 3000
        assert result.debt_repaid == 3000
        assert result.shortfall == 5000

    def test_healthy_position_refused(self):
        position = LiquidationPosition(100, 1000, Fraction(3, 2))
        with pytest.raises(VenueError):
            run_liquidation(position, self.path(), bidders=3)

    def test_bidding_value_is_equilibrium(self):
        """First-price, common value: no unilateral deviation profits."""
        value = int(Fraction(70) * 100)
        for deviation in (-500, -100, -1, 1, 100, 500):
            bids = [value, value, value + deviation]
            result = run_liquidation(
                self.position(), self.path(), bidders=3, bids=bids
            )
            if deviation > 0:
                # deviant wins but pays more than the collateral is worth
                assert result.revenue == value + deviation > value
            else:
                # deviant loses; honest bidders still pay exactly the value
                assert result.revenue == value
