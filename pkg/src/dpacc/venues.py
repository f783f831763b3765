"""Commit-reveal trading venues built on collateralized commitments:
sealed-bid auctions, frequent batch auctions with a clearing-price verifier,
the RFQ fee escalator, blind AMM interaction, and liquidation auctions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import commitments as cmt
from . import crypto
from .amm import AMMPool
from .crypto import Commitment, Randomness, RootKey, SerialRegistry
from .ledger import (
    Bid,
    ChainState,
    Custom,
    LedgerError,
    Send,
    TokenVector,
    Transaction,
)
from .market import (
    FeeSchedule,
    MarketMakerAgent,
    PriceProcess,
    arbitrageur_act,
    race_accept,
)
from .wallet import SmartWallet


class VenueError(LedgerError):
    pass


# --- Sealed-bid auctions -------------------------------------------------------


@dataclass(frozen=True)
class AuctionConfig:
    auction_id: str
    commit_window: int
    reveal_window: int
    pricing: str = "first"  # "first" or "second"
    numeraire: int = 0
    reserve_price: int = 0
    item: str = ""

    def __post_init__(self):
        if self.commit_window < 1 or self.reveal_window < 1:
            raise VenueError("commit and reveal windows must each be >= 1 block")
        if self.pricing not in ("first", "second"):
            raise VenueError("pricing rule must be 'first' or 'second'")


@dataclass
class SealedBidder:
    wallet: SmartWallet
    root_key: RootKey
    randomness: Randomness
    bid: int  # in numeraire units
    reveal: bool = True
    include_delay: int = 1
    reveal_offset: int = 1  # blocks into the reveal phase


@dataclass
class AuctionResult:
    no_sale: bool
    winner: Optional[str] = None
    price: Optional[int] = None
    revealed: list[tuple[str, int]] = field(default_factory=list)
    burned: Optional[TokenVector] = None
    locked: list[str] = field(default_factory=list)


def settle_sealed_bids(
    revealed: list[tuple[str, int]], pricing: str, reserve: int = 0
) -> tuple[Optional[str], Optional[int]]:
    """Winner and settlement price from revealed (bidder, amount) pairs."""
    if not revealed:
        return None, None
    ranked = sorted(revealed, key=lambda b: -b[1])
    winner, top = ranked[0]
    if pricing == "first":
        return winner, top
    second = ranked[1][1] if len(ranked) > 1 else reserve
    return winner, max(second, reserve)


def run_sealed_bid_auction(
    chain: ChainState,
    cfg: AuctionConfig,
    bidders: list[SealedBidder],
    relayer_id: str,
    fee: TokenVector,
    collateral: TokenVector,
    seller_id: str,
) -> AuctionResult:
    """Full commit/reveal auction over the chain.

    Bid commitments are collected for the commit window, revealed over the
    reveal window, and settled from the revealed set. Non-revealers fall to
    the chain's collateral disposition.
    """
    n = chain.n
    start = chain.height
    auction_end = start + cfg.commit_window + cfg.reveal_window

    # map fee + collateral + bid under a fresh commitment per bidder
    serials = {}
    coms = []
    for b in bidders:
        need = fee + collateral + TokenVector.single(n, cfg.numeraire, b.bid)
        com = b.wallet.add_secret_mapping(b.root_key, b.randomness, need)
        serial = crypto.derive_serial(b.root_key)
        serials[b.wallet.id] = serial
        coms.append(com)

    policy = cmt.RelayerPolicy(
        relayer_id=relayer_id,
        required_fee=fee,
        min_collateral=collateral,
        eligible_root=crypto.build_accumulator(coms),
    )
    registry = SerialRegistry()

    txs = {}
    for i, b in enumerate(bidders):
        payload = (Bid(cfg.auction_id, TokenVector.single(n, cfg.numeraire, b.bid)),)
        dpacc = cmt.make_base_dpacc(
            b.wallet.id, nonce=i, relayer=relayer_id, fee=fee,
            collateral=collateral, payload=payload,
        )
        bundle = cmt.build_bundle(b.wallet, serials[b.wallet.id], dpacc, coms)
        outcome = cmt.relayer_verify(bundle, policy, registry)
        if not outcome.accepted:
            raise VenueError(f"bundle rejected: {outcome.reason}")
        include_at = chain.height + max(1, min(b.include_delay, cfg.commit_window))
        cmt.relayer_include(
            chain, bundle, b.wallet,
            delay=include_at - chain.height,
            reveal_window=auction_end - include_at,
        )
        txs[b.wallet.id] = dpacc.tx

    for _ in range(cfg.commit_window):
        chain.advance_block()

    burn_before = chain.burn_sink
    reveal_at = {}
    for b in bidders:
        if b.reveal:
            offset = max(1, min(b.reveal_offset, cfg.reveal_window))
            reveal_at.setdefault(offset, []).append(b)
    for offset in range(1, cfg.reveal_window + 1):
        chain.advance_block()
        for b in reveal_at.get(offset, []):
            cmt.reveal(chain, b.wallet, serials[b.wallet.id], txs[b.wallet.id])
    chain.advance_block()  # pushes past the reveal deadline; timeouts fire

    revealed = [
        (wid, amount.amounts[cfg.numeraire])
        for wid, amount in chain.auction_bids.get(cfg.auction_id, [])
    ]
    burned = chain.burn_sink - burn_before
    locked = [
        b.wallet.id for b in bidders if not b.reveal and chain.disposition == "lock"
    ]
    if not revealed:
        return AuctionResult(no_sale=True, burned=burned, locked=locked)

    winner, price = settle_sealed_bids(revealed, cfg.pricing, cfg.reserve_price)
    escrow_key = f"auction:{cfg.auction_id}"
    for wid, amount in revealed:
        refund = amount if wid != winner else amount - price
        if refund > 0:
            vec = TokenVector.single(n, cfg.numeraire, refund)
            chain.debit_escrow(escrow_key, vec)
            chain.wallets[wid].deposit(vec)
    price_vec = TokenVector.single(n, cfg.numeraire, price)
    chain.debit_escrow(escrow_key, price_vec)
    chain.wallets[seller_id].deposit(price_vec)
    chain.log("auction_settled", auction=cfg.auction_id, winner=winner, price=price)
    return AuctionResult(
        no_sale=False, winner=winner, price=price,
        revealed=revealed, burned=burned, locked=locked,
    )


# --- Frequent batch auction clearing ---------------------------------------------


@dataclass(frozen=True)
class FBAOrder:
    side: str  # "buy": buy X paying Y; "sell": sell X for Y
    v_x: int
    v_y: int

    def __post_init__(self):
        if self.side not in ("buy", "sell"):
            raise VenueError("order side must be 'buy' or 'sell'")
        if self.v_x <= 0 or self.v_y <= 0:
            raise VenueError("order quantities must be positive")

    @property
    def limit(self) -> Fraction:
        return Fraction(self.v_y, self.v_x)

    def serialize(self) -> bytes:
        tag = b"\x00" if self.side == "buy" else b"\x01"
        return tag + self.v_x.to_bytes(8, "big") + self.v_y.to_bytes(8, "big")

    @classmethod
    def deserialize(cls, data: bytes) -> "FBAOrder":
        if len(data) != 17:
            raise VenueError("bad order encoding")
        side = "buy" if data[0:1] == b"\x00" else "sell"
        return cls(side, int.from_bytes(data[1:9], "big"),
                   int.from_bytes(data[9:17], "big"))


@dataclass
class ClearingResult:
    price: Optional[Fraction]
    volume: int  # maximum crossable volume at the clearing price
    executed: int  # volume actually filled after integer rationing
    buy_fills: list[tuple[int, int]]  # (order index, filled X quantity)
    sell_fills: list[tuple[int, int]]


def _demand(orders: list[FBAOrder], p: Fraction) -> int:
    return sum(o.v_x for o in orders if o.side == "buy" and o.limit >= p)


def _supply(orders: list[FBAOrder], p: Fraction) -> int:
    return sum(o.v_x for o in orders if o.side == "sell" and o.limit <= p)


def _ration(
    eligible: list[tuple[int, FBAOrder]], target: int
) -> list[tuple[int, int]]:
    """Pro-rata fills rounded down; remainder left unfilled."""
    total = sum(o.v_x for _, o in eligible)
    if total <= target:
        return [(idx, o.v_x) for idx, o in eligible]
    return [(idx, o.v_x * target // total) for idx, o in eligible]


def _trim(fills: list[tuple[int, int]], target: int,
          priority: list[int]) -> list[tuple[int, int]]:
    """Reduce fills to sum exactly `target`, cutting lowest priority last-first."""
    total = sum(f for _, f in fills)
    if total <= target:
        return fills
    excess = total - target
    by_idx = dict(fills)
    for idx in reversed(priority):
        if excess == 0:
            break
        cut = min(by_idx.get(idx, 0), excess)
        by_idx[idx] -= cut
        excess -= cut
    return [(idx, by_idx[idx]) for idx, _ in fills]


def clearing_price(orders: list[FBAOrder]) -> ClearingResult:
    """Uniform clearing price maximizing crossed volume.

    Candidate prices are the order limits; the maximizing interval's
    midpoint is the clearing price and every fill happens there. The
    marginal side is rationed pro-rata with fills rounded down.
    """
    if not orders:
        raise VenueError("need at least one order")
    candidates = sorted({o.limit for o in orders})
    volumes = [min(_demand(orders, p), _supply(orders, p)) for p in candidates]
    best = max(volumes)
    if best == 0:
        return ClearingResult(None, 0, 0, [], [])
    winning = [p for p, v in zip(candidates, volumes) if v == best]
    p_star = (winning[0] + winning[-1]) / 2

    buys = [(i, o) for i, o in enumerate(orders)
            if o.side == "buy" and o.limit >= p_star]
    sells = [(i, o) for i, o in enumerate(orders)
             if o.side == "sell" and o.limit <= p_star]
    buy_fills = _ration(buys, best)
    sell_fills = _ration(sells, best)
    executed = min(sum(f for _, f in buy_fills), sum(f for _, f in sell_fills))
    # price priority for trimming: most aggressive limits keep their fill
    buy_priority = [i for i, _ in sorted(buys, key=lambda t: (-t[1].limit, t[0]))]
    sell_priority = [i for i, _ in sorted(sells, key=lambda t: (t[1].limit, t[0]))]
    buy_fills = _trim(buy_fills, executed, buy_priority)
    sell_fills = _trim(sell_fills, executed, sell_priority)
    return ClearingResult(p_star, best, executed, buy_fills, sell_fills)


def verify_clearing(orders: list[FBAOrder], result: ClearingResult) -> bool:
    """On-chain-style re-check that the posted price maximizes volume and
    the fills are consistent and uniform."""
    candidates = sorted({o.limit for o in orders})
    best = max(
        (min(_demand(orders, p), _supply(orders, p)) for p in candidates),
        default=0,
    )
    if result.price is None:
        return best == 0
    if result.volume != best:
        return False
    if min(_demand(orders, result.price), _supply(orders, result.price)) != best:
        return False
    bought = sum(f for _, f in result.buy_fills)
    sold = sum(f for _, f in result.sell_fills)
    if bought != sold or bought != result.executed or bought > best:
        return False
    for idx, f in result.buy_fills:
        o = orders[idx]
        if o.side != "buy" or f > o.v_x or o.limit < result.price:
            return False
    for idx, f in result.sell_fills:
        o = orders[idx]
        if o.side != "sell" or f > o.v_x or o.limit > result.price:
            return False
    return True


# --- Chain-backed frequent batch auction -----------------------------------------


@dataclass
class FBAParticipant:
    wallet: SmartWallet
    root_key: RootKey
    randomness: Randomness
    order: FBAOrder
    reveal: bool = True
    include_delay: int = 1
    reveal_offset: int = 1


@dataclass
class BatchResult:
    voided: bool
    clearing: Optional[ClearingResult] = None
    executions: dict[str, tuple[FBAOrder, int]] = field(default_factory=dict)


def run_fba(
    chain: ChainState,
    batch_id: str,
    token_x: int,
    token_y: int,
    participants: list[FBAParticipant],
    relayer_id: str,
    fee: TokenVector,
    collateral: TokenVector,
) -> BatchResult:
    """One batch: commit orders for delta blocks, reveal for delta blocks,
    then clear at the uniform volume-maximizing price.

    A verifier re-checks the posted price before transfers apply; failure
    voids the batch and refunds every escrow.
    """
    n = chain.n
    delta = chain.delta
    start = chain.height
    batch_end = start + 2 * delta
    escrow_key = f"auction:{batch_id}"

    def escrow_amount(order: FBAOrder) -> TokenVector:
        if order.side == "buy":
            return TokenVector.single(n, token_y, order.v_y)
        return TokenVector.single(n, token_x, order.v_x)

    serials, coms, txs = {}, [], {}
    for p in participants:
        need = fee + collateral + escrow_amount(p.order)
        p.wallet.add_secret_mapping(p.root_key, p.randomness, need)
        serials[p.wallet.id] = crypto.derive_serial(p.root_key)
        coms.append(p.wallet.key_ring[serials[p.wallet.id].value].commitment)

    policy = cmt.RelayerPolicy(relayer_id, fee, collateral,
                               crypto.build_accumulator(coms))
    registry = SerialRegistry()
    for i, p in enumerate(participants):
        payload = (
            Bid(batch_id, escrow_amount(p.order)),
            Custom(p.order.serialize()),
        )
        dpacc = cmt.make_base_dpacc(p.wallet.id, i, relayer_id, fee, collateral,
                                    payload)
        bundle = cmt.build_bundle(p.wallet, serials[p.wallet.id], dpacc, coms)
        outcome = cmt.relayer_verify(bundle, policy, registry)
        if not outcome.accepted:
            raise VenueError(f"bundle rejected: {outcome.reason}")
        include_at = chain.height + max(1, min(p.include_delay, delta))
        cmt.relayer_include(chain, bundle, p.wallet,
                            delay=include_at - chain.height,
                            reveal_window=batch_end - include_at)
        txs[p.wallet.id] = dpacc.tx

    for _ in range(delta):
        chain.advance_block()

    revealed: list[tuple[str, FBAOrder]] = []
    schedule: dict[int, list[FBAParticipant]] = {}
    for p in participants:
        if p.reveal:
            schedule.setdefault(max(1, min(p.reveal_offset, delta)), []).append(p)
    for offset in range(1, delta + 1):
        chain.advance_block()
        for p in schedule.get(offset, []):
            result = cmt.reveal(chain, p.wallet, serials[p.wallet.id],
                                txs[p.wallet.id])
            if result.fully_executed:
                revealed.append((p.wallet.id, p.order))
    chain.advance_block()

    def refund_all():
        for wid, order in revealed:
            vec = escrow_amount(order)
            chain.debit_escrow(escrow_key, vec)
            chain.wallets[wid].deposit(vec)

    if not revealed:
        return BatchResult(voided=True)

    orders = [o for _, o in revealed]
    clearing = clearing_price(orders)
    if not verify_clearing(orders, clearing):
        refund_all()
        chain.log("batch_voided", batch=batch_id)
        return BatchResult(voided=True, clearing=clearing)
    if clearing.price is None:
        refund_all()
        return BatchResult(voided=True, clearing=clearing)

    p_star = clearing.price
    executions: dict[str, tuple[FBAOrder, int]] = {}
    total_y_paid = 0
    # buyers: receive X fill, pay floor(p* * fill) Y, refund the rest
    for idx, f in clearing.buy_fills:
        wid, order = revealed[idx]
        pay = int(p_star * f)
        total_y_paid += pay
        refund = order.v_y - pay
        chain.debit_escrow(escrow_key, TokenVector.single(n, token_y, order.v_y))
        if refund > 0:
            chain.wallets[wid].deposit(TokenVector.single(n, token_y, refund))
        chain.credit_escrow(escrow_key, TokenVector.single(n, token_y, pay))
        if f > 0:
            chain.debit_escrow(escrow_key, TokenVector.single(n, token_x, f))
            chain.wallets[wid].deposit(TokenVector.single(n, token_x, f))
        executions[wid] = (order, f)
    # sellers: give X fill, split paid Y pro-rata, refund unfilled X
    total_fill = sum(f for _, f in clearing.sell_fills)
    for idx, f in clearing.sell_fills:
        wid, order = revealed[idx]
        receive = total_y_paid * f // total_fill if total_fill else 0
        refund = order.v_x - f
        chain.debit_escrow(escrow_key, TokenVector.single(n, token_x, refund))
        if refund > 0:
            chain.wallets[wid].deposit(TokenVector.single(n, token_x, refund))
        if receive > 0:
            chain.debit_escrow(escrow_key, TokenVector.single(n, token_y, receive))
            chain.wallets[wid].deposit(TokenVector.single(n, token_y, receive))
        executions[wid] = (order, f)
    # rounding dust, if any, stays in the batch escrow
    chain.log("batch_settled", batch=batch_id, price=float(p_star),
              volume=clearing.executed)
    return BatchResult(voided=False, clearing=clearing, executions=executions)


# --- RFQ fee escalator ------------------------------------------------------------


@dataclass(frozen=True)
class RFQCommitmentPair:
    """The two opposite trade commitments a requester chooses between."""

    com_sell_x: Commitment
    com_sell_y: Commitment
    price: Fraction  # external price at creation, Y per X
    schedule: FeeSchedule

    def members(self) -> list[Commitment]:
        return [self.com_sell_x, self.com_sell_y]


@dataclass
class RFQResult:
    filled: bool
    accept_height: Optional[int] = None
    fee: Optional[Fraction] = None
    mm_id: Optional[str] = None
    user_paid: Optional[TokenVector] = None
    user_received: Optional[TokenVector] = None
    burned: bool = False
    locked: bool = False
    expired: bool = False


def build_rfq_pair(
    user: SmartWallet,
    counterparty: str,
    token_x: int,
    token_y: int,
    x_amount: int,
    eps: Fraction,
    schedule: FeeSchedule,
    n: int,
    nonce: int = 0,
) -> tuple[Transaction, Transaction, RFQCommitmentPair]:
    """The sell-X and sell-Y transactions plus their commitment pair.

    Both legs quote the creation-time external price; which leg the user
    actually committed stays hidden until reveal.
    """
    y_amount = int(eps * x_amount)
    tx_sell_x = Transaction(
        sender=user.id, nonce=nonce,
        instructions=(Send(counterparty, TokenVector.single(n, token_x, x_amount)),
                      Custom(b"rfq/sell-x")),
    )
    tx_sell_y = Transaction(
        sender=user.id, nonce=nonce,
        instructions=(Send(counterparty, TokenVector.single(n, token_y, y_amount)),
                      Custom(b"rfq/sell-y")),
    )
    pair = RFQCommitmentPair(
        com_sell_x=Commitment(tx_sell_x.digest()),
        com_sell_y=Commitment(tx_sell_y.digest()),
        price=eps,
        schedule=schedule,
    )
    return tx_sell_x, tx_sell_y, pair


def run_rfq(
    chain: ChainState,
    user: SmartWallet,
    user_root_key: RootKey,
    user_randomness: Randomness,
    mm_wallets: dict[str, SmartWallet],
    mms: list[MarketMakerAgent],
    direction: str,  # "sell_x" or "sell_y"
    token_x: int,
    token_y: int,
    x_amount: int,
    eps: Fraction,
    fee_slope: Fraction,
    reveal_offset: int = 1,
    horizon: int = 1000,
) -> RFQResult:
    """Full RFQ round: MM race down the fee escalator, collateralized fill,
    bounded reveal.

    The winning MM doubles as the relayer: it posts the commitment, locks
    both legs' worth of collateral, and earns the escalator fee out of the
    user's proceeds. Revealing after the window burns the user's committed
    tokens; never revealing locks them permanently.
    """
    n = chain.n
    delta = chain.delta
    schedule = FeeSchedule(created_at=chain.height, slope=fee_slope)
    tx_sell_x, tx_sell_y, pair = build_rfq_pair(
        user, "", token_x, token_y, x_amount, eps, schedule, n
    )
    y_amount = int(eps * x_amount)

    race = race_accept(schedule, mms, horizon)
    if race is None:
        return RFQResult(filled=False, expired=True)
    accept_height, winner = race
    mm_wallet = mm_wallets[winner.mm_id]
    fee_val = schedule.fee(accept_height)
    fee_int = int(fee_val)

    # rebuild the committed pair against the actual counterparty wallet
    tx_sell_x, tx_sell_y, pair = build_rfq_pair(
        user, mm_wallet.id, token_x, token_y, x_amount, eps, schedule, n
    )
    tx = tx_sell_x if direction == "sell_x" else tx_sell_y
    user_sends = (TokenVector.single(n, token_x, x_amount)
                  if direction == "sell_x"
                  else TokenVector.single(n, token_y, y_amount))
    user_gets_gross = (TokenVector.single(n, token_y, y_amount)
                       if direction == "sell_x"
                       else TokenVector.single(n, token_x, x_amount))

    # user holds at least one leg; commit it under a fresh serial
    com = user.add_secret_mapping(user_root_key, user_randomness, user_sends)
    serial = crypto.derive_serial(user_root_key)
    # the MM checks the committed digest is one of the two quoted legs
    proof = crypto.prove_membership(Commitment(tx.digest()), pair.members())
    pair_root = crypto.build_accumulator(pair.members()).root
    if not crypto.verify_membership(Commitment(tx.digest()), proof, pair_root):
        raise VenueError("commitment is not one of the quoted legs")

    while chain.height < accept_height:
        chain.advance_block()
    # MM collateralizes both legs into escrow, then posts the commitment
    escrow_key = f"rfq:{user.id}:{serial.value.hex()[:8]}"
    mm_coll = (TokenVector.single(n, token_x, x_amount)
               + TokenVector.single(n, token_y, y_amount))
    mm_ctx = mm_wallet.default_context()
    mm_ctx.spend(mm_coll)
    chain.credit_escrow(escrow_key, mm_coll)
    inclusion_sig = crypto.sign(user_root_key, tx.digest())
    item = chain.queue_inclusion(serial, tx.digest(), inclusion_sig, delay=1)
    chain.advance_block()
    include_height = chain.height
    reveal_by = include_height + delta

    result = RFQResult(filled=False, accept_height=accept_height,
                       fee=fee_val, mm_id=winner.mm_id)
    if reveal_offset is None:
        # never revealed: committed tokens locked indefinitely
        while chain.height <= reveal_by:
            chain.advance_block()
        user.freeze(com)
        chain.debit_escrow(escrow_key, mm_coll)
        mm_wallet.deposit(mm_coll)
        result.locked = True
        return result

    for _ in range(reveal_offset):
        chain.advance_block()

    if chain.height > reveal_by:
        # late reveal: the user's committed tokens are burned
        chain.burn(user.id, com, user.secret_map[com])
        user.release_to_default(com)
        chain.debit_escrow(escrow_key, mm_coll)
        mm_wallet.deposit(mm_coll)
        result.burned = True
        return result

    ctx = user.reveal_and_restrict(serial, tx, chain.commitments)
    exec_result = chain.execute(tx, ctx)
    chain.mark_revealed(serial)
    user.remap_defaults(ctx)
    if not exec_result.fully_executed:
        chain.debit_escrow(escrow_key, mm_coll)
        mm_wallet.deposit(mm_coll)
        return result

    # counter-leg from the MM's escrow, minus the escalator fee
    fee_token = token_y if direction == "sell_x" else token_x
    fee_vec = TokenVector.single(n, fee_token, fee_int)
    net = user_gets_gross - fee_vec
    chain.debit_escrow(escrow_key, user_gets_gross)
    user.deposit(net)
    chain.credit_relayer(winner.mm_id, fee_vec)
    # MM reclaims the untouched remainder of its collateral
    leftover = mm_coll - user_gets_gross
    chain.debit_escrow(escrow_key, leftover)
    mm_wallet.deposit(leftover)
    result.filled = True
    result.user_paid = user_sends
    result.user_received = net
    chain.log("rfq_filled", mm=winner.mm_id, fee=float(fee_val))
    return result


# --- Blind AMM interaction ----------------------------------------------------------


@dataclass(frozen=True)
class AMMUserOrder:
    direction: str
    amount_in: int
    commit_height: int


@dataclass
class AMMExecution:
    order: AMMUserOrder
    eps_at_commit: Fraction
    reserves_at_exec: tuple[int, int]
    amount_out: int
    realized_price: Fraction  # Y per X from the user's side


def _user_price(direction: str, amount_in: int, amount_out: int) -> Fraction:
    if direction == "x_for_y":
        return Fraction(amount_out, amount_in)
    return Fraction(amount_in, amount_out)


def run_amm_scenario(
    pool: AMMPool,
    orders: list[AMMUserOrder],
    mode: str,
    prices: PriceProcess,
    blocks: int,
) -> list[AMMExecution]:
    """Per-block loop: producer arbitrage first, then user orders.

    Blind mode executes each order one block after commitment, at whatever
    the post-arbitrage pool state is. Transparent mode lets a sandwich
    attacker wrap every visible order with a same-size front-run and a
    back-run.
    """
    if mode not in ("dpacc", "transparent"):
        raise VenueError("mode must be 'dpacc' or 'transparent'")
    eps_at = {0: prices.price}
    report = []
    by_exec_height = {}
    for o in orders:
        by_exec_height.setdefault(o.commit_height + 1, []).append(o)
    for h in range(1, blocks + 1):
        eps = prices.step()
        eps_at[h] = eps
        arbitrageur_act(pool, eps)
        for order in by_exec_height.get(h, []):
            if mode == "transparent":
                front_out = pool.swap(order.direction, order.amount_in)
                reserves = pool.reserves()
                out = pool.swap(order.direction, order.amount_in)
                back_dir = ("y_for_x" if order.direction == "x_for_y"
                            else "x_for_y")
                pool.swap(back_dir, front_out)
            else:
                reserves = pool.reserves()
                out = pool.swap(order.direction, order.amount_in)
            report.append(AMMExecution(
                order=order,
                eps_at_commit=eps_at[order.commit_height],
                reserves_at_exec=reserves,
                amount_out=out,
                realized_price=_user_price(order.direction, order.amount_in, out),
            ))
    return report


# --- Liquidation auctions -------------------------------------------------------------


@dataclass(frozen=True)
class LiquidationPosition:
    collateral: int  # X units
    debt: int  # Y units
    threshold: Fraction

    def healthy(self, eps: Fraction) -> bool:
        return eps * self.collateral >= self.threshold * self.debt


@dataclass
class LiquidationResult:
    trigger_height: int
    trigger_price: Fraction
    collateral_value: Fraction  # eps * C at trigger
    revenue: int
    debt_repaid: int
    shortfall: int


def run_liquidation(
    position: LiquidationPosition,
    price_path: list[Fraction],
    bidders: int,
    pricing: str = "first",
    reserve: int = 0,
    bids: Optional[list[int]] = None,
) -> LiquidationResult:
    """Sealed-bid liquidation of an unhealthy position.

    Symmetric full-information bidders share the common value of the
    collateral at the trigger price and bid it; revenue then matches the
    external market value up to integer rounding.
    """
    trigger = None
    for h, eps in enumerate(price_path):
        if not position.healthy(eps):
            trigger = (h, eps)
            break
    if trigger is None:
        raise VenueError("position is healthy; liquidation refused")
    height, eps = trigger
    value = eps * position.collateral
    if bids is None:
        if bidders < 1:
            raise VenueError("need at least one bidder")
        bids = [int(value)] * bidders
    revealed = [(f"bidder{i}", b) for i, b in enumerate(bids)]
    _, price = settle_sealed_bids(revealed, pricing, reserve)
    repaid = min(price, position.debt)
    return LiquidationResult(
        trigger_height=height,
        trigger_price=eps,
        collateral_value=value,
        revenue=price,
        debt_repaid=repaid,
        shortfall=max(position.debt - price, 0),
    )
