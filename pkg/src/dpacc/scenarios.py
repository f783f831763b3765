"""Monte Carlo scenario runners and metrics emission.

Every trial draws its randomness from a stream derived from (seed, trial
index), so runs are reproducible and trials are independent.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import commitments as cmt
from . import crypto
from .amm import AMMPool
from .config import ScenarioConfig
from .ledger import (
    ChainState,
    Custom,
    LedgerError,
    Send,
    SwapAMM,
    TokenVector,
    Transaction,
    WriteOnceViolation,
)
from .market import FeeSchedule, MarketMakerAgent, PriceProcess, race_accept
from .venues import (
    AMMUserOrder,
    AuctionConfig,
    FBAOrder,
    LiquidationPosition,
    SealedBidder,
    clearing_price,
    run_amm_scenario,
    run_liquidation,
    run_sealed_bid_auction,
)
from .wallet import AbortError, SmartWallet, new_wallet


def trial_rng(seed: int, trial: int) -> random.Random:
    return random.Random(f"{seed}:{trial}")


@dataclass
class MetricsReport:
    protocol: str
    seed: int
    trials: int
    records: list[dict]
    aggregates: dict
    violations: int
    conservation_ok: bool
    events: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "protocol": self.protocol,
                "seed": self.seed,
                "trials": self.trials,
                "aggregates": self.aggregates,
                "violations": self.violations,
                "conservation_ok": self.conservation_ok,
                "records": self.records,
            },
            sort_keys=True,
            indent=2,
        )


def mean_se(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    m = sum(values) / len(values)
    if len(values) < 2:
        return m, 0.0
    var = sum((v - m) ** 2 for v in values) / (len(values) - 1)
    return m, math.sqrt(var / len(values))


def check_delta_inclusion(events: list[dict]) -> int:
    """Count queued bundles whose commitment missed its deadline."""
    included = {}
    for e in events:
        if e["kind"] == "commitment_included":
            included.setdefault(e["serial"], e["block"])
    misses = 0
    for e in events:
        if e["kind"] == "bundle_queued":
            at = included.get(e["serial"])
            if at is None or at > e["deadline"]:
                misses += 1
    return misses


# --- sealed-bid auction --------------------------------------------------------------


def run_auction_trial(cfg: ScenarioConfig, rng: random.Random) -> dict:
    n = cfg.n_tokens
    a = cfg.auction
    commit_window = a.commit_window or cfg.delta
    reveal_window = a.reveal_window or cfg.delta
    chain = ChainState(n, cfg.delta, cfg.disposition)
    fee = TokenVector(tuple(cfg.relayer.fee))
    collateral = TokenVector(tuple(cfg.relayer.collateral))
    balance = TokenVector(tuple(cfg.wallets.balance))
    numeraire = 0

    seller = new_wallet("seller", TokenVector.zero(n))
    chain.add_wallet(seller)
    k = rng.randint(a.bidders_min, a.bidders_max)
    headroom = balance.amounts[numeraire] - fee.amounts[numeraire] \
        - collateral.amounts[numeraire]
    bidders = []
    for i in range(k):
        w = new_wallet(f"bidder{i}", balance)
        chain.add_wallet(w)
        bidders.append(SealedBidder(
            wallet=w,
            root_key=crypto.RootKey(rng.randbytes(32)),
            randomness=crypto.Randomness(rng.randbytes(32)),
            bid=rng.randint(1, max(1, min(a.max_bid, headroom))),
            reveal=rng.random() >= a.withhold_prob,
            include_delay=rng.randint(1, min(cfg.delta, commit_window)),
            reveal_offset=rng.randint(1, reveal_window),
        ))
    chain.freeze_supply()
    auction_cfg = AuctionConfig(
        auction_id="A", commit_window=commit_window,
        reveal_window=reveal_window, pricing=a.pricing, numeraire=numeraire,
    )
    result = run_sealed_bid_auction(
        chain, auction_cfg, bidders, "relayer", fee, collateral, "seller"
    )
    violations = 0
    if not chain.conservation_ok():
        violations += 1
    violations += check_delta_inclusion(chain.events)
    withheld = [
        (b.wallet.id, b.bid) for b in bidders if not b.reveal
    ]
    return {
        "winner": result.winner,
        "price": result.price,
        "no_sale": result.no_sale,
        "revealed": result.revealed,
        "withheld": withheld,
        "burned": list(result.burned.amounts) if result.burned else None,
        "collateral": list(collateral.amounts),
        "violations": violations,
        "events": chain.events,
    }


# --- frequent batch auction (market-level Monte Carlo) ---------------------------------


def mm_quote_orders(eps: Fraction, depth: int) -> list[FBAOrder]:
    """Competing MMs quoting both sides exactly at the external price."""
    num, den = eps.numerator, eps.denominator
    scale = max(1, -(-depth // den))
    return [
        FBAOrder("buy", den * scale, num * scale),
        FBAOrder("sell", den * scale, num * scale),
    ]


def run_fba_trial(cfg: ScenarioConfig, rng: random.Random) -> dict:
    eps0 = cfg.price_fraction
    prices = PriceProcess(eps0, cfg.step_fraction, rng)
    for _ in range(2 * cfg.delta):
        prices.step()
    eps_t = prices.price
    q = cfg.fba.order_qty
    side = rng.choice(["buy", "sell"])
    if side == "buy":
        user = FBAOrder("buy", q, int(eps_t * q * 2) + q)
    else:
        user = FBAOrder("sell", q, max(1, int(eps_t * q / 2)))
    orders = [user] + mm_quote_orders(eps_t, cfg.fba.mm_depth)
    clearing = clearing_price(orders)
    price = clearing.price
    return {
        "side": side,
        "exec_price": float(price) if price is not None else None,
        "eps_commit": float(eps0),
        "diff": float(price - eps0) if price is not None else None,
    }


# --- RFQ fee escalator ------------------------------------------------------------------


def run_rfq_trial(cfg: ScenarioConfig, rng: random.Random) -> dict:
    r = cfg.rfq
    schedule = FeeSchedule(created_at=0, slope=Fraction(str(r.fee_slope)))
    mms = [
        MarketMakerAgent(
            f"mm{i}",
            latency=rng.randint(0, r.latency_max) if r.latency_max else 0,
            fill_cost=Fraction(str(r.fill_cost)),
        )
        for i in range(r.mm_count)
    ]
    race = race_accept(schedule, mms)
    if race is None:
        return {"filled": False, "fee": None}
    height, winner = race
    return {
        "filled": True,
        "accept_height": height,
        "mm": winner.mm_id,
        "fee": float(schedule.fee(height)),
    }


# --- AMM paired-seed comparison ------------------------------------------------------------


def _expected_swap_out(reserves: tuple[int, int], direction: str,
                       amount_in: int, fee: Fraction) -> int:
    rx, ry = reserves
    r_in, r_out = (rx, ry) if direction == "x_for_y" else (ry, rx)
    effective = amount_in * (1 - fee)
    return int(Fraction(r_out) * effective / (r_in + effective))


def run_amm_trial(cfg: ScenarioConfig, rng: random.Random) -> dict:
    p = cfg.amm
    fee = Fraction(str(p.pool_fee))
    orders = []
    for i in range(p.orders):
        direction = rng.choice(["x_for_y", "y_for_x"])
        size = rng.randint(p.order_size // 2, p.order_size)
        if direction == "y_for_x":
            # y amounts scale with the pool price so both sides trade
            # comparable value
            size = size * max(1, p.reserve_y // p.reserve_x)
        orders.append(AMMUserOrder(
            direction=direction,
            amount_in=size,
            commit_height=rng.randint(0, p.blocks - 1),
        ))
    path_seed = rng.random()
    results = {}
    for mode in ("dpacc", "transparent"):
        pool = AMMPool("pool", 0, 1, p.reserve_x, p.reserve_y, fee)
        prices = PriceProcess(
            Fraction(p.reserve_y, p.reserve_x), cfg.step_fraction,
            random.Random(path_seed),
        )
        results[mode] = run_amm_scenario(pool, orders, mode, prices, p.blocks)

    violations = 0
    rows = []
    for ex_d, ex_t in zip(results["dpacc"], results["transparent"]):
        expected = _expected_swap_out(
            ex_d.reserves_at_exec, ex_d.order.direction,
            ex_d.order.amount_in, fee,
        )
        analytic_ok = expected == ex_d.amount_out
        dominates = ex_d.amount_out > ex_t.amount_out
        if not analytic_ok or not dominates:
            violations += 1
        rows.append({
            "direction": ex_d.order.direction,
            "in": ex_d.order.amount_in,
            "dpacc_out": ex_d.amount_out,
            "transparent_out": ex_t.amount_out,
            "analytic_ok": analytic_ok,
            "dominates": dominates,
        })
    return {"orders": rows, "violations": violations}


# --- liquidation ------------------------------------------------------------------------------


def run_liquidation_trial(cfg: ScenarioConfig, rng: random.Random) -> dict:
    p = cfg.liquidation
    position = LiquidationPosition(
        collateral=p.collateral, debt=p.debt,
        threshold=Fraction(str(p.threshold)),
    )
    prices = PriceProcess(cfg.price_fraction, cfg.step_fraction, rng)
    path = prices.path(p.horizon)
    try:
        result = run_liquidation(position, path, p.bidders)
    except LedgerError:
        return {"triggered": False}
    return {
        "triggered": True,
        "trigger_height": result.trigger_height,
        "revenue": result.revenue,
        "value": float(result.collateral_value),
        "shortfall": result.shortfall,
    }


# --- randomized mixed-protocol invariants fuzz ----------------------------------------------


def run_invariants_trial(cfg: ScenarioConfig, rng: random.Random) -> dict:
    n = cfg.n_tokens
    chain = ChainState(n, cfg.delta, cfg.disposition)
    balance = TokenVector(tuple(cfg.wallets.balance))
    wallets = []
    for i in range(cfg.wallets.count):
        w = new_wallet(f"w{i}", balance)
        chain.add_wallet(w)
        wallets.append(w)
    if n >= 2:
        chain.pools["pool"] = AMMPool("pool", 0, 1, 10_000, 10_000)
    chain.freeze_supply()

    fee = TokenVector(tuple(cfg.relayer.fee))
    collateral = TokenVector(tuple(cfg.relayer.collateral))
    policy_cost = fee + collateral
    violations = 0
    nonce = 0
    pending_reveals = []  # (height, wallet, serial, tx)
    write_once_checks = 0
    abort_checks = 0

    # the trailing blocks only drain queued inclusions and reveal windows
    drain = 3 * cfg.delta
    for block in range(cfg.blocks + drain):
        quiet = block >= cfg.blocks
        chain.advance_block()
        due = [p for p in pending_reveals if p[0] <= chain.height]
        pending_reveals = [p for p in pending_reveals if p[0] > chain.height]
        for _, w, serial, tx in due:
            if chain.commitments.get(serial) != tx.digest():
                continue
            # a mismatched reveal must abort without touching state
            wrong = Transaction(tx.sender, tx.nonce + 10_000, tx.instructions)
            snap = chain.total_tokens()
            pre_map = dict(w.secret_map)
            try:
                cmt.reveal(chain, w, serial, wrong)
                violations += 1
            except AbortError:
                if chain.total_tokens() != snap or w.secret_map != pre_map:
                    violations += 1
                abort_checks += 1
            cmt.reveal(chain, w, serial, tx)

        for _ in range(0 if quiet else rng.randint(1, 4)):
            op = rng.choice(["send", "dpacc", "swap", "rewrite"])
            a, b = rng.sample(wallets, 2)
            nonce += 1
            if op == "send":
                amt = TokenVector.single(
                    n, rng.randrange(n), rng.randint(0, 5)
                )
                tx = Transaction(a.id, nonce, (Send(b.id, amt),))
                chain.execute(tx, a.default_context())
            elif op == "dpacc":
                extra = TokenVector.single(n, 0, rng.randint(0, 3))
                need = policy_cost + extra
                if not need <= a.residual():
                    continue
                rk = crypto.RootKey(rng.randbytes(32))
                rr = crypto.Randomness(rng.randbytes(32))
                com = a.add_secret_mapping(rk, rr, need)
                serial = crypto.derive_serial(rk)
                payload = (Send(b.id, extra),) if rng.random() < 0.8 else (
                    Send(b.id, extra + TokenVector.single(n, 0, 10**9)),
                )
                dpacc = cmt.make_base_dpacc(
                    a.id, nonce, "relayer", fee, collateral, payload
                )
                bundle = cmt.build_bundle(a, serial, dpacc, [com])
                reveal_window = rng.randint(cfg.delta, 2 * cfg.delta)
                cmt.relayer_include(
                    chain, bundle, a,
                    delay=rng.randint(1, cfg.delta),
                    reveal_window=reveal_window,
                )
                if rng.random() < 0.8:  # otherwise withhold: timeout disposes
                    item = chain.pending[-1]
                    reveal_h = rng.randint(
                        item.include_at, item.include_at + reveal_window
                    )
                    pending_reveals.append((reveal_h, a, serial, dpacc.tx))
            elif op == "swap" and n >= 2:
                amt = rng.randint(1, 50)
                direction = rng.choice(["x_for_y", "y_for_x"])
                tx = Transaction(
                    a.id, nonce, (SwapAMM("pool", direction, amt),)
                )
                chain.execute(tx, a.default_context())
            elif op == "rewrite":
                entries = list(chain.commitments.items())
                if not entries:
                    continue
                s_bytes, _ = rng.choice(entries)
                rk = crypto.RootKey(rng.randbytes(32))
                try:
                    chain.commitments.set(
                        crypto.Secret(s_bytes), rng.randbytes(32),
                        crypto.sign(rk, b"x"),
                    )
                    violations += 1
                except (WriteOnceViolation,):
                    write_once_checks += 1

        if not chain.conservation_ok():
            violations += 1
        for w in wallets:
            if not w.check_disjointness():
                violations += 1

    violations += check_delta_inclusion(chain.events)
    return {
        "blocks": chain.height,
        "violations": violations,
        "write_once_checks": write_once_checks,
        "abort_checks": abort_checks,
        "events": chain.events,
    }


# --- prover best response over a collateral grid ----------------------------------------------


@dataclass
class BestResponse:
    best_collateral: int
    table: dict[int, dict]


def _collateral_branch(
    collateral: int, fee: int, delta: int, reveal: bool
) -> Fraction:
    """Wallet value change from one committed transaction, by simulation."""
    chain = ChainState(1, delta, disposition="burn")
    w = new_wallet("prover", TokenVector((fee + collateral + 100,)))
    chain.add_wallet(w)
    chain.freeze_supply()
    rk = crypto.RootKey(bytes([7]) * 32)
    rr = crypto.Randomness(bytes([8]) * 32)
    com = w.add_secret_mapping(rk, rr, TokenVector((fee + collateral,)))
    serial = crypto.derive_serial(rk)
    dpacc = cmt.make_base_dpacc(
        "prover", 0, "relayer", TokenVector((fee,)),
        TokenVector((collateral,)), (Custom(b""),),
    )
    bundle = cmt.build_bundle(w, serial, dpacc, [com])
    before = w.spendable().amounts[0]
    cmt.relayer_include(chain, bundle, w, delay=1, reveal_window=delta)
    chain.advance_block()
    if reveal:
        cmt.reveal(chain, w, serial, dpacc.tx)
    for _ in range(delta + 1):
        chain.advance_block()
    assert chain.conservation_ok()
    return Fraction(w.spendable().amounts[0] - before)


def best_response_collateral(
    grid: list[int],
    policy_min: int,
    locking_cost: Fraction,
    trade_value: int,
    fee: int,
    lock_blocks: int,
    delta: int = 3,
) -> BestResponse:
    """Prover's best collateral choice, by exhaustive payoff evaluation.

    Below the relayer's minimum the bundle is never included (payoff 0);
    at or above it, the payoff is the simulated wallet change plus the
    trade value, minus the cost of keeping collateral locked. Ties break
    toward less collateral.
    """
    if not grid:
        raise LedgerError("collateral grid must be non-empty")
    table = {}
    for c in sorted(grid):
        if c < policy_min:
            table[c] = {"included": False, "reveal": Fraction(0),
                        "withhold": Fraction(0)}
            continue
        lock_penalty = locking_cost * c * lock_blocks
        reveal_payoff = (
            _collateral_branch(c, fee, delta, reveal=True)
            + trade_value - lock_penalty
        )
        withhold_payoff = _collateral_branch(c, fee, delta, reveal=False) \
            - lock_penalty
        table[c] = {"included": True, "reveal": reveal_payoff,
                    "withhold": withhold_payoff}
    best = max(
        (c for c in table if table[c]["included"]),
        key=lambda c: (table[c]["reveal"], -c),
        default=None,
    )
    if best is None:
        raise LedgerError("no grid point satisfies the relayer policy")
    return BestResponse(best_collateral=best, table=table)


# --- orchestration ---------------------------------------------------------------------------


_TRIAL_RUNNERS = {
    "auction": run_auction_trial,
    "fba": run_fba_trial,
    "rfq": run_rfq_trial,
    "amm": run_amm_trial,
    "liquidation": run_liquidation_trial,
    "invariants": run_invariants_trial,
}


def _aggregate(protocol: str, records: list[dict]) -> dict:
    agg: dict = {}
    if protocol == "fba":
        diffs = [r["diff"] for r in records if r["diff"] is not None]
        m, se = mean_se(diffs)
        agg = {"mean_price_diff": m, "se_price_diff": se}
    elif protocol == "rfq":
        fees = [r["fee"] for r in records if r["fee"] is not None]
        m, se = mean_se(fees)
        agg = {"mean_fee": m, "se_fee": se}
    elif protocol == "liquidation":
        triggered = [r for r in records if r["triggered"]]
        revenues = [float(r["revenue"]) for r in triggered]
        values = [r["value"] for r in triggered]
        rm, rse = mean_se(revenues)
        vm, _ = mean_se(values)
        agg = {"triggered": len(triggered), "mean_revenue": rm,
               "se_revenue": rse, "mean_value": vm}
    elif protocol == "auction":
        prices = [float(r["price"]) for r in records if r["price"] is not None]
        m, se = mean_se(prices)
        agg = {"mean_price": m, "se_price": se,
               "no_sale": sum(1 for r in records if r["no_sale"])}
    return agg


def run_scenario(cfg: ScenarioConfig) -> MetricsReport:
    runner = _TRIAL_RUNNERS[cfg.protocol]
    records, events = [], []
    violations = 0
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        record = runner(cfg, rng)
        for e in record.pop("events", []):
            events.append({"trial": t, **e})
        record["trial"] = t
        violations += record.get("violations", 0)
        records.append(record)
    return MetricsReport(
        protocol=cfg.protocol,
        seed=cfg.seed,
        trials=cfg.trials,
        records=records,
        aggregates=_aggregate(cfg.protocol, records),
        violations=violations,
        conservation_ok=violations == 0,
        events=events,
    )


def write_outputs(report: MetricsReport, out_dir, fmt: str = "json") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    keys = sorted({
        k for r in report.records for k in r
        if not isinstance(r[k], (list, dict))
    })
    with open(out / "trials.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=keys, extrasaction="ignore")
        writer.writeheader()
        for r in report.records:
            writer.writerow({k: r.get(k) for k in keys})
    with open(out / "events.ndjson", "w") as f:
        for e in report.events:
            f.write(json.dumps(e, sort_keys=True) + "\n")
    if fmt == "csv":
        # trials.csv already written; report.json kept as the summary
        pass
