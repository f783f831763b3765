"""Deterministic discrete-block chain simulator.

Token model, block heights with a finality bound, the global write-once
transaction commitment map, and the transaction execution engine with
break-point, lock, and burn semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

from . import crypto
from .crypto import Secret, hash_tagged

if TYPE_CHECKING:
    from .wallet import SmartWallet, SpendContext


class LedgerError(Exception):
    pass


class WriteOnceViolation(LedgerError):
    """Attempt to overwrite a non-zero global commitment entry."""


class AuthError(LedgerError):
    pass


class ExecError(LedgerError):
    """An instruction could not be applied."""


# --- Token model --------------------------------------------------------------


@dataclass(frozen=True)
class TokenVector:
    """Componentwise non-negative integer amounts, one slot per token type."""

    amounts: tuple[int, ...]

    def __post_init__(self):
        if any(a < 0 for a in self.amounts):
            raise LedgerError("token amounts must be non-negative")
        if any(not isinstance(a, int) for a in self.amounts):
            raise LedgerError("token amounts must be integers")

    @classmethod
    def zero(cls, n: int) -> "TokenVector":
        return cls((0,) * n)

    @classmethod
    def single(cls, n: int, index: int, amount: int) -> "TokenVector":
        amounts = [0] * n
        amounts[index] = amount
        return cls(tuple(amounts))

    @property
    def n(self) -> int:
        return len(self.amounts)

    def __add__(self, other: "TokenVector") -> "TokenVector":
        return TokenVector(
            tuple(a + b for a, b in zip(self.amounts, other.amounts, strict=True))
        )

    def __sub__(self, other: "TokenVector") -> "TokenVector":
        # construction re-checks non-negativity, so underflow raises
        return TokenVector(
            tuple(a - b for a, b in zip(self.amounts, other.amounts, strict=True))
        )

    def __le__(self, other: "TokenVector") -> bool:
        return all(a <= b for a, b in zip(self.amounts, other.amounts, strict=True))

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.amounts)

    def serialize(self) -> bytes:
        out = len(self.amounts).to_bytes(2, "big")
        for a in self.amounts:
            out += a.to_bytes(8, "big")
        return out


# --- Instructions and transactions --------------------------------------------


@dataclass(frozen=True)
class PayFee:
    to: str
    amount: TokenVector


@dataclass(frozen=True)
class Lock:
    amount: TokenVector


@dataclass(frozen=True)
class BreakPoint:
    pass


@dataclass(frozen=True)
class Send:
    to: str
    amount: TokenVector


@dataclass(frozen=True)
class Bid:
    auction: str
    amount: TokenVector


@dataclass(frozen=True)
class SwapAMM:
    pool: str
    direction: str  # "x_for_y" or "y_for_x"
    amount_in: int


@dataclass(frozen=True)
class Custom:
    payload: bytes


Instruction = Union[PayFee, Lock, BreakPoint, Send, Bid, SwapAMM, Custom]

_KIND_TAGS = {
    PayFee: b"\x01",
    Lock: b"\x02",
    BreakPoint: b"\x03",
    Send: b"\x04",
    Bid: b"\x05",
    SwapAMM: b"\x06",
    Custom: b"\x07",
}


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def serialize_instruction(ins: Instruction) -> bytes:
    tag = _KIND_TAGS[type(ins)]
    if isinstance(ins, PayFee):
        body = _lp(ins.to.encode()) + ins.amount.serialize()
    elif isinstance(ins, Lock):
        body = ins.amount.serialize()
    elif isinstance(ins, BreakPoint):
        body = b""
    elif isinstance(ins, Send):
        body = _lp(ins.to.encode()) + ins.amount.serialize()
    elif isinstance(ins, Bid):
        body = _lp(ins.auction.encode()) + ins.amount.serialize()
    elif isinstance(ins, SwapAMM):
        direction = b"\x00" if ins.direction == "x_for_y" else b"\x01"
        body = _lp(ins.pool.encode()) + direction + ins.amount_in.to_bytes(8, "big")
    elif isinstance(ins, Custom):
        body = _lp(ins.payload)
    else:  # pragma: no cover
        raise LedgerError(f"unknown instruction {ins!r}")
    return tag + _lp(body)


def serialize_instructions(instructions: tuple[Instruction, ...]) -> bytes:
    out = len(instructions).to_bytes(2, "big")
    for ins in instructions:
        out += serialize_instruction(ins)
    return out


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise LedgerError("truncated serialization")
        out = self.data[self.pos : self.pos + k]
        self.pos += k
        return out

    def take_lp(self) -> bytes:
        k = int.from_bytes(self.take(4), "big")
        return self.take(k)


def _read_vector(r: _Reader) -> TokenVector:
    count = int.from_bytes(r.take(2), "big")
    return TokenVector(
        tuple(int.from_bytes(r.take(8), "big") for _ in range(count))
    )


def deserialize_instructions(data: bytes) -> tuple[Instruction, ...]:
    """Inverse of serialize_instructions; rejects trailing bytes."""
    r = _Reader(data)
    count = int.from_bytes(r.take(2), "big")
    out = []
    for _ in range(count):
        tag = r.take(1)
        body = _Reader(r.take_lp())
        if tag == b"\x01":
            out.append(PayFee(body.take_lp().decode(), _read_vector(body)))
        elif tag == b"\x02":
            out.append(Lock(_read_vector(body)))
        elif tag == b"\x03":
            out.append(BreakPoint())
        elif tag == b"\x04":
            out.append(Send(body.take_lp().decode(), _read_vector(body)))
        elif tag == b"\x05":
            out.append(Bid(body.take_lp().decode(), _read_vector(body)))
        elif tag == b"\x06":
            pool = body.take_lp().decode()
            direction = "x_for_y" if body.take(1) == b"\x00" else "y_for_x"
            out.append(SwapAMM(pool, direction, int.from_bytes(body.take(8), "big")))
        elif tag == b"\x07":
            out.append(Custom(body.take_lp()))
        else:
            raise LedgerError(f"unknown instruction tag {tag!r}")
        if body.pos != len(body.data):
            raise LedgerError("trailing bytes in instruction body")
    if r.pos != len(data):
        raise LedgerError("trailing bytes after instruction list")
    return tuple(out)


@dataclass(frozen=True)
class Transaction:
    """Ordered instruction list with a canonical, injective serialization.

    The digest splits the transaction at the break point: the prefix covers
    the instructions up to and including it, the suffix covers the remainder
    plus the sender/nonce trailer. The prefix bytes are therefore identical
    across senders, which is what the prefix proof reveals.
    """

    sender: str
    nonce: int
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        breaks = sum(1 for i in self.instructions if isinstance(i, BreakPoint))
        if breaks > 1:
            raise LedgerError("at most one break point per transaction")

    def split(self) -> tuple[tuple[Instruction, ...], tuple[Instruction, ...]]:
        for idx, ins in enumerate(self.instructions):
            if isinstance(ins, BreakPoint):
                return self.instructions[: idx + 1], self.instructions[idx + 1 :]
        return (), self.instructions

    def prefix_bytes(self) -> bytes:
        pre, _ = self.split()
        return serialize_instructions(pre)

    def suffix_bytes(self) -> bytes:
        _, post = self.split()
        return (
            serialize_instructions(post)
            + self.nonce.to_bytes(8, "big")
            + _lp(self.sender.encode())
        )

    def digest(self) -> bytes:
        return hash_tagged(crypto.TAG_TX, self.prefix_bytes(), self.suffix_bytes())


# --- Global transaction commitment mapping -------------------------------------

ZERO_DIGEST = b"\x00" * 32


class GlobalCommitmentMap:
    """Write-once map from revealed serials to committed transaction digests."""

    def __init__(self):
        self._entries: dict[bytes, bytes] = {}

    def get(self, serial: Secret) -> bytes:
        return self._entries.get(serial.value, ZERO_DIGEST)

    def set(self, serial: Secret, digest: bytes, sig: bytes) -> None:
        if self.get(serial) != ZERO_DIGEST:
            raise WriteOnceViolation(f"entry for serial already set")
        if not crypto.verify_sig(serial, digest, sig):
            raise AuthError("digest not signed by the serial's key")
        self._entries[serial.value] = digest

    def items(self):
        return self._entries.items()


# --- Chain state ----------------------------------------------------------------


@dataclass
class PendingInclusion:
    serial: Secret
    digest: bytes
    sig: bytes
    queued_at: int
    include_at: int
    deadline: int


@dataclass
class RevealWindow:
    serial: Secret
    wallet_id: str
    commitment: crypto.Commitment
    collateral: TokenVector
    reveal_by: int
    revealed: bool = False


@dataclass
class ExecResult:
    executed_prefix_length: int
    fully_executed: bool
    reason: Optional[str] = None


class ChainState:
    """Single-writer simulated chain.

    Conservation invariant: wallet balances plus relayer holdings, escrows,
    pool reserves, and the burn sink always sum to the initial token supply.
    """

    def __init__(self, n_tokens: int, delta: int, disposition: str = "lock"):
        if delta < 1:
            raise LedgerError("delta must be >= 1")
        if disposition not in ("burn", "lock"):
            raise LedgerError("disposition must be 'burn' or 'lock'")
        self.n = n_tokens
        self.delta = delta
        self.disposition = disposition
        self.height = 0
        self.wallets: dict[str, SmartWallet] = {}
        self.relayers: dict[str, TokenVector] = {}
        self.escrows: dict[str, TokenVector] = {}
        self.pools: dict[str, object] = {}
        self.burn_sink = TokenVector.zero(n_tokens)
        self.commitments = GlobalCommitmentMap()
        self.pending: list[PendingInclusion] = []
        self.reveal_windows: dict[bytes, RevealWindow] = {}
        self.auction_bids: dict[str, list[tuple[str, TokenVector]]] = {}
        self.events: list[dict] = []
        self._total: Optional[TokenVector] = None

    # -- bookkeeping

    def add_wallet(self, wallet: SmartWallet) -> None:
        self.wallets[wallet.id] = wallet

    def freeze_supply(self) -> None:
        """Record the current total as the conserved supply T."""
        self._total = self.total_tokens()

    def total_tokens(self) -> TokenVector:
        total = TokenVector.zero(self.n)
        for w in self.wallets.values():
            total = total + w.balance()
        for held in self.relayers.values():
            total = total + held
        for held in self.escrows.values():
            total = total + held
        for pool in self.pools.values():
            total = total + pool.reserves_vector(self.n)
        return total + self.burn_sink

    def conservation_ok(self) -> bool:
        if self._total is None:
            raise LedgerError("supply not frozen; call freeze_supply() first")
        return self.total_tokens() == self._total

    def log(self, kind: str, **fields) -> None:
        self.events.append({"block": self.height, "kind": kind, **fields})

    def credit_relayer(self, relayer: str, amount: TokenVector) -> None:
        held = self.relayers.get(relayer, TokenVector.zero(self.n))
        self.relayers[relayer] = held + amount

    def credit_escrow(self, key: str, amount: TokenVector) -> None:
        held = self.escrows.get(key, TokenVector.zero(self.n))
        self.escrows[key] = held + amount

    def debit_escrow(self, key: str, amount: TokenVector) -> None:
        held = self.escrows.get(key, TokenVector.zero(self.n))
        self.escrows[key] = held - amount

    # -- global commitment map

    def submit_global_commitment(
        self, serial: Secret, digest: bytes, sig: bytes
    ) -> None:
        self.commitments.set(serial, digest, sig)
        self.log("commitment_included", serial=serial.value.hex(), digest=digest.hex())

    def queue_inclusion(
        self, serial: Secret, digest: bytes, sig: bytes, delay: int = 1
    ) -> PendingInclusion:
        """Queue a commitment submission; included within delta blocks."""
        delay = max(1, min(delay, self.delta))
        item = PendingInclusion(
            serial=serial,
            digest=digest,
            sig=sig,
            queued_at=self.height,
            include_at=self.height + delay,
            deadline=self.height + self.delta,
        )
        self.pending.append(item)
        return item

    def track_reveal_window(
        self,
        serial: Secret,
        wallet_id: str,
        commitment: crypto.Commitment,
        collateral: TokenVector,
        reveal_by: int,
    ) -> None:
        self.reveal_windows[serial.value] = RevealWindow(
            serial=serial,
            wallet_id=wallet_id,
            commitment=commitment,
            collateral=collateral,
            reveal_by=reveal_by,
        )

    def mark_revealed(self, serial: Secret) -> None:
        window = self.reveal_windows.get(serial.value)
        if window is not None:
            window.revealed = True

    # -- block clock

    def advance_block(self) -> None:
        self.height += 1
        still_pending = []
        for item in self.pending:
            if item.include_at <= self.height or item.deadline <= self.height:
                self.submit_global_commitment(item.serial, item.digest, item.sig)
            else:
                still_pending.append(item)
        self.pending = still_pending
        for window in list(self.reveal_windows.values()):
            if not window.revealed and self.height > window.reveal_by:
                self._dispose_expired(window)

    def _dispose_expired(self, window: RevealWindow) -> None:
        wallet = self.wallets[window.wallet_id]
        if window.commitment not in wallet.secret_map:
            window.revealed = True  # already consumed elsewhere
            return
        if self.disposition == "burn":
            mapped = wallet.secret_map[window.commitment]
            burned = window.collateral
            if not burned <= mapped:
                burned = mapped
            wallet.secret_map[window.commitment] = mapped - burned
            self.burn_sink = self.burn_sink + burned
            wallet.release_to_default(window.commitment)
            self.log(
                "collateral_burned",
                wallet=window.wallet_id,
                amount=list(burned.amounts),
            )
        else:
            wallet.freeze(window.commitment)
            self.log("tokens_locked_forever", wallet=window.wallet_id)
        window.revealed = True

    def burn(self, wallet_id: str, commitment: crypto.Commitment, tokens: TokenVector) -> None:
        """Burn tokens out of a locked (committed) mapping."""
        if tokens.is_zero():
            return
        wallet = self.wallets[wallet_id]
        mapped = wallet.secret_map.get(commitment)
        if commitment == crypto.ZERO_COMMITMENT or mapped is None:
            raise LedgerError("can only burn tokens locked under a commitment")
        wallet.secret_map[commitment] = mapped - tokens
        self.burn_sink = self.burn_sink + tokens
        self.log("burn", wallet=wallet_id, amount=list(tokens.amounts))

    # -- execution engine

    def _snapshot(self) -> dict:
        return {
            "wallets": {
                wid: (dict(w.secret_map), dict(w.frozen))
                for wid, w in self.wallets.items()
            },
            "relayers": dict(self.relayers),
            "escrows": dict(self.escrows),
            "burn": self.burn_sink,
            "pools": {pid: p.reserves() for pid, p in self.pools.items()},
            "bids": {k: list(v) for k, v in self.auction_bids.items()},
        }

    def _restore(self, snap: dict) -> None:
        for wid, (smap, frozen) in snap["wallets"].items():
            w = self.wallets[wid]
            w.secret_map = dict(smap)
            w.frozen = dict(frozen)
        self.relayers = dict(snap["relayers"])
        self.escrows = dict(snap["escrows"])
        self.burn_sink = snap["burn"]
        for pid, reserves in snap["pools"].items():
            self.pools[pid].set_reserves(*reserves)
        self.auction_bids = {k: list(v) for k, v in snap["bids"].items()}

    def _apply(self, ctx: SpendContext, ins: Instruction) -> None:
        if isinstance(ins, PayFee):
            ctx.spend(ins.amount)
            self.credit_relayer(ins.to, ins.amount)
        elif isinstance(ins, Lock):
            ctx.lock(ins.amount)
        elif isinstance(ins, BreakPoint):
            pass
        elif isinstance(ins, Send):
            if ins.to not in self.wallets:
                raise ExecError(f"unknown recipient wallet {ins.to!r}")
            ctx.spend(ins.amount)
            self.wallets[ins.to].deposit(ins.amount)
        elif isinstance(ins, Bid):
            ctx.spend(ins.amount)
            self.credit_escrow(f"auction:{ins.auction}", ins.amount)
            self.auction_bids.setdefault(ins.auction, []).append(
                (ctx.wallet_id, ins.amount)
            )
        elif isinstance(ins, SwapAMM):
            pool = self.pools.get(ins.pool)
            if pool is None:
                raise ExecError(f"unknown pool {ins.pool!r}")
            token_in, token_out = pool.token_pair(ins.direction)
            amount_in = TokenVector.single(self.n, token_in, ins.amount_in)
            ctx.spend(amount_in)
            out = pool.swap(ins.direction, ins.amount_in)
            self.wallets[ctx.wallet_id].deposit(
                TokenVector.single(self.n, token_out, out)
            )
        elif isinstance(ins, Custom):
            pass
        else:  # pragma: no cover
            raise ExecError(f"unknown instruction {ins!r}")

    def execute(self, tx: Transaction, ctx: SpendContext) -> ExecResult:
        """Run a transaction under a spend context.

        With a break point: each pre-break instruction applies iff it is
        individually valid; the post-break group is all-or-nothing. Without
        one, the whole transaction is atomic.
        """
        pre, post = tx.split()
        if not pre:
            snap = self._snapshot()
            locked_snap = ctx.locked
            try:
                for ins in post:
                    self._apply(ctx, ins)
            except (ExecError, LedgerError) as e:
                self._restore(snap)
                ctx.locked = locked_snap
                self.log("tx_aborted", digest=tx.digest().hex(), reason=str(e))
                return ExecResult(0, False, reason=str(e))
            self.log("tx_executed", digest=tx.digest().hex())
            return ExecResult(0, True)

        applied = 0
        for ins in pre:
            try:
                self._apply(ctx, ins)
                applied += 1
            except (ExecError, LedgerError) as e:
                self.log("prefix_step_skipped", reason=str(e))
        snap = self._snapshot()
        locked_snap = ctx.locked
        reason = None
        fully = True
        try:
            for ins in post:
                self._apply(ctx, ins)
        except (ExecError, LedgerError) as e:
            self._restore(snap)
            ctx.locked = locked_snap
            fully = False
            reason = str(e)
        self.log(
            "tx_executed" if fully else "tx_suffix_reverted",
            digest=tx.digest().hex(),
            prefix_steps=applied,
        )
        return ExecResult(applied, fully, reason=reason)
