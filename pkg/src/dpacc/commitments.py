"""Base collateralized-commitment construction: the prover's bundle, relayer
verification, bounded inclusion, reveal settlement, and collateral
disposition.

A base transaction's prefix is always [pay relayer fee, lock collateral,
break point], so prefixes with equal fee and collateral are byte-identical
across senders and payloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from . import crypto
from .crypto import (
    Accumulator,
    BalancePoK,
    Commitment,
    MembershipProof,
    PrefixPoK,
    SealedWitness,
    Secret,
    SerialRegistry,
)
from .ledger import (
    BreakPoint,
    ChainState,
    ExecResult,
    LedgerError,
    Lock,
    PayFee,
    Transaction,
    TokenVector,
    deserialize_instructions,
    serialize_instructions,
)
from .wallet import AbortError, SmartWallet


class BundleError(LedgerError):
    pass


@dataclass(frozen=True)
class BaseDPACC:
    """A transaction whose prefix pays the relayer and locks collateral."""

    tx: Transaction
    fee: TokenVector
    collateral: TokenVector
    relayer: str

    def digest(self) -> bytes:
        return self.tx.digest()


@dataclass(frozen=True)
class DPACCBundle:
    """What the prover hands a relayer: two proofs plus signatures.

    `inclusion_sig` signs the bare transaction digest so the relayer can
    post it to the global commitment map on the prover's behalf.
    """

    balance_pok: BalancePoK
    prefix_pok: PrefixPoK
    signature: bytes
    inclusion_sig: bytes

    def signed_message(self) -> bytes:
        return bundle_message(self.balance_pok, self.prefix_pok)

    @property
    def serial(self) -> Secret:
        return self.balance_pok.serial

    @property
    def digest(self) -> bytes:
        return self.prefix_pok.target


@dataclass(frozen=True)
class RelayerPolicy:
    relayer_id: str
    required_fee: TokenVector
    min_collateral: TokenVector
    eligible_root: Accumulator


@dataclass(frozen=True)
class VerifyOutcome:
    accepted: bool
    reason: Optional[str] = None  # balance | duplicate | prefix | fee | collateral | signature


def bundle_message(balance_pok: BalancePoK, prefix_pok: PrefixPoK) -> bytes:
    return crypto.hash_tagged(
        b"dpacc/bundle/v1",
        balance_pok.serial.value,
        balance_pok.root,
        prefix_pok.revealed_prefix,
        prefix_pok.target,
    )


def make_base_dpacc(
    sender: str,
    nonce: int,
    relayer: str,
    fee: TokenVector,
    collateral: TokenVector,
    payload: tuple,
) -> BaseDPACC:
    tx = Transaction(
        sender=sender,
        nonce=nonce,
        instructions=(PayFee(relayer, fee), Lock(collateral), BreakPoint(), *payload),
    )
    return BaseDPACC(tx=tx, fee=fee, collateral=collateral, relayer=relayer)


def parse_prefix(prefix_bytes: bytes) -> tuple[PayFee, Lock]:
    """Check the mandated prefix structure and extract fee and collateral."""
    instructions = deserialize_instructions(prefix_bytes)
    if (
        len(instructions) != 3
        or not isinstance(instructions[0], PayFee)
        or not isinstance(instructions[1], Lock)
        or not isinstance(instructions[2], BreakPoint)
    ):
        raise BundleError("prefix is not [pay fee, lock collateral, break point]")
    return instructions[0], instructions[1]


def build_bundle(
    wallet: SmartWallet,
    serial: Secret,
    dpacc: BaseDPACC,
    commitments: list[Commitment],
) -> DPACCBundle:
    """Produce the prover's bundle for a base transaction.

    Fails if the serial's mapped tokens do not cover fee plus collateral
    (the eligibility rule) or its commitment is not in the accumulated set.
    """
    entry = wallet.key_ring.get(serial.value)
    if entry is None:
        raise BundleError("wallet does not hold this serial")
    mapped = wallet.secret_map.get(entry.commitment)
    if mapped is None:
        raise BundleError("commitment already consumed")
    if not (dpacc.fee + dpacc.collateral) <= mapped:
        raise BundleError("mapped tokens do not cover fee plus collateral")
    balance_pok = crypto.prove_balance_pok(entry.randomness, serial, commitments)
    prefix_pok = crypto.prove_prefix_pok(
        dpacc.tx.prefix_bytes(), dpacc.tx.suffix_bytes(), dpacc.digest()
    )
    msg = bundle_message(balance_pok, prefix_pok)
    return DPACCBundle(
        balance_pok=balance_pok,
        prefix_pok=prefix_pok,
        signature=crypto.sign(entry.root_key, msg),
        inclusion_sig=crypto.sign(entry.root_key, dpacc.digest()),
    )


def relayer_verify(
    bundle: DPACCBundle, policy: RelayerPolicy, registry: SerialRegistry
) -> VerifyOutcome:
    status = crypto.verify_balance_pok(
        bundle.balance_pok, policy.eligible_root.root, registry
    )
    if status == "duplicate":
        return VerifyOutcome(False, "duplicate")
    if status != "accept":
        return VerifyOutcome(False, "balance")
    if not crypto.verify_prefix_pok(bundle.prefix_pok, bundle.prefix_pok.target):
        return VerifyOutcome(False, "prefix")
    try:
        pay, lock = parse_prefix(bundle.prefix_pok.revealed_prefix)
    except (BundleError, LedgerError):
        return VerifyOutcome(False, "prefix")
    if pay.to != policy.relayer_id or not policy.required_fee <= pay.amount:
        return VerifyOutcome(False, "fee")
    if not policy.min_collateral <= lock.amount:
        return VerifyOutcome(False, "collateral")
    serial = bundle.serial
    if not crypto.verify_sig(serial, bundle.signed_message(), bundle.signature):
        return VerifyOutcome(False, "signature")
    if not crypto.verify_sig(serial, bundle.digest, bundle.inclusion_sig):
        return VerifyOutcome(False, "signature")
    return VerifyOutcome(True)


def relayer_include(
    chain: ChainState,
    bundle: DPACCBundle,
    wallet: SmartWallet,
    delay: int = 1,
    reveal_window: Optional[int] = None,
) -> int:
    """Queue the verified bundle's commitment for on-chain inclusion.

    Returns the inclusion height (always within delta of the current one).
    The wallet reference stands in for the smart-contract hook that enforces
    collateral disposition; the relayer-visible data stays in the bundle.
    """
    _, lock = parse_prefix(bundle.prefix_pok.revealed_prefix)
    item = chain.queue_inclusion(
        bundle.serial, bundle.digest, bundle.inclusion_sig, delay=delay
    )
    window = chain.delta if reveal_window is None else reveal_window
    entry = wallet.key_ring[bundle.serial.value]
    chain.track_reveal_window(
        serial=bundle.serial,
        wallet_id=wallet.id,
        commitment=entry.commitment,
        collateral=lock.amount,
        reveal_by=item.include_at + window,
    )
    chain.log(
        "bundle_queued",
        serial=bundle.serial.value.hex(),
        include_at=item.include_at,
        deadline=item.deadline,
    )
    return item.include_at


def total_locked(tx: Transaction) -> TokenVector:
    pre, _ = tx.split()
    total = None
    for ins in pre:
        if isinstance(ins, Lock):
            total = ins.amount if total is None else total + ins.amount
    if total is None:
        raise BundleError("transaction locks no collateral")
    return total


def reveal(
    chain: ChainState, wallet: SmartWallet, serial: Secret, tx: Transaction
) -> ExecResult:
    """Reveal and execute a committed transaction.

    The fee sits in the prefix, so the relayer is paid whatever the payload
    does. On full execution the collateral flows back to the zero
    commitment; on a failed payload it is disposed per the chain's
    configured mode.
    """
    digest = tx.digest()
    if chain.commitments.get(serial) != digest:
        raise AbortError("no matching on-chain commitment for this transaction")
    ctx = wallet.reveal_and_restrict(serial, tx, chain.commitments)
    result = chain.execute(tx, ctx)
    chain.mark_revealed(serial)
    if result.fully_executed:
        wallet.remap_defaults(ctx)
    else:
        collateral = total_locked(tx)
        if chain.disposition == "burn":
            remaining = wallet.secret_map[ctx.commitment]
            burned = collateral if collateral <= remaining else remaining
            chain.burn(wallet.id, ctx.commitment, burned)
            wallet.remap_defaults(ctx)
        else:
            wallet.freeze(ctx.commitment)
            chain.log("tokens_locked_forever", wallet=wallet.id)
    return result


def timeout_collateral(chain: ChainState, serial: Secret) -> None:
    """Dispose of collateral for a commitment whose reveal window expired.

    No-op if the commitment was revealed in time.
    """
    window = chain.reveal_windows.get(serial.value)
    if window is None:
        raise LedgerError("no reveal window tracked for this serial")
    if window.revealed:
        return
    if chain.height <= window.reveal_by:
        raise LedgerError("reveal window has not expired yet")
    chain._dispose_expired(window)


# --- wire format ----------------------------------------------------------------


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def serialize_bundle(bundle: DPACCBundle) -> bytes:
    """Canonical binary form (carries the transparent backend's witness)."""
    bp = bundle.balance_pok
    r_bytes, proof = bp.envelope._payload
    out = _lp(bp.serial.value) + _lp(bp.root) + _lp(r_bytes)
    out += proof.leaf_index.to_bytes(4, "big")
    out += len(proof.siblings).to_bytes(2, "big")
    for sib in proof.siblings:
        out += _lp(sib)
    pp = bundle.prefix_pok
    (suffix,) = pp.envelope._payload
    out += _lp(pp.revealed_prefix) + _lp(pp.target) + _lp(suffix)
    out += _lp(bundle.signature) + _lp(bundle.inclusion_sig)
    return out


def deserialize_bundle(data: bytes) -> DPACCBundle:
    from .ledger import _Reader

    r = _Reader(data)
    serial = Secret(r.take_lp())
    root = r.take_lp()
    r_bytes = r.take_lp()
    leaf_index = int.from_bytes(r.take(4), "big")
    n_sib = int.from_bytes(r.take(2), "big")
    siblings = tuple(r.take_lp() for _ in range(n_sib))
    balance_pok = BalancePoK(
        serial=serial,
        root=root,
        envelope=SealedWitness(
            (r_bytes, MembershipProof(leaf_index=leaf_index, siblings=siblings))
        ),
    )
    prefix_pok = PrefixPoK(
        revealed_prefix=r.take_lp(),
        target=r.take_lp(),
        envelope=SealedWitness((r.take_lp(),)),
    )
    signature = r.take_lp()
    inclusion_sig = r.take_lp()
    if r.pos != len(data):
        raise BundleError("trailing bytes in bundle")
    return DPACCBundle(balance_pok, prefix_pok, signature, inclusion_sig)


def bundle_debug_json(bundle: DPACCBundle) -> str:
    """Hex-JSON debug form; sealed witnesses are redacted."""
    return json.dumps(
        {
            "serial": bundle.serial.value.hex(),
            "root": bundle.balance_pok.root.hex(),
            "revealed_prefix": bundle.prefix_pok.revealed_prefix.hex(),
            "digest": bundle.digest.hex(),
            "signature": bundle.signature.hex(),
            "inclusion_sig": bundle.inclusion_sig.hex(),
            "witness": "<sealed>",
        },
        indent=2,
    )
