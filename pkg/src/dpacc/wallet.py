"""Smart contract wallet: secret commitment mapping, spend-context
derivation, and the reveal/abort rule against the global commitment map.

Tokens are fungible within a type, so the per-commitment "sets of tokens"
are amount vectors and set-disjointness becomes additivity: the entries of
the secret map (plus any permanently frozen ones) always sum to the wallet
balance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import crypto
from .crypto import Commitment, Randomness, RootKey, Secret, ZERO_COMMITMENT
from .ledger import (
    ExecError,
    GlobalCommitmentMap,
    LedgerError,
    TokenVector,
    Transaction,
    ZERO_DIGEST,
)


class WalletError(LedgerError):
    pass


class AbortError(WalletError):
    """Reveal refused: the global commitment map binds S to a different tx."""


@dataclass
class KeyEntry:
    root_key: RootKey
    randomness: Randomness
    commitment: Commitment


class SmartWallet:
    def __init__(self, wallet_id: str, initial: TokenVector):
        self.id = wallet_id
        self.n = initial.n
        # commitment -> mapped tokens; the zero commitment holds the residual
        self.secret_map: dict[Commitment, TokenVector] = {ZERO_COMMITMENT: initial}
        # commitments whose tokens are permanently unusable (lock disposition)
        self.frozen: dict[Commitment, TokenVector] = {}
        self.key_ring: dict[bytes, KeyEntry] = {}

    def balance(self) -> TokenVector:
        total = TokenVector.zero(self.n)
        for v in self.secret_map.values():
            total = total + v
        for v in self.frozen.values():
            total = total + v
        return total

    def spendable(self) -> TokenVector:
        """Balance excluding permanently frozen tokens."""
        total = TokenVector.zero(self.n)
        for v in self.secret_map.values():
            total = total + v
        return total

    def residual(self) -> TokenVector:
        return self.secret_map[ZERO_COMMITMENT]

    def deposit(self, amount: TokenVector) -> None:
        self.secret_map[ZERO_COMMITMENT] = self.residual() + amount

    def mapped_for(self, serial: Secret) -> Optional[TokenVector]:
        entry = self.key_ring.get(serial.value)
        if entry is None:
            return None
        return self.secret_map.get(entry.commitment)

    def add_secret_mapping(
        self, root_key: RootKey, randomness: Randomness, tokens: TokenVector
    ) -> Commitment:
        """Carve tokens out of the residual under a fresh commitment.

        The mapped vector is fixed until the serial is revealed.
        """
        serial = crypto.derive_serial(root_key)
        if serial.value in self.key_ring:
            raise WalletError("serial already used in this wallet")
        if not tokens <= self.residual():
            raise WalletError("insufficient unmapped residual for this mapping")
        com = crypto.commit(serial, randomness)
        if com in self.secret_map or com in self.frozen:
            raise WalletError("commitment already present")
        self.secret_map[ZERO_COMMITMENT] = self.residual() - tokens
        self.secret_map[com] = tokens
        self.key_ring[serial.value] = KeyEntry(root_key, randomness, com)
        return com

    def reveal_and_restrict(
        self, serial: Secret, tx: Transaction, commitments: GlobalCommitmentMap
    ) -> "SpendContext":
        """Open the commitment for `serial` to spend exactly its tokens.

        Aborts unless the global map has no entry for the serial or binds it
        to this very transaction.
        """
        entry = self.key_ring.get(serial.value)
        if entry is None or entry.commitment not in self.secret_map:
            raise AbortError("unknown or already-consumed serial")
        committed = commitments.get(serial)
        digest = tx.digest()
        if committed not in (ZERO_DIGEST, digest):
            raise AbortError("serial is bound to a different transaction")
        return SpendContext(
            wallet=self,
            commitment=entry.commitment,
            authorized=self.secret_map[entry.commitment],
            committed_digest=committed,
            serial=serial,
        )

    def default_context(self) -> "SpendContext":
        """Spend context over the zero-commitment residual (plain spend)."""
        return SpendContext(
            wallet=self,
            commitment=ZERO_COMMITMENT,
            authorized=self.residual(),
            committed_digest=ZERO_DIGEST,
            serial=None,
        )

    def release_to_default(self, commitment: Commitment) -> None:
        """Return a commitment's remaining tokens to the zero commitment."""
        if commitment == ZERO_COMMITMENT:
            return
        leftover = self.secret_map.pop(commitment, None)
        if leftover is not None:
            self.deposit(leftover)

    def freeze(self, commitment: Commitment) -> None:
        """Permanently lock a commitment's tokens (economic burn)."""
        tokens = self.secret_map.pop(commitment, None)
        if tokens is not None:
            self.frozen[commitment] = tokens

    def remap_defaults(self, ctx: "SpendContext") -> None:
        """After a transaction, unmapped tokens return to the zero commitment."""
        self.release_to_default(ctx.commitment)

    def check_disjointness(self) -> bool:
        """Map entries plus frozen entries must sum exactly to the balance."""
        total = TokenVector.zero(self.n)
        for v in self.secret_map.values():
            total = total + v
        for v in self.frozen.values():
            total = total + v
        return total == self.balance()

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "balance": list(self.balance().amounts),
            "residual": list(self.residual().amounts),
            "mappings": {
                com.value.hex(): list(v.amounts)
                for com, v in self.secret_map.items()
                if com != ZERO_COMMITMENT
            },
            "frozen": {
                com.value.hex(): list(v.amounts) for com, v in self.frozen.items()
            },
        }


@dataclass
class SpendContext:
    """Authorization to spend exactly the tokens mapped from one commitment."""

    wallet: SmartWallet
    commitment: Commitment
    authorized: TokenVector
    committed_digest: bytes
    serial: Optional[Secret]
    locked: TokenVector = None  # type: ignore[assignment]
    spent: TokenVector = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.locked is None:
            self.locked = TokenVector.zero(self.authorized.n)
        if self.spent is None:
            self.spent = TokenVector.zero(self.authorized.n)

    @property
    def wallet_id(self) -> str:
        return self.wallet.id

    def available(self) -> TokenVector:
        current = self.wallet.secret_map.get(
            self.commitment, TokenVector.zero(self.authorized.n)
        )
        return current - self.locked

    def spend(self, amount: TokenVector) -> None:
        if not amount <= self.available():
            raise ExecError("spend exceeds authorized unlocked tokens")
        current = self.wallet.secret_map[self.commitment]
        self.wallet.secret_map[self.commitment] = current - amount
        self.spent = self.spent + amount

    def lock(self, amount: TokenVector) -> None:
        if not amount <= self.available():
            raise ExecError("lock exceeds authorized unlocked tokens")
        self.locked = self.locked + amount


def new_wallet(wallet_id: str, initial: TokenVector) -> SmartWallet:
    return SmartWallet(wallet_id, initial)
