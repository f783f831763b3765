"""Commitment scheme, serial-number PKI, Merkle accumulator, and the
proof-of-knowledge layer with a transparent relation-checking backend.

The hash is SHA-256 with domain separation: every use of the hash prefixes a
tag and length-prefixes each field, so digests from different contexts can
never collide by construction.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

DIGEST_LEN = 32

TAG_COMMIT = b"dpacc/commit/v1"
TAG_LEAF = b"dpacc/merkle-leaf/v1"
TAG_NODE = b"dpacc/merkle-node/v1"
TAG_TX = b"dpacc/tx/v1"


class CryptoError(Exception):
    """Malformed input to a primitive."""


class NotAMemberError(CryptoError):
    """Asked to prove membership of a commitment not in the set."""


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def hash_tagged(tag: bytes, *parts: bytes) -> bytes:
    """SHA-256 over tag and length-prefixed parts. Injective per tag."""
    h = hashlib.sha256()
    h.update(_lp(tag))
    for part in parts:
        h.update(_lp(part))
    return h.digest()


def _check32(name: str, b: bytes) -> bytes:
    if not isinstance(b, bytes) or len(b) != 32:
        raise CryptoError(f"{name} must be exactly 32 bytes")
    return b


@dataclass(frozen=True)
class Secret:
    """Serial number: the public half of a commitment's key pair."""

    value: bytes

    def __post_init__(self):
        _check32("secret", self.value)


@dataclass(frozen=True)
class Randomness:
    value: bytes

    def __post_init__(self):
        _check32("randomness", self.value)

    @classmethod
    def generate(cls, rng=None) -> "Randomness":
        if rng is None:
            return cls(os.urandom(32))
        return cls(rng.randbytes(32))


@dataclass(frozen=True)
class Commitment:
    value: bytes

    def __post_init__(self):
        _check32("commitment", self.value)


ZERO_COMMITMENT = Commitment(b"\x00" * 32)


@dataclass(frozen=True)
class RootKey:
    """Signing key material; the serial number derives from it."""

    seed: bytes

    def __post_init__(self):
        _check32("root key seed", self.seed)

    @classmethod
    def generate(cls, rng=None) -> "RootKey":
        if rng is None:
            return cls(os.urandom(32))
        return cls(rng.randbytes(32))

    def _private(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)


def commit(secret: Secret, randomness: Randomness) -> Commitment:
    """Binding commitment to (S, r); deterministic, collision-resistant."""
    return Commitment(hash_tagged(TAG_COMMIT, secret.value, randomness.value))


def derive_serial(root_key: RootKey) -> Secret:
    """Serial number for a root key: its Ed25519 verification key."""
    pub = root_key._private().public_key()
    from cryptography.hazmat.primitives.serialization import (
        Encoding,
        PublicFormat,
    )

    return Secret(pub.public_bytes(Encoding.Raw, PublicFormat.Raw))


def sign(root_key: RootKey, msg: bytes) -> bytes:
    return root_key._private().sign(msg)


def verify_sig(serial: Secret, msg: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(serial.value).verify(sig, msg)
        return True
    except (InvalidSignature, ValueError):
        return False


# --- Merkle accumulator -----------------------------------------------------


@dataclass(frozen=True)
class Accumulator:
    root: bytes
    leaf_count: int


@dataclass(frozen=True)
class MembershipProof:
    leaf_index: int
    siblings: tuple[bytes, ...]


def _leaf_hash(com: Commitment) -> bytes:
    return hash_tagged(TAG_LEAF, com.value)


def _pad(leaves: list[bytes]) -> list[bytes]:
    # duplicate the last leaf up to the next power of two
    n = 1
    while n < len(leaves):
        n *= 2
    return leaves + [leaves[-1]] * (n - len(leaves))


def build_accumulator(commitments: list[Commitment]) -> Accumulator:
    """Merkle root over the commitments in insertion order."""
    if not commitments:
        raise CryptoError("cannot accumulate an empty set")
    level = _pad([_leaf_hash(c) for c in commitments])
    while len(level) > 1:
        level = [
            hash_tagged(TAG_NODE, level[i], level[i + 1])
            for i in range(0, len(level), 2)
        ]
    return Accumulator(root=level[0], leaf_count=len(commitments))


def prove_membership(
    com: Commitment, commitments: list[Commitment]
) -> MembershipProof:
    if com not in commitments:
        raise NotAMemberError("commitment is not in the set")
    index = commitments.index(com)
    level = _pad([_leaf_hash(c) for c in commitments])
    siblings = []
    i = index
    while len(level) > 1:
        siblings.append(level[i ^ 1])
        level = [
            hash_tagged(TAG_NODE, level[j], level[j + 1])
            for j in range(0, len(level), 2)
        ]
        i //= 2
    return MembershipProof(leaf_index=index, siblings=tuple(siblings))


def verify_membership(
    com: Commitment, proof: MembershipProof, root: bytes
) -> bool:
    node = _leaf_hash(com)
    i = proof.leaf_index
    for sib in proof.siblings:
        if i % 2 == 0:
            node = hash_tagged(TAG_NODE, node, sib)
        else:
            node = hash_tagged(TAG_NODE, sib, node)
        i //= 2
    return node == root


# --- Proof-of-knowledge layer ------------------------------------------------
#
# Transparent backend: the witness travels in a sealed envelope that only the
# verifier opens. The guarantees asserted by tests are protocol-level (the
# public API never exposes the witness); a SNARK backend can replace this
# without touching callers.


class SealedWitness:
    """Opaque witness container. No public accessor; verify() opens it."""

    __slots__ = ("_payload",)

    def __init__(self, payload: tuple):
        self._payload = payload

    def __repr__(self):
        return "SealedWitness(<sealed>)"


@dataclass(frozen=True)
class BalancePoK:
    """Proof of knowledge of r with h(S||r) in the accumulated set.

    Public surface: the revealed serial and the root the proof targets.
    """

    serial: Secret
    root: bytes
    envelope: SealedWitness


@dataclass(frozen=True)
class PrefixPoK:
    """Proof that the revealed prefix bytes open the committed digest.

    The hidden remainder of the transaction stays inside the envelope.
    """

    revealed_prefix: bytes
    target: bytes
    envelope: SealedWitness


class SerialRegistry:
    """Replay guard: remembers every serial that has verified a balance PoK."""

    def __init__(self):
        self._seen: set[bytes] = set()

    def seen(self, serial: Secret) -> bool:
        return serial.value in self._seen

    def record(self, serial: Secret) -> None:
        self._seen.add(serial.value)


def prove_balance_pok(
    randomness: Randomness, serial: Secret, commitments: list[Commitment]
) -> BalancePoK:
    com = commit(serial, randomness)
    proof = prove_membership(com, commitments)
    acc = build_accumulator(commitments)
    return BalancePoK(
        serial=serial,
        root=acc.root,
        envelope=SealedWitness((randomness.value, proof)),
    )


def verify_balance_pok(
    pok: BalancePoK, root: bytes, registry: SerialRegistry
) -> str:
    """Returns 'accept', 'reject', or 'duplicate'.

    The duplicate check fires before the relation check: a replayed serial is
    flagged regardless of which set it targets.
    """
    if registry.seen(pok.serial):
        return "duplicate"
    payload = pok.envelope._payload
    if (
        not isinstance(payload, tuple)
        or len(payload) != 2
        or not isinstance(payload[0], bytes)
        or len(payload[0]) != 32
        or not isinstance(payload[1], MembershipProof)
    ):
        return "reject"
    r_bytes, proof = payload
    com = commit(pok.serial, Randomness(r_bytes))
    if pok.root != root or not verify_membership(com, proof, root):
        return "reject"
    registry.record(pok.serial)
    return "accept"


def prove_prefix_pok(
    prefix: bytes, suffix: bytes, target: bytes
) -> PrefixPoK:
    if hash_tagged(TAG_TX, prefix, suffix) != target:
        raise CryptoError("prefix/suffix do not open the target digest")
    return PrefixPoK(
        revealed_prefix=prefix,
        target=target,
        envelope=SealedWitness((suffix,)),
    )


def verify_prefix_pok(pok: PrefixPoK, target: bytes) -> bool:
    payload = pok.envelope._payload
    if (
        not isinstance(payload, tuple)
        or len(payload) != 1
        or not isinstance(payload[0], bytes)
    ):
        return False
    (suffix,) = payload
    return (
        pok.target == target
        and hash_tagged(TAG_TX, pok.revealed_prefix, suffix) == target
    )
