import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpacc import crypto
from dpacc.crypto import (
    Commitment,
    CryptoError,
    MembershipProof,
    NotAMemberError,
    Randomness,
    RootKey,
    SealedWitness,
    Secret,
    SerialRegistry,
)

S1 = Secret(bytes(31) + b"\x01")
R1 = Randomness(bytes(31) + b"\x02")
R2 = Randomness(bytes(31) + b"\x03")
KEY = RootKey(bytes(range(32)))


def fixture_set(k: int) -> list[Commitment]:
    return [
        crypto.commit(Secret(bytes([i]) * 32), Randomness(bytes([i + 100]) * 32))
        for i in range(1, k + 1)
    ]


class TestCommit:
    def test_deterministic(self):
        assert crypto.commit(S1, R1) == crypto.commit(S1, R1)

    def test_golden_vector(self, golden):
        assert crypto.commit(S1, R1).value == golden("commit")

    def test_distinct_randomness(self):
        assert crypto.commit(S1, R1) != crypto.commit(S1, R2)

    def test_rejects_bad_length(self):
        with pytest.raises(CryptoError):
            Secret(b"short")
        with pytest.raises(CryptoError):
            Randomness(b"\x00" * 33)


class TestSerialAndSignatures:
    def test_derivation_deterministic(self):
        assert crypto.derive_serial(KEY) == crypto.derive_serial(KEY)

    def test_distinct_keys_distinct_serials(self):
        other = RootKey(bytes(range(1, 33)))
        assert crypto.derive_serial(KEY) != crypto.derive_serial(other)

    def test_golden_serial(self, golden):
        assert crypto.derive_serial(KEY).value == golden("serial")

    def test_golden_signature(self, golden):
        assert crypto.sign(KEY, b"dpacc golden message") == golden("signature")

    def test_sign_verify_roundtrip(self):
        sig = crypto.sign(KEY, b"hello")
        assert crypto.verify_sig(crypto.derive_serial(KEY), b"hello", sig)

    def test_wrong_serial_fails(self):
        sig = crypto.sign(KEY, b"hello")
        other = crypto.derive_serial(RootKey(bytes(range(1, 33))))
        assert not crypto.verify_sig(other, b"hello", sig)

    def test_flipped_bit_fails(self):
        sig = crypto.sign(KEY, b"hello")
        assert not crypto.verify_sig(crypto.derive_serial(KEY), b"hellp", sig)


class TestAccumulator:
    def test_singleton_root_is_leaf_hash(self, golden):
        com = crypto.commit(S1, R1)
        acc = crypto.build_accumulator([com])
        assert acc.root == crypto.hash_tagged(crypto.TAG_LEAF, com.value)
        assert acc.root == golden("merkle_root_1")

    def test_golden_eight_leaves(self, golden):
        assert crypto.build_accumulator(fixture_set(8)).root == golden(
            "merkle_root_8"
        )

    def test_order_sensitive(self):
        coms = fixture_set(8)
        permuted = coms[1:] + coms[:1]
        assert (
            crypto.build_accumulator(coms).root
            != crypto.build_accumulator(permuted).root
        )

    def test_empty_set_rejected(self):
        with pytest.raises(CryptoError):
            crypto.build_accumulator([])

    def test_padding_duplicates_last_leaf(self):
        coms = fixture_set(3)
        padded = coms + [coms[-1]]
        assert (
            crypto.build_accumulator(coms).root
            == crypto.build_accumulator(padded).root
        )


class TestMembership:
    def test_member_verifies(self):
        coms = fixture_set(8)
        acc = crypto.build_accumulator(coms)
        for com in coms:
            proof = crypto.prove_membership(com, coms)
            assert crypto.verify_membership(com, proof, acc.root)

    def test_non_member_rejected_at_prove(self):
        coms = fixture_set(8)
        outsider = crypto.commit(S1, R2)
        with pytest.raises(NotAMemberError):
            crypto.prove_membership(outsider, coms)

    def test_wrong_root_fails(self):
        coms = fixture_set(8)
        proof = crypto.prove_membership(coms[0], coms)
        wrong = crypto.build_accumulator(fixture_set(4)).root
        assert not crypto.verify_membership(coms[0], proof, wrong)

    @given(st.integers(min_value=1, max_value=256), st.randoms())
    @settings(max_examples=25, deadline=None)
    def test_completeness_random_sets(self, size, rnd):
        coms = [
            Commitment(bytes([rnd.randrange(256) for _ in range(32)]))
            for _ in range(size)
        ]
        acc = crypto.build_accumulator(coms)
        idx = rnd.randrange(size)
        proof = crypto.prove_membership(coms[idx], coms)
        assert crypto.verify_membership(coms[idx], proof, acc.root)


def honest_pok(k=4, index=0):
    serials = [Secret(bytes([i]) * 32) for i in range(1, k + 1)]
    rands = [Randomness(bytes([i + 100]) * 32) for i in range(1, k + 1)]
    coms = [crypto.commit(s, r) for s, r in zip(serials, rands)]
    pok = crypto.prove_balance_pok(rands[index], serials[index], coms)
    root = crypto.build_accumulator(coms).root
    return pok, root


class TestBalancePoK:
    def test_honest_accepts_and_reveals_serial(self):
        pok, root = honest_pok()
        assert pok.serial == Secret(b"\x01" * 32)
        assert crypto.verify_balance_pok(pok, root, SerialRegistry()) == "accept"

    def test_replay_flagged(self):
        pok, root = honest_pok()
        registry = SerialRegistry()
        assert crypto.verify_balance_pok(pok, root, registry) == "accept"
        assert crypto.verify_balance_pok(pok, root, registry) == "duplicate"

    def test_replay_detected_across_sets(self):
        registry = SerialRegistry()
        pok1, root1 = honest_pok(k=4)
        pok2, root2 = honest_pok(k=8)
        assert crypto.verify_balance_pok(pok1, root1, registry) == "accept"
        assert crypto.verify_balance_pok(pok2, root2, registry) == "duplicate"

    def test_tampered_witness_rejected(self):
        pok, root = honest_pok()
        r_bytes, proof = pok.envelope._payload
        pok.envelope._payload = (bytes(32), proof)
        assert crypto.verify_balance_pok(pok, root, SerialRegistry()) == "reject"

    def test_wrong_root_rejected(self):
        pok, _ = honest_pok(k=4)
        _, other_root = honest_pok(k=8)
        assert (
            crypto.verify_balance_pok(pok, other_root, SerialRegistry())
            == "reject"
        )

    def test_soundness_fuzz(self):
        rnd = random.Random(1234)
        rejects = 0
        trials = 1000
        for _ in range(trials):
            pok, root = honest_pok()
            r_bytes, proof = pok.envelope._payload
            mode = rnd.randrange(3)
            if mode == 0:
                bad = bytearray(r_bytes)
                bad[rnd.randrange(32)] ^= 1 + rnd.randrange(255)
                pok.envelope._payload = (bytes(bad), proof)
            elif mode == 1:
                sibs = list(proof.siblings)
                i = rnd.randrange(len(sibs))
                flip = bytearray(sibs[i])
                flip[rnd.randrange(32)] ^= 1 + rnd.randrange(255)
                sibs[i] = bytes(flip)
                pok.envelope._payload = (
                    r_bytes,
                    MembershipProof(proof.leaf_index, tuple(sibs)),
                )
            else:
                pok.envelope._payload = (rnd.randbytes(32), proof)
            if crypto.verify_balance_pok(pok, root, SerialRegistry()) == "reject":
                rejects += 1
        assert rejects == trials


class TestPrefixPoK:
    PREFIX = b"prefix-bytes"
    SUFFIX = b"hidden-suffix"

    def target(self):
        return crypto.hash_tagged(crypto.TAG_TX, self.PREFIX, self.SUFFIX)

    def test_honest_roundtrip(self):
        pok = crypto.prove_prefix_pok(self.PREFIX, self.SUFFIX, self.target())
        assert pok.revealed_prefix == self.PREFIX
        assert crypto.verify_prefix_pok(pok, self.target())

    def test_altered_prefix_fails(self):
        pok = crypto.prove_prefix_pok(self.PREFIX, self.SUFFIX, self.target())
        tampered = crypto.PrefixPoK(
            revealed_prefix=b"prefix-bytez",
            target=pok.target,
            envelope=pok.envelope,
        )
        assert not crypto.verify_prefix_pok(tampered, self.target())

    def test_wrong_target_fails(self):
        pok = crypto.prove_prefix_pok(self.PREFIX, self.SUFFIX, self.target())
        other = crypto.hash_tagged(crypto.TAG_TX, b"a", b"b")
        assert not crypto.verify_prefix_pok(pok, other)

    def test_prove_with_wrong_target_raises(self):
        with pytest.raises(CryptoError):
            crypto.prove_prefix_pok(self.PREFIX, self.SUFFIX, bytes(32))


class TestWitnessHiding:
    """The public API never returns the witness: no accessor of a balance
    proof yields r, none of a prefix proof yields the hidden suffix."""

    def reachable_values(self, obj):
        values = []
        for name in dir(obj):
            if name.startswith("_"):
                continue
            try:
                v = getattr(obj, name)
            except Exception:
                continue
            if callable(v):
                continue
            values.append(v)
        return values

    def test_balance_pok_hides_randomness(self):
        pok, _ = honest_pok()
        r_bytes = pok.envelope._payload[0]
        for v in self.reachable_values(pok) + self.reachable_values(pok.envelope):
            assert v != r_bytes
            if isinstance(v, (bytes, bytearray)):
                assert r_bytes not in bytes(v)

    def test_prefix_pok_hides_suffix(self):
        suffix = b"very-secret-suffix"
        target = crypto.hash_tagged(crypto.TAG_TX, b"p", suffix)
        pok = crypto.prove_prefix_pok(b"p", suffix, target)
        for v in self.reachable_values(pok) + self.reachable_values(pok.envelope):
            if isinstance(v, (bytes, bytearray)):
                assert suffix not in bytes(v)

    def test_sealed_witness_repr_redacts(self):
        assert "sealed" in repr(SealedWitness((b"secret",)))
