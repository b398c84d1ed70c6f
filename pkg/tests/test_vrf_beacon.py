"""Tests for the leader-election lottery and the folded random beacon."""

import hashlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from betdag.vrf_beacon import (
    H_MAX,
    L_BYTES,
    BeaconState,
    EligibilityProof,
    InvalidProofError,
    NotCommittedError,
    VrfKeypair,
    VrfOutput,
    VrfRegistry,
    apply_delay,
    check_eligibility,
    commit,
    derive_pk,
    digest,
    digest_int,
    eligibility_target,
    fold_beacon,
    gen_keypair,
    lottery_draw,
    proof_of_delay,
    rotation_allowed,
    rotation_window,
    vrf_prove,
    vrf_verify,
    wins,
    xor_bytes,
)

# chi-square critical value, 15 degrees of freedom, significance 0.01
CHI2_CRIT_15_P99 = 30.5779


def _state(n_participants: int, rng: np.random.Generator, **kw) -> tuple:
    """Beacon with n participants committed long enough ago to be active."""
    state = BeaconState(r=rng.bytes(L_BYTES), rnd=0, **kw)
    registry = VrfRegistry()
    keys = []
    for pid in range(n_participants):
        kp = gen_keypair(rng)
        registry.register(kp)
        keys.append(kp)
        state = commit(state, pid, kp.pk, rnd_joined=-state.x_commit)
    return state, registry, keys


def test_digest_is_plain_sha256():
    data = b"round randomness"
    assert digest(data) == hashlib.sha256(data).digest()
    assert digest_int(data) == int.from_bytes(hashlib.sha256(data).digest(), "big")


@given(st.binary(min_size=L_BYTES, max_size=L_BYTES), st.binary(min_size=L_BYTES, max_size=L_BYTES))
def test_xor_involution(a, b):
    assert xor_bytes(xor_bytes(a, b), b) == a


def test_keypair_derivation_checked():
    rng = np.random.default_rng(0)
    kp = gen_keypair(rng)
    assert kp.pk == derive_pk(kp.sk)
    with pytest.raises(ValueError):
        VrfKeypair(sk=kp.sk, pk=bytes(L_BYTES))


def test_vrf_roundtrip_and_tamper_rejection():
    rng = np.random.default_rng(1)
    kp = gen_keypair(rng)
    registry = VrfRegistry()
    registry.register(kp)
    x = rng.bytes(L_BYTES)
    out = vrf_prove(kp.sk, x)
    assert vrf_verify(registry, kp.pk, x, out)
    bad_y = VrfOutput(y=xor_bytes(out.y, b"\x01" + bytes(L_BYTES - 1)), proof=out.proof)
    assert not vrf_verify(registry, kp.pk, x, bad_y)
    bad_proof = VrfOutput(y=out.y, proof=digest(out.proof))
    assert not vrf_verify(registry, kp.pk, x, bad_proof)
    assert not vrf_verify(registry, kp.pk, digest(x), out)
    assert not vrf_verify(registry, derive_pk(b"\x00" * L_BYTES), x, out)


def test_proof_of_delay_iterated_hash():
    r = b"\x07" * L_BYTES
    assert proof_of_delay(r, 1) == digest(r)
    assert proof_of_delay(r, 3) == digest(digest(digest(r)))
    with pytest.raises(ValueError):
        proof_of_delay(r, 0)


def test_lottery_draw_uses_delayed_randomness():
    rng = np.random.default_rng(2)
    kp = gen_keypair(rng)
    r = rng.bytes(L_BYTES)
    assert lottery_draw(kp.sk, r, 0) == vrf_prove(kp.sk, r)
    assert lottery_draw(kp.sk, r, 2) == vrf_prove(kp.sk, proof_of_delay(r, 2))


def test_target_scaling():
    assert eligibility_target(1) == H_MAX
    assert eligibility_target(4) == H_MAX // 4
    # rotation doubles the hit probability relative to a population of n+1
    assert eligibility_target(3, rotation=True) == (2 * H_MAX) // 4
    with pytest.raises(ValueError):
        eligibility_target(0)


def test_sole_participant_always_eligible():
    rng = np.random.default_rng(3)
    state, _, keys = _state(1, rng)
    for _ in range(20):
        proof = check_eligibility(state, keys[0])
        assert proof is not None
        state = BeaconState(
            r=xor_bytes(state.r, proof.y),
            rnd=state.rnd + 1,
            commitments=state.commitments,
            x_commit=state.x_commit,
        )


def test_commit_delay_boundary():
    rng = np.random.default_rng(4)
    state, _, keys = _state(1, rng, x_commit=10)
    late = gen_keypair(rng)
    state = commit(state, 1, late.pk, rnd_joined=-9)  # one round short at rnd=0
    assert state.committed_ids() == [0]
    with pytest.raises(NotCommittedError):
        check_eligibility(state, late)
    stranger = gen_keypair(rng)
    with pytest.raises(NotCommittedError):
        check_eligibility(state, stranger)
    # ten rounds later the late joiner clears the cutoff
    advanced = BeaconState(
        r=state.r, rnd=1, commitments=state.commitments, x_commit=state.x_commit
    )
    assert sorted(advanced.committed_ids()) == [0, 1]


def test_fold_updates_randomness_and_round():
    rng = np.random.default_rng(5)
    state, registry, keys = _state(1, rng)
    proof = check_eligibility(state, keys[0], redraw_depth=0)
    new = fold_beacon(state, proof, registry)
    assert new.r == xor_bytes(state.r, proof.y)
    assert new.rnd == state.rnd + 1
    assert new.delay_redraws == 0

    # a redraw at depth d folds over F^d(R)
    delayed = apply_delay(apply_delay(state))
    assert delayed.delay_redraws == 2
    assert delayed.r == proof_of_delay(state.r, 2)
    proof2 = check_eligibility(state, keys[0], redraw_depth=2)
    folded = fold_beacon(state, proof2, registry)
    assert folded.r == xor_bytes(proof_of_delay(state.r, 2), proof2.y)


def test_fold_rejects_forgeries():
    rng = np.random.default_rng(6)
    state, registry, keys = _state(1, rng)
    proof = check_eligibility(state, keys[0])
    tampered = EligibilityProof(
        participant=proof.participant,
        y=digest(proof.y),
        proof=proof.proof,
        rnd=proof.rnd,
        redraw_depth=proof.redraw_depth,
    )
    with pytest.raises(InvalidProofError):
        fold_beacon(state, tampered, registry)
    unknown = EligibilityProof(99, proof.y, proof.proof, proof.rnd, 0)
    with pytest.raises(InvalidProofError):
        fold_beacon(state, unknown, registry)


def test_proof_key_concatenates_output():
    proof = EligibilityProof(0, b"\x01" * L_BYTES, b"\x02" * L_BYTES, 5, 1)
    assert proof.proof_key() == b"\x01" * L_BYTES + b"\x02" * L_BYTES


@given(st.integers(min_value=0, max_value=H_MAX), st.integers(min_value=0, max_value=H_MAX))
def test_wins_monotone_in_target(value, target):
    out = VrfOutput(y=value.to_bytes(L_BYTES, "big"), proof=b"")
    if wins(out, target):
        assert wins(out, min(H_MAX, target + 1))


def test_beacon_uniformity_chi_square():
    """Folded randomness spreads uniformly over 16 buckets at 0.01 significance."""
    assert abs(stats.chi2.ppf(0.99, 15) - CHI2_CRIT_15_P99) < 1e-3
    rng = np.random.default_rng(7)
    state, registry, keys = _state(1, rng)
    folds = 10_000
    counts = np.zeros(16, dtype=np.int64)
    for _ in range(folds):
        proof = check_eligibility(state, keys[0])
        state = fold_beacon(state, proof, registry)
        counts[state.r[0] >> 4] += 1
    expected = folds / 16
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < CHI2_CRIT_15_P99


def test_leader_frequency_matches_flat_stake():
    """Each of n participants leads a 1/n share of rounds, within 3 sigma."""
    rng = np.random.default_rng(8)
    n = 10
    state, registry, keys = _state(n, rng)
    rounds = 4_000
    lead = np.zeros(n, dtype=np.int64)
    r = state.r
    for i in range(rounds):
        r = digest(r + i.to_bytes(4, "big"))
        trial = BeaconState(r=r, rnd=0, commitments=state.commitments)
        for pid, kp in enumerate(keys):
            if check_eligibility(trial, kp) is not None:
                lead[pid] += 1
    p = 1.0 / n
    sigma = (rounds * p * (1 - p)) ** 0.5
    assert np.all(np.abs(lead - rounds * p) < 3 * sigma)
    # mean winners per round is n * (1/n) = 1
    assert abs(lead.sum() / rounds - 1.0) < 0.1


def test_rotation_window_excludes_recent_leaders():
    rng = np.random.default_rng(9)
    state, _, _ = _state(9, rng, rotation=True)
    assert rotation_window(9) == 4
    history = [3, 5, 7, 2, 3, 1]  # most recent first
    assert not rotation_allowed(state, 3, history)
    assert not rotation_allowed(state, 2, history)
    assert rotation_allowed(state, 1, history)  # outside the window
    assert rotation_allowed(state, 8, history)
