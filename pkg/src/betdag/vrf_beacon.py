"""Leader-election lottery: VRF keys, the evolving random beacon, eligibility.

A participant wins the right to bet on a tip when the hash of their VRF
output over the tip's beacon value falls below a population-scaled target.
The beacon folds each winning output back into itself (XOR), and a slow
"delay" function provides a fallback re-draw when no one wins a round.

The VRF here is simulation-grade: y = digest(sk || x), pk = digest(sk), and
verification goes through a registry oracle owned by the test/simulation
environment (never by agent-visible state). The interface is shaped so a
real VRF could be swapped in without touching callers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

L_BITS = 256
L_BYTES = L_BITS // 8
H_MAX = 2**L_BITS - 1

_PROOF_TAG = b"elig-proof-v1"
_KEY_TAG = b"pubkey-v1"


def digest(data: bytes) -> bytes:
    """The one protocol hash (SHA-256) used for H, key derivation and F."""
    return hashlib.sha256(data).digest()


def digest_int(data: bytes) -> int:
    return int.from_bytes(digest(data), "big")


def xor_bytes(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(
        max(len(a), len(b)), "big"
    )


class NotCommittedError(Exception):
    """Participant absent from the beacon state or committed too recently."""


class InvalidProofError(Exception):
    """Eligibility proof failed verification against the beacon state."""


@dataclass(frozen=True)
class VrfKeypair:
    sk: bytes
    pk: bytes

    def __post_init__(self) -> None:
        if self.pk != derive_pk(self.sk):
            raise ValueError("pk does not match sk")


def derive_pk(sk: bytes) -> bytes:
    return digest(_KEY_TAG + sk)


def gen_keypair(rng) -> VrfKeypair:
    """Draw a keypair from a seeded generator (numpy Generator or similar)."""
    sk = rng.bytes(L_BYTES)
    return VrfKeypair(sk=sk, pk=derive_pk(sk))


@dataclass(frozen=True)
class VrfOutput:
    y: bytes
    proof: bytes


def vrf_prove(sk: bytes, x: bytes) -> VrfOutput:
    """Deterministic keyed evaluation: same (sk, x) always gives same output."""
    y = digest(sk + x)
    proof = digest(_PROOF_TAG + sk + x)
    return VrfOutput(y=y, proof=proof)


class VrfRegistry:
    """Verification oracle for the simulated VRF.

    Holds pk -> sk so that Verify can recompute the unique valid y. Lives in
    the simulation environment; agents never read it.
    """

    def __init__(self) -> None:
        self._sk_by_pk: Dict[bytes, bytes] = {}

    def register(self, kp: VrfKeypair) -> None:
        self._sk_by_pk[kp.pk] = kp.sk

    def knows(self, pk: bytes) -> bool:
        return pk in self._sk_by_pk

    def verify(self, pk: bytes, x: bytes, out: VrfOutput) -> bool:
        sk = self._sk_by_pk.get(pk)
        if sk is None:
            return False
        expected = vrf_prove(sk, x)
        return out.y == expected.y and out.proof == expected.proof


def vrf_verify(registry: VrfRegistry, pk: bytes, x: bytes, out: VrfOutput) -> bool:
    return registry.verify(pk, x, out)


def proof_of_delay(r: bytes, p_iters: int) -> bytes:
    """F = H^p: the protocol hash iterated p times. Verification = recomputation."""
    if p_iters < 1:
        raise ValueError("p_iters must be >= 1")
    out = r
    for _ in range(p_iters):
        out = digest(out)
    return out


@dataclass(frozen=True)
class EligibilityProof:
    participant: int
    y: bytes
    proof: bytes
    rnd: int
    redraw_depth: int = 0

    def proof_key(self) -> bytes:
        """Identity of the underlying lottery win, for double detection."""
        return self.y + self.proof


@dataclass(frozen=True)
class BeaconState:
    """Per-round lottery state: randomness, committed participants, target."""

    r: bytes
    rnd: int = 0
    commitments: Dict[int, Tuple[bytes, int]] = field(default_factory=dict)
    x_commit: int = 10
    rotation: bool = False
    delay_redraws: int = 0

    def committed_ids(self) -> List[int]:
        """Participants past the commit delay, eligible for this round."""
        cutoff = self.rnd - self.x_commit
        return [pid for pid, (_, joined) in self.commitments.items() if joined <= cutoff]

    @property
    def n_rnd(self) -> int:
        return len(self.committed_ids())

    @property
    def target(self) -> int:
        n = self.n_rnd
        if n < 1:
            raise ValueError("no committed participants")
        if self.rotation:
            # population halves on average under the rotation window
            return (2 * H_MAX) // (n + 1)
        return H_MAX // n


def commit(state: BeaconState, participant: int, pk: bytes, rnd_joined: int) -> BeaconState:
    new = dict(state.commitments)
    new[participant] = (pk, rnd_joined)
    return replace(state, commitments=new)


def eligibility_target(n: int, rotation: bool = False) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    if rotation:
        return (2 * H_MAX) // (n + 1)
    return H_MAX // n


def lottery_draw(sk: bytes, r: bytes, redraw_depth: int = 0) -> VrfOutput:
    """Evaluate the VRF over the (possibly re-drawn) beacon value."""
    x = r if redraw_depth == 0 else proof_of_delay(r, redraw_depth)
    return vrf_prove(sk, x)


def wins(out: VrfOutput, target: int) -> bool:
    return digest_int(out.y) < target


def check_eligibility(
    state: BeaconState, kp: VrfKeypair, redraw_depth: int = 0
) -> Optional[EligibilityProof]:
    """Return a proof iff H(y) < target for y drawn over F^depth(R_rnd).

    Raises NotCommittedError when the keypair's owner is absent from the
    commitment set or joined fewer than x_commit rounds ago.
    """
    participant = None
    cutoff = state.rnd - state.x_commit
    for pid, (pk, joined) in state.commitments.items():
        if pk == kp.pk:
            if joined > cutoff:
                raise NotCommittedError(
                    f"participant {pid} joined round {joined}, too recent for round {state.rnd}"
                )
            participant = pid
            break
    if participant is None:
        raise NotCommittedError("keypair not committed to this beacon")
    out = lottery_draw(kp.sk, state.r, redraw_depth)
    if not wins(out, state.target):
        return None
    return EligibilityProof(
        participant=participant,
        y=out.y,
        proof=out.proof,
        rnd=state.rnd,
        redraw_depth=redraw_depth,
    )


def fold_beacon(
    state: BeaconState, proof: EligibilityProof, registry: VrfRegistry
) -> BeaconState:
    """Advance the beacon: R' = F^depth(R) xor y, round counter +1."""
    pk_entry = state.commitments.get(proof.participant)
    if pk_entry is None:
        raise InvalidProofError("unknown participant")
    pk, _ = pk_entry
    x = state.r if proof.redraw_depth == 0 else proof_of_delay(state.r, proof.redraw_depth)
    out = VrfOutput(y=proof.y, proof=proof.proof)
    if not registry.verify(pk, x, out):
        raise InvalidProofError("VRF verification failed")
    if not wins(out, state.target):
        raise InvalidProofError("output does not meet the eligibility target")
    return replace(
        state,
        r=xor_bytes(x, proof.y),
        rnd=state.rnd + 1,
        delay_redraws=0,
    )


def apply_delay(state: BeaconState) -> BeaconState:
    """No leader revealed in time: re-draw the round's randomness via F."""
    return replace(state, r=proof_of_delay(state.r, 1), delay_redraws=state.delay_redraws + 1)


def rotation_window(n_rnd: int) -> int:
    return (n_rnd - 1) // 2


def rotation_allowed(state: BeaconState, participant: int, history: List[int]) -> bool:
    """Reject a win when the participant led within the rotation window.

    `history` lists recent leaders, most recent first.
    """
    window = rotation_window(state.n_rnd)
    return participant not in history[:window]
