"""Consensus rules: chain scoring, fork choice, block validity, betting, labelling.

A chain's strength is the number of edges in the subgraph induced by the
tip's past together with the tip itself, minus any double-spent proofs.
Because the past is closed under references, that count can be maintained
incrementally; the functions below fall back to an exact recount whenever
doubles are present.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .blockdag import Block, BlockDag, make_block
from .vrf_beacon import (
    EligibilityProof,
    VrfOutput,
    VrfRegistry,
    eligibility_target,
    lottery_draw,
    proof_of_delay,
    wins,
    xor_bytes,
)

WINNER = "winner"
LOSER = "loser"
NEUTRAL = "neutral"

FCR_MISMATCH = "FCR_MISMATCH"
INELIGIBLE = "INELIGIBLE"
WITNESS_RULE = "WITNESS_RULE"
SECOND_WITNESS_RULE = "SECOND_WITNESS_RULE"


@dataclass(frozen=True)
class Score:
    """Chain strength of a leaf: induced edge count plus a hash tie-break."""

    value: int
    tiebreak: int

    def key(self) -> Tuple[int, int]:
        """Sort key; smaller is better (ties go to the smaller hash)."""
        return (-self.value, self.tiebreak)


@dataclass
class LabelMap:
    labels: Dict[str, str]
    blue: Set[str]

    def winners(self) -> Set[str]:
        return {bid for bid, lab in self.labels.items() if lab == WINNER}

    def to_csv(self, dag: BlockDag) -> str:
        lines = ["block_id,label"]
        lines.extend(f"{blk.id},{self.labels[blk.id]}" for blk in dag.blocks())
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProtocolEnv:
    """Verification context: who may bet, and how hard the lottery is."""

    registry: VrfRegistry
    pk_of: Dict[int, bytes]
    n: int
    rotation: bool = False

    @property
    def target(self) -> int:
        return eligibility_target(self.n, self.rotation)


@dataclass(frozen=True)
class BetResult:
    """Outcome of one betting attempt; ``alarm`` flags a checkpoint mismatch."""

    block: Optional[Block]
    alarm: bool = False


# ---------------------------------------------------------------------------
# scoring and fork choice


def _exact_score_value(dag: BlockDag, mask: np.ndarray) -> int:
    total = 0
    for j in np.flatnonzero(mask):
        total += sum(1 for r in dag.refs_of(int(j)) if mask[r])
    return total


def score(dag: BlockDag, block_id: str) -> Score:
    i = dag.index_of(block_id)
    if not dag.has_doubles():
        return Score(dag.base_score_of(i), dag.tiebreak_of(i))
    mask = dag.past_row(i).copy()
    mask[i] = True
    mask &= ~dag.double_mask()
    return Score(_exact_score_value(dag, mask), dag.tiebreak_of(i))


def _score_at(dag: BlockDag, i: int, exact: bool) -> Score:
    if not exact:
        return Score(dag.base_score_of(i), dag.tiebreak_of(i))
    mask = dag.past_row(i).copy()
    mask[i] = True
    mask &= ~dag.double_mask()
    return Score(_exact_score_value(dag, mask), dag.tiebreak_of(i))


def best_tip(dag: BlockDag, leaf_indices: Iterable[int]) -> int:
    """Index of the strongest tip among the given leaves.

    Ties go to the smaller hash; the block id is a last-resort tie-break,
    reachable only when two Doubles of one proof are both leaves.
    """
    exact = dag.has_doubles()
    best_i = -1
    best_key: Optional[Tuple[int, int, str]] = None
    for i in leaf_indices:
        key = (*_score_at(dag, i, exact).key(), dag.block_at(i).id)
        if best_key is None or key < best_key:
            best_key, best_i = key, i
    if best_i < 0:
        raise ValueError("no leaves supplied")
    return best_i


def fcr(dag: BlockDag, literal: bool = False) -> str:
    """Fork-choice rule: the leaf with the strongest chain, smallest hash on ties.

    ``literal`` switches to weighting each leaf by its own reference count
    alone; kept for comparison, not used by the protocol default.
    """
    if len(dag) == 1:
        return dag.genesis.id
    if literal:
        best_i, best_key = -1, None
        for i in dag.leaf_indices():
            key = (-len(dag.block_at(i).leaves), dag.tiebreak_of(i), dag.block_at(i).id)
            if best_key is None or key < best_key:
                best_key, best_i = key, i
        return dag.block_at(best_i).id
    return dag.block_at(best_tip(dag, dag.leaf_indices())).id


# ---------------------------------------------------------------------------
# block validity


def _past_mask_of_refs(dag: BlockDag, ref_ids: Sequence[str]) -> np.ndarray:
    mask = np.zeros(len(dag), dtype=bool)
    for rid in ref_ids:
        j = dag.index_of(rid)
        mask |= dag.past_row(j)
        mask[j] = True
    return mask


def _fcr_over_mask(dag: BlockDag, mask: np.ndarray) -> int:
    """Fork choice restricted to the sub-DAG covered by ``mask``."""
    covered = np.zeros(len(dag), dtype=bool)
    idxs = np.flatnonzero(mask)
    for j in idxs:
        for r in dag.refs_of(int(j)):
            covered[r] = True
    sub_leaves = [int(j) for j in idxs if not covered[j]]
    if len(idxs) == 1:
        return int(idxs[0])
    exact = dag.has_doubles()
    best_i, best_key = -1, None
    for i in sub_leaves:
        key = (*_score_at(dag, i, exact).key(), dag.block_at(i).id)
        if best_key is None or key < best_key:
            best_key, best_i = key, i
    return best_i


def check_proof(dag: BlockDag, block: Block, env: ProtocolEnv) -> bool:
    """Verify the eligibility proof against the bet target's beacon value."""
    p = block.proof
    if p is None or block.prev is None:
        return False
    pk = env.pk_of.get(p.participant)
    if pk is None or block.sender != p.participant:
        return False
    prev_i = dag.index_of(block.prev)
    if p.rnd != dag.depth_of(prev_i) + 1:
        return False
    prev_beacon = dag.block_at(prev_i).beacon
    x = prev_beacon if p.redraw_depth == 0 else proof_of_delay(prev_beacon, p.redraw_depth)
    out = VrfOutput(y=p.y, proof=p.proof)
    if not env.registry.verify(pk, x, out):
        return False
    if not wins(out, env.target):
        return False
    return block.beacon == xor_bytes(x, p.y)


def verify_block(
    dag: BlockDag,
    block: Block,
    env: Optional[ProtocolEnv] = None,
    witness_ids: Optional[Set[str]] = None,
    second_witness_ids: Optional[Set[str]] = None,
) -> Optional[str]:
    """Return None if the block is acceptable, else a violation code.

    Checks, in order: the bet matches the fork choice over the block's own
    past; the eligibility proof verifies against the bet target's beacon
    (skipped when ``env`` is None); referencing a witness requires betting
    on one; referencing a second witness requires betting into its past.
    """
    assert block.prev is not None, "genesis is not subject to verification"
    mask = _past_mask_of_refs(dag, [block.prev, *block.leaves])
    want = _fcr_over_mask(dag, mask)
    if dag.block_at(want).id != block.prev:
        return FCR_MISMATCH
    if env is not None and not check_proof(dag, block, env):
        return INELIGIBLE
    if witness_ids:
        prev_i = dag.index_of(block.prev)
        chain_ids = {block.prev} | {
            dag.block_at(j).id for j in np.flatnonzero(dag.anc_row(prev_i))
        }
        past_ids = {dag.block_at(int(j)).id for j in np.flatnonzero(mask)}
        if witness_ids & past_ids and not (witness_ids & chain_ids):
            return WITNESS_RULE
        if second_witness_ids:
            for sw in second_witness_ids & past_ids:
                if not (chain_ids & (dag.past(sw) | {sw})):
                    return SECOND_WITNESS_RULE
    return None


# ---------------------------------------------------------------------------
# betting


def make_bet(
    dag: BlockDag,
    sk: bytes,
    participant: int,
    env: ProtocolEnv,
    redraw_depth: int = 0,
    guard_candidates: Optional[Set[str]] = None,
    txset: bytes = b"",
) -> BetResult:
    """Bet on the fork-choice tip, referencing every other known leaf.

    ``guard_candidates`` carries the candidate blocks associated with the
    bettor's latest second witness; when none of them sits on the chosen
    chain the bettor refuses to bet and raises the alarm instead, which is
    the defence against long-range rewrites.
    """
    tip_id = fcr(dag)
    if guard_candidates:
        if not (guard_candidates & dag.chain(tip_id)):
            return BetResult(None, alarm=True)
    tip_i = dag.index_of(tip_id)
    tip = dag.block_at(tip_i)
    draw = lottery_draw(sk, tip.beacon, redraw_depth)
    if not wins(draw, env.target):
        return BetResult(None)
    proof = EligibilityProof(
        participant=participant,
        y=draw.y,
        proof=draw.proof,
        rnd=dag.depth_of(tip_i) + 1,
        redraw_depth=redraw_depth,
    )
    x = tip.beacon if redraw_depth == 0 else proof_of_delay(tip.beacon, redraw_depth)
    beacon = xor_bytes(x, draw.y)
    leaves = sorted(dag.leaves() - {tip_id})
    block = make_block(tip_id, leaves, participant, proof, beacon, txset)
    return BetResult(block)


# ---------------------------------------------------------------------------
# labelling


def label(dag: BlockDag, k: int, literal: bool = False) -> LabelMap:
    """Partition every block into winner / neutral / loser.

    The fork-choice chain wins; blocks betting on or referencing a winner
    directly are neutral; every remaining block is neutral while its
    anticone overlaps the blue set in at most ``k`` blocks, processed in
    canonical (depth, id) order so the outcome is independent of
    insertion order.
    """
    n = len(dag)
    tip_i = dag.index_of(fcr(dag, literal))
    winner_mask = dag.anc_row(tip_i).copy()
    winner_mask[tip_i] = True
    labels: Dict[str, str] = {}
    blue = winner_mask.copy()
    for j in np.flatnonzero(winner_mask):
        labels[dag.block_at(int(j)).id] = WINNER
    for j in np.flatnonzero(winner_mask):
        for ch in dag.children_of(int(j)):
            if not blue[ch]:
                blue[ch] = True
                labels[dag.block_at(ch).id] = NEUTRAL
    pending = sorted(
        (int(j) for j in range(n) if not blue[j]),
        key=lambda j: (dag.depth_of(j), dag.block_at(j).id),
    )
    for j in pending:
        cone = dag.past_row(j) | dag.past_col(j)
        overlap = int(np.count_nonzero(blue & ~cone)) - int(blue[j])
        if overlap <= k:
            blue[j] = True
            labels[dag.block_at(j).id] = NEUTRAL
        else:
            labels[dag.block_at(j).id] = LOSER
    blue_ids = {dag.block_at(int(j)).id for j in np.flatnonzero(blue)}
    return LabelMap(labels=labels, blue=blue_ids)
