"""Decentralized checkpointing over the betting DAG.

Candidates are promoted through a two-step ladder: a block whose past holds
bets from at least ⌈2n/3⌉ distinct players on a candidate acts as a witness
(the candidate becomes *justified*); a block whose past holds the same
weight of bets on the candidate's witnesses acts as a second witness (the
candidate becomes *finalized*).  Witness-hood depends only on a block's own
past, so every flag is computed exactly once, at insertion, by merging
per-candidate bettor bitmasks along the block's references.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from .blockdag import Block, BlockDag

EVENT_CANDIDATE = "candidate"
EVENT_JUSTIFIED = "justified"
EVENT_FINALIZED = "finalized"
EVENT_WITNESS = "witness"
EVENT_SECOND_WITNESS = "second-witness"


@dataclass(frozen=True)
class FinalityEvent:
    slot: int
    rank: int
    block_id: str
    event: str


def events_to_csv(events: List[FinalityEvent]) -> str:
    lines = ["slot,rank,block_id,event"]
    lines.extend(f"{e.slot},{e.rank},{e.block_id},{e.event}" for e in events)
    return "\n".join(lines) + "\n"


class _Track:
    """Per-candidate incremental state, keyed by global block index.

    Bettor masks do not depend on the candidate's rank, so a block that
    qualifies at several ranks shares one track carrying all of them.
    """

    __slots__ = ("idx", "ranks", "bett", "wbett", "in_chain", "chain_w")

    def __init__(self, idx: int, rank: int) -> None:
        self.idx = idx
        self.ranks: Set[int] = {rank}
        self.bett: Dict[int, int] = {}      # bettor bitmask within past∪self
        self.wbett: Dict[int, int] = {}     # witness-bettor bitmask
        self.in_chain: Dict[int, bool] = {} # candidate on the block's bet chain
        self.chain_w: Dict[int, bool] = {}  # bet chain holds a witness


class FinalityState:
    """Mutable checkpointing state driven by block insertions.

    By default only candidates within ``retire_depth`` ranks of the newest
    one stay actively tracked; older ones cannot gather fresh two-thirds
    majorities in the runs this library targets, and retiring them keeps
    updates O(active candidates).  Pass ``retire_depth=None`` to track
    every candidate forever.
    """

    def __init__(self, n: int, window: int = 6, players=None, retire_depth: Optional[int] = 2) -> None:
        if players is not None:
            self.player_set: Set[int] = set(players)
        else:
            self.player_set = set(range(n))
        self.window = window
        self.retire_depth = retire_depth
        self.rank = 1
        self.candidates: Dict[int, Set[str]] = {}
        self.justified: Set[str] = set()
        self.finalized: Set[str] = set()
        self.witnesses: Dict[str, Set[str]] = {}
        self.second_witnesses: Dict[str, Set[str]] = {}
        self.witness_ids: Set[str] = set()
        self.second_witness_ids: Set[str] = set()
        self.events: List[FinalityEvent] = []
        self.reconfiguring = False
        self._countdown = 0
        self._pending_joins: Set[int] = set()
        self._pending_leaves: Set[int] = set()
        self._tracks: Dict[int, _Track] = {}
        self._sw_depths: Dict[int, Dict[int, Tuple[int, ...]]] = {}
        self._finalized_by_rank: Dict[int, List[int]] = {}
        self._sw_records: List[Tuple[int, str, FrozenSet[str]]] = []

    @property
    def threshold(self) -> int:
        n = len(self.player_set)
        return (2 * n + 2) // 3  # ⌈2n/3⌉

    def _emit(self, slot: int, rank: int, block_id: str, event: str) -> None:
        self.events.append(FinalityEvent(slot, rank, block_id, event))

    # ------------------------------------------------------------------

    def _make_candidate(self, dag: BlockDag, i: int, rank: int, slot: int) -> None:
        bid = dag.block_at(i).id
        track = self._tracks.get(i)
        if track is not None and rank in track.ranks:
            return
        self.candidates.setdefault(rank, set()).add(bid)
        self.rank = max(self.rank, rank)
        self._emit(slot, rank, bid, EVENT_CANDIDATE)
        if track is not None:
            track.ranks.add(rank)
            return
        track = _Track(i, rank)
        self._tracks[i] = track
        sender = dag.sender_of(i)
        bett = 1 << sender if sender >= 0 else 0
        track.bett[i] = bett
        track.in_chain[i] = True
        is_w = bett.bit_count() >= self.threshold
        track.chain_w[i] = is_w
        track.wbett[i] = bett if is_w else 0

    def update(self, dag: BlockDag, block: Block, slot: Optional[int] = None) -> "FinalityState":
        """Fold one freshly inserted block into the checkpointing state."""
        if block.prev is None:
            return self
        i = dag.index_of(block.id)
        if slot is None:
            slot = i
        prev_i = dag.prev_of(i)
        refs = dag.refs_of(i)
        depth = dag.depth_of(i)
        sender = dag.sender_of(i)
        sbit = 1 << sender if sender >= 0 else 0
        thr = self.threshold

        new_sw_cands: List[str] = []
        new_sw_ranks: Set[int] = set()
        for track in self._tracks.values():
            in_chain = track.in_chain.get(prev_i, False)
            bett = 0
            wbett = 0
            for r in refs:
                bett |= track.bett.get(r, 0)
                wbett |= track.wbett.get(r, 0)
            if in_chain:
                bett |= sbit
            is_w = bett.bit_count() >= thr
            chain_w = is_w or track.chain_w.get(prev_i, False)
            if chain_w:
                wbett |= sbit
            is_sw = wbett.bit_count() >= thr
            track.bett[i] = bett
            track.wbett[i] = wbett
            track.in_chain[i] = in_chain
            track.chain_w[i] = chain_w
            cid = dag.block_at(track.idx).id
            if is_w:
                self.witnesses.setdefault(cid, set()).add(block.id)
                self.witness_ids.add(block.id)
                if cid not in self.justified:
                    self.justified.add(cid)
                    for rk in sorted(track.ranks):
                        self._emit(slot, rk, block.id, EVENT_WITNESS)
                        self._emit(slot, rk, cid, EVENT_JUSTIFIED)
            if is_sw:
                self.second_witnesses.setdefault(cid, set()).add(block.id)
                self.second_witness_ids.add(block.id)
                new_sw_cands.append(cid)
                new_sw_ranks.update(track.ranks)
                if cid not in self.finalized:
                    self.finalized.add(cid)
                    for rk in sorted(track.ranks):
                        self._finalized_by_rank.setdefault(rk, []).append(track.idx)
                        self._emit(slot, rk, block.id, EVENT_SECOND_WITNESS)
                        self._emit(slot, rk, cid, EVENT_FINALIZED)

        if new_sw_cands:
            self._sw_records.append((i, block.id, frozenset(new_sw_cands)))

        # first-rank candidates: the direct children of genesis
        if depth == 1:
            self._make_candidate(dag, i, 1, slot)

        # rank progression: betting on a rank-rk second witness at the
        # configured chain distance opens candidacy for rank rk+1
        for rk in set(self._sw_depths) | new_sw_ranks:
            per_block = self._sw_depths.setdefault(rk, {})
            inherited = per_block.get(prev_i, ())
            mine = inherited + (depth,) if rk in new_sw_ranks else inherited
            if mine:
                per_block[i] = mine
            if self.window == 0:
                if rk in new_sw_ranks:
                    self._make_candidate(dag, i, rk + 1, slot)
            elif (depth - self.window) in inherited:
                self._make_candidate(dag, i, rk + 1, slot)

        self._advance_reconfiguration()
        self._retire()
        return self

    def _retire(self) -> None:
        if self.retire_depth is None:
            return
        horizon = self.rank - self.retire_depth
        for idx in [i for i, t in self._tracks.items() if max(t.ranks) <= horizon]:
            del self._tracks[idx]
        for rk in [r for r in self._sw_depths if r <= horizon]:
            del self._sw_depths[rk]

    # ------------------------------------------------------------------
    # reconfiguration window

    def begin_reconfiguration(self) -> "FinalityState":
        if not self.second_witness_ids:
            raise ValueError("reconfiguration requires a finalized block")
        self.reconfiguring = True
        self._countdown = self.window
        if self._countdown == 0:
            self._apply_membership()
        return self

    def request_join(self, pid: int) -> bool:
        if not self.reconfiguring:
            return False
        self._pending_joins.add(pid)
        return True

    def request_leave(self, pid: int) -> bool:
        if not self.reconfiguring:
            return False
        self._pending_leaves.add(pid)
        return True

    def _advance_reconfiguration(self) -> None:
        if not self.reconfiguring:
            return
        self._countdown -= 1
        if self._countdown <= 0:
            self._apply_membership()

    def _apply_membership(self) -> None:
        self.player_set = (self.player_set - self._pending_leaves) | self._pending_joins
        self._pending_joins.clear()
        self._pending_leaves.clear()
        self.reconfiguring = False

    # ------------------------------------------------------------------
    # queries

    def latest_second_witness(
        self, known: Optional[np.ndarray] = None
    ) -> Optional[Tuple[str, FrozenSet[str]]]:
        """Newest second witness (optionally restricted to a known-mask) and
        the candidates it finalizes — the bettor's long-range guard."""
        for idx, bid, cands in reversed(self._sw_records):
            if known is None or (idx < len(known) and known[idx]):
                return bid, cands
        return None

    def violations(self, dag: BlockDag) -> int:
        """Finalized same-rank candidate pairs that are mutually unordered."""
        count = 0
        for idxs in self._finalized_by_rank.values():
            for a_pos in range(len(idxs)):
                for b_pos in range(a_pos + 1, len(idxs)):
                    a, b = idxs[a_pos], idxs[b_pos]
                    if not (dag.past_row(a)[b] or dag.past_row(b)[a]):
                        count += 1
        return count


def update_finality(state: FinalityState, dag: BlockDag, block: Block, slot=None) -> FinalityState:
    return state.update(dag, block, slot)


def begin_reconfiguration(state: FinalityState) -> FinalityState:
    return state.begin_reconfiguration()
