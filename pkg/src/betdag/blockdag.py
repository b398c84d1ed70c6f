"""Append-only directed acyclic graph of bet blocks.

Each block carries one parent bet edge (``prev``) and a list of extra leaf
references.  The structure maintains dense reachability masks so that the
relation queries used by the consensus rules (past, ancestors, anticone,
direct future, distance) stay cheap even when a simulation inserts thousands
of blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from .vrf_beacon import EligibilityProof, digest, digest_int

GENESIS_SENDER = -1

_BLOCK_TAG = b"blk-v1"


def _enc(part: bytes) -> bytes:
    """Length-prefix a byte string so concatenations cannot collide."""
    return len(part).to_bytes(4, "big") + part


@dataclass(frozen=True)
class Block:
    """A single bet block; ``id`` is the digest of the canonical encoding."""

    id: str
    prev: Optional[str]
    leaves: Tuple[str, ...]
    sender: int
    proof: Optional[EligibilityProof]
    beacon: bytes
    txset: bytes = b""

    def proof_key(self) -> Optional[bytes]:
        return self.proof.proof_key() if self.proof is not None else None


def _block_id(
    prev: Optional[str],
    leaves: Tuple[str, ...],
    sender: int,
    proof: Optional[EligibilityProof],
    beacon: bytes,
    txset: bytes,
) -> str:
    parts = [
        _BLOCK_TAG,
        _enc(prev.encode() if prev is not None else b""),
        _enc(b",".join(l.encode() for l in leaves)),
        _enc(sender.to_bytes(8, "big", signed=True)),
        _enc(proof.proof_key() if proof is not None else b""),
        _enc(beacon),
        _enc(txset),
    ]
    return digest(b"".join(parts)).hex()


def make_block(
    prev: str,
    leaves: Iterable[str],
    sender: int,
    proof: EligibilityProof,
    beacon: bytes,
    txset: bytes = b"",
) -> Block:
    """Build a block, normalising references.

    The parent is stripped from the leaf list and duplicate references are
    dropped while preserving order, so ``leaves`` always holds only the
    *extra* references beyond the bet edge.
    """
    seen: Set[str] = {prev}
    norm: List[str] = []
    for leaf in leaves:
        if leaf not in seen:
            seen.add(leaf)
            norm.append(leaf)
    tup = tuple(norm)
    bid = _block_id(prev, tup, sender, proof, beacon, txset)
    return Block(bid, prev, tup, sender, proof, beacon, txset)


def make_genesis(beacon: bytes, txset: bytes = b"genesis") -> Block:
    bid = _block_id(None, (), GENESIS_SENDER, None, beacon, txset)
    return Block(bid, None, (), GENESIS_SENDER, None, beacon, txset)


class BlockDag:
    """Insertion-ordered blockDAG with dense reachability bookkeeping.

    Rows of the internal boolean matrices are indexed by insertion order:
    ``_past[i]`` marks every block reachable from block ``i`` through any
    edge, ``_anc[i]`` marks the parent chain only.  Both exclude ``i``
    itself.  Blocks can only reference already-inserted blocks, which rules
    out cycles by construction.
    """

    def __init__(self, capacity: int = 64) -> None:
        cap = max(8, capacity)
        self._blocks: List[Block] = []
        self._index: Dict[str, int] = {}
        self._past = np.zeros((cap, cap), dtype=bool)
        self._anc = np.zeros((cap, cap), dtype=bool)
        self._prev = np.full(cap, -1, dtype=np.int32)
        self._depth = np.zeros(cap, dtype=np.int32)
        self._outdeg = np.zeros(cap, dtype=np.int32)
        self._base_score = np.zeros(cap, dtype=np.int64)
        self._sender = np.zeros(cap, dtype=np.int32)
        self._double = np.zeros(cap, dtype=bool)
        self._is_leaf = np.zeros(cap, dtype=bool)
        self._refs: List[Tuple[int, ...]] = []
        self._leaf_children: List[List[int]] = []
        self._children: List[List[int]] = []
        self._tiebreak: List[int] = []
        self._proof_first: Dict[bytes, int] = {}

    # ------------------------------------------------------------------
    # basic container behaviour

    def __len__(self) -> int:
        return len(self._blocks)

    def __contains__(self, block_id: str) -> bool:
        return block_id in self._index

    def blocks(self) -> Iterator[Block]:
        """Iterate blocks in insertion order."""
        return iter(self._blocks)

    def get(self, block_id: str) -> Block:
        return self._blocks[self._index[block_id]]

    def index_of(self, block_id: str) -> int:
        return self._index[block_id]

    def block_at(self, i: int) -> Block:
        return self._blocks[i]

    @property
    def genesis(self) -> Block:
        if not self._blocks:
            raise ValueError("empty DAG has no genesis")
        return self._blocks[0]

    # ------------------------------------------------------------------
    # growth

    def _grow(self) -> None:
        old = self._past.shape[0]
        cap = old * 2
        for name in ("_past", "_anc"):
            mat = getattr(self, name)
            new = np.zeros((cap, cap), dtype=bool)
            new[:old, :old] = mat
            setattr(self, name, new)
        self._prev = np.concatenate([self._prev, np.full(old, -1, dtype=np.int32)])
        for name in ("_depth", "_outdeg", "_base_score", "_sender"):
            arr = getattr(self, name)
            setattr(self, name, np.concatenate([arr, np.zeros(old, dtype=arr.dtype)]))
        for name in ("_double", "_is_leaf"):
            arr = getattr(self, name)
            setattr(self, name, np.concatenate([arr, np.zeros(old, dtype=bool)]))

    def insert(self, block: Block) -> int:
        """Insert a block whose references all resolve; returns its index."""
        if block.id in self._index:
            raise ValueError(f"duplicate block {block.id[:12]}")
        if block.prev is None:
            if self._blocks:
                raise ValueError("second genesis rejected")
            ref_ids: List[str] = []
        else:
            if not self._blocks:
                raise KeyError(f"missing reference {block.prev[:12]}")
            ref_ids = [block.prev, *block.leaves]
        for ref in ref_ids:
            if ref not in self._index:
                raise KeyError(f"missing reference {ref[:12]}")

        i = len(self._blocks)
        if i >= self._past.shape[0]:
            self._grow()
        refs = tuple(self._index[r] for r in ref_ids)
        self._blocks.append(block)
        self._index[block.id] = i
        self._refs.append(refs)
        self._leaf_children.append([])
        self._children.append([])

        row = self._past[i]
        for r in refs:
            row |= self._past[r]
            row[r] = True
            self._children[r].append(i)
        if block.prev is not None:
            p = self._index[block.prev]
            self._prev[i] = p
            self._anc[i] |= self._anc[p]
            self._anc[i, p] = True
            self._depth[i] = self._depth[p] + 1
            for r in refs[1:]:
                self._leaf_children[r].append(i)

        self._outdeg[i] = len(refs)
        self._base_score[i] = self._outdeg[i] + int(
            np.dot(row[:i], self._outdeg[:i])
        )
        self._sender[i] = block.sender
        if block.proof is not None:
            self._tiebreak.append(digest_int(block.proof.y))
        else:
            self._tiebreak.append(digest_int(bytes.fromhex(block.id)))

        self._is_leaf[i] = True
        for r in refs:
            self._is_leaf[r] = False

        key = block.proof_key()
        if key is not None:
            first = self._proof_first.setdefault(key, i)
            if first != i:
                self._double[first] = True
                self._double[i] = True
        return i

    # ------------------------------------------------------------------
    # relation queries (public API, id-based)

    def _ids(self, mask: np.ndarray) -> Set[str]:
        return {self._blocks[j].id for j in np.flatnonzero(mask)}

    def ancestors(self, block_id: str) -> Set[str]:
        """Parent-chain closure of a block, excluding the block itself."""
        i = self._index[block_id]
        return self._ids(self._anc[i, : len(self._blocks)])

    def past(self, block_id: str) -> Set[str]:
        """Every block reachable through any edge, excluding the block."""
        i = self._index[block_id]
        return self._ids(self._past[i, : len(self._blocks)])

    def future(self, block_id: str) -> Set[str]:
        """Every block that reaches this one, excluding the block."""
        i = self._index[block_id]
        n = len(self._blocks)
        return self._ids(self._past[:n, i])

    def anticone(self, block_id: str) -> Set[str]:
        """Blocks neither reachable from nor reaching the given block."""
        i = self._index[block_id]
        n = len(self._blocks)
        mask = ~(self._past[i, :n] | self._past[:n, i])
        mask[i] = False
        return self._ids(mask)

    def direct_future(self, block_id: str) -> Set[str]:
        """Blocks holding a *leaf* reference to this block (bets excluded)."""
        i = self._index[block_id]
        return {self._blocks[j].id for j in self._leaf_children[i]}

    def leaves(self) -> Set[str]:
        """Blocks with no incoming edge of either kind."""
        n = len(self._blocks)
        return self._ids(self._is_leaf[:n])

    def leaf_indices(self) -> List[int]:
        return [int(j) for j in np.flatnonzero(self._is_leaf[: len(self._blocks)])]

    def chain(self, block_id: str) -> Set[str]:
        """The block together with its parent-chain closure."""
        return {block_id} | self.ancestors(block_id)

    def distance(self, a: str, b: str) -> int:
        """Length of the shortest directed path between comparable blocks."""
        if a == b:
            return 0
        ia, ib = self._index[a], self._index[b]
        if self._past[ia, ib]:
            start, goal = ia, ib
        elif self._past[ib, ia]:
            start, goal = ib, ia
        else:
            raise ValueError(f"blocks {a[:12]} and {b[:12]} are incomparable")
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt: List[int] = []
            for u in frontier:
                for v in self._refs[u]:
                    if v == goal:
                        return dist[u] + 1
                    if v not in dist and self._past[v, goal]:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        raise AssertionError("reachability mask and edge walk disagree")

    def detect_double(self, block_id: str) -> Set[str]:
        """Other blocks spending the same eligibility proof."""
        blk = self.get(block_id)
        key = blk.proof_key()
        if key is None:
            return set()
        return {
            other.id
            for other in self._blocks
            if other.id != block_id and other.proof_key() == key
        }

    def double_set(self) -> Set[str]:
        """All blocks that share an eligibility proof with a different block."""
        n = len(self._blocks)
        return self._ids(self._double[:n])

    # ------------------------------------------------------------------
    # low-level accessors used by the rules/finality/simulation layers;
    # returned arrays are live views and must not be mutated

    def past_row(self, i: int) -> np.ndarray:
        return self._past[i, : len(self._blocks)]

    def past_col(self, i: int) -> np.ndarray:
        return self._past[: len(self._blocks), i]

    def anc_row(self, i: int) -> np.ndarray:
        return self._anc[i, : len(self._blocks)]

    def leaf_children_of(self, i: int) -> Tuple[int, ...]:
        return tuple(self._leaf_children[i])

    def children_of(self, i: int) -> Tuple[int, ...]:
        """Blocks holding any direct edge to this block (bet or leaf)."""
        return tuple(self._children[i])

    def double_mask(self) -> np.ndarray:
        return self._double[: len(self._blocks)]

    def refs_of(self, i: int) -> Tuple[int, ...]:
        return self._refs[i]

    def prev_of(self, i: int) -> int:
        return int(self._prev[i])

    def depth_of(self, i: int) -> int:
        return int(self._depth[i])

    def sender_of(self, i: int) -> int:
        return int(self._sender[i])

    def outdeg_of(self, i: int) -> int:
        return int(self._outdeg[i])

    def base_score_of(self, i: int) -> int:
        return int(self._base_score[i])

    def tiebreak_of(self, i: int) -> int:
        return self._tiebreak[i]

    def has_doubles(self) -> bool:
        return bool(self._double[: len(self._blocks)].any())

    def outdeg_array(self) -> np.ndarray:
        return self._outdeg[: len(self._blocks)]

    # ------------------------------------------------------------------
    # exports

    def to_snapshot(self) -> str:
        """One line per block: ``id prev [leaf,...] sender proof-hash``."""
        lines = []
        for blk in self._blocks:
            prev = blk.prev if blk.prev is not None else "-"
            refs = "[" + ",".join(blk.leaves) + "]"
            key = blk.proof_key()
            proof_hash = digest(key).hex() if key is not None else "-"
            lines.append(f"{blk.id} {prev} {refs} {blk.sender} {proof_hash}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        """Graphviz rendering; solid = bet edge, dashed = leaf reference."""
        out = ["digraph betdag {", "  rankdir=RL;"]
        for i, blk in enumerate(self._blocks):
            label = f"{blk.id[:8]}\\ns{blk.sender}"
            shape = ", shape=doubleoctagon" if self._double[i] else ""
            out.append(f'  "{blk.id[:16]}" [label="{label}"{shape}];')
        for i, blk in enumerate(self._blocks):
            for j, r in enumerate(self._refs[i]):
                style = "solid" if (j == 0 and blk.prev is not None) else "dashed"
                target = self._blocks[r].id[:16]
                out.append(f'  "{blk.id[:16]}" -> "{target}" [style={style}];')
        out.append("}")
        return "\n".join(out) + "\n"


def bcpc(views: Sequence[BlockDag]) -> BlockDag:
    """Largest downward-closed block set held by a strict majority of views.

    Blocks are identified across views by id; the result is rebuilt as a
    fresh DAG so relation queries work on the common prefix alone.
    """
    if not views:
        raise ValueError("bcpc of zero views")
    counts: Dict[str, int] = {}
    blocks: Dict[str, Block] = {}
    for view in views:
        for blk in view.blocks():
            counts[blk.id] = counts.get(blk.id, 0) + 1
            blocks.setdefault(blk.id, blk)
    need = len(views) // 2 + 1
    keep = {bid for bid, cnt in counts.items() if cnt >= need}
    # Downward closure: drop blocks with a reference outside the kept set.
    changed = True
    while changed:
        changed = False
        for bid in sorted(keep):
            blk = blocks[bid]
            refs = ([] if blk.prev is None else [blk.prev, *blk.leaves])
            if any(r not in keep for r in refs):
                keep.discard(bid)
                changed = True
    out = BlockDag(capacity=max(8, len(keep)))
    pending = sorted(keep)
    while pending:
        rest: List[str] = []
        for bid in pending:
            blk = blocks[bid]
            refs = [] if blk.prev is None else [blk.prev, *blk.leaves]
            if all(r in out for r in refs):
                out.insert(blk)
            else:
                rest.append(bid)
        if len(rest) == len(pending):
            # Only reachable when no view supplied a genesis-rooted prefix.
            break
        pending = rest
    return out
