"""End-of-game utility accounting over the common prefix.

Settlement takes every player's local view, extracts the majority prefix,
labels it, and pays each block by its reference count: winners earn, losers
are fined, and pairs of own blocks that ignore each other draw the large
equivocation fine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Sequence, Set

from .blockdag import Block, BlockDag, bcpc
from .rules import LOSER, WINNER, label

N_SCOPE_MAJORITY = "majority"
N_SCOPE_PREFIX = "bcpc"


@dataclass(frozen=True)
class IncentiveParams:
    """Knobs of the utility function.

    ``reward_floor`` pays a chain-only block (no extra references) one unit
    instead of zero, keeping plain chain growth profitable.  ``n_scope``
    picks the block set over which mutual-unawareness pairs are counted:
    everything the majority has seen, or the settled prefix only.
    """

    c: float = 1.0
    pun: float = 6.0
    bigpun: float = 10.0
    k: int = 3
    reward_floor: bool = True
    n_scope: str = N_SCOPE_MAJORITY

    def __post_init__(self) -> None:
        if self.n_scope not in (N_SCOPE_MAJORITY, N_SCOPE_PREFIX):
            raise ValueError(f"unknown n_scope {self.n_scope!r}")


@dataclass(frozen=True)
class Payoff:
    player: int
    reward_sum: float
    pun_count: int
    bigpun_count: int
    total: float


def block_reward(block: Block, params: IncentiveParams) -> float:
    refs = len(block.leaves)
    if params.reward_floor:
        refs = max(1, refs)
    return refs * params.c


def own_unaware_pairs(dag: BlockDag, player: int) -> Set[FrozenSet[str]]:
    """Unordered pairs of the player's blocks that sit in each other's anticone."""
    own = [i for i in range(len(dag)) if dag.sender_of(i) == player]
    pairs: Set[FrozenSet[str]] = set()
    for a_pos, a in enumerate(own):
        row_a = dag.past_row(a)
        for b in own[a_pos + 1 :]:
            if not row_a[b] and not dag.past_row(b)[a]:
                pairs.add(frozenset((dag.block_at(a).id, dag.block_at(b).id)))
    return pairs


def _majority_union(views: Sequence[BlockDag]) -> BlockDag:
    """Rebuild every block held by a strict majority of views.

    Views are causally closed, so the majority set is too and the multi-pass
    insertion always drains.
    """
    counts: Dict[str, int] = {}
    blocks: Dict[str, Block] = {}
    for view in views:
        for blk in view.blocks():
            counts[blk.id] = counts.get(blk.id, 0) + 1
            blocks.setdefault(blk.id, blk)
    need = len(views) // 2 + 1
    keep = sorted(bid for bid, cnt in counts.items() if cnt >= need)
    out = BlockDag(capacity=max(8, len(keep)))
    pending = keep
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
            break
        pending = rest
    return out


def settle(views: Sequence[BlockDag], params: IncentiveParams = IncentiveParams()) -> List[Payoff]:
    """Compute every player's payoff from the majority prefix of the views.

    Returns one entry per view index; players without surviving blocks
    settle at zero.
    """
    prefix = bcpc(views)
    if params.n_scope == N_SCOPE_MAJORITY:
        n_dag = _majority_union(views)
    else:
        n_dag = prefix
    return settle_prefix(prefix, len(views), params, n_dag=n_dag)


def settle_prefix(
    prefix: BlockDag,
    n_players: int,
    params: IncentiveParams = IncentiveParams(),
    n_dag: BlockDag = None,
) -> List[Payoff]:
    """Payoffs over an already-extracted majority prefix.

    ``n_dag`` is the block set for the mutual-unawareness fine; it defaults
    to the prefix itself, which matches the majority scope whenever views
    are causally closed.
    """
    if n_dag is None:
        n_dag = prefix
    labels = label(prefix, params.k).labels
    reward = [0.0] * n_players
    puns = [0] * n_players
    for blk in prefix.blocks():
        p = blk.sender
        if not 0 <= p < n_players:
            continue
        lab = labels[blk.id]
        if lab == WINNER:
            reward[p] += block_reward(blk, params)
        elif lab == LOSER:
            puns[p] += 1
    own_by: Dict[int, List[int]] = {}
    for i in range(len(n_dag)):
        s = n_dag.sender_of(i)
        if 0 <= s < n_players:
            own_by.setdefault(s, []).append(i)
    n_pairs = [0] * n_players
    for p, idxs in own_by.items():
        for a_pos, a in enumerate(idxs):
            row_a = n_dag.past_row(a)
            for b in idxs[a_pos + 1 :]:
                if not row_a[b] and not n_dag.past_row(b)[a]:
                    n_pairs[p] += 1
    return [
        Payoff(
            p,
            reward[p],
            puns[p],
            n_pairs[p],
            reward[p] - params.pun * puns[p] - params.bigpun * n_pairs[p],
        )
        for p in range(n_players)
    ]


def payoffs_to_csv(rows: Sequence[tuple]) -> str:
    """Serialize (run_id, payoff, class_name) triples for the payoff report."""
    lines = ["run_id,player_id,class,reward_sum,pun_count,bigpun_count,total"]
    for run_id, pay, cls in rows:
        lines.append(
            f"{run_id},{pay.player},{cls},{pay.reward_sum:.6f},"
            f"{pay.pun_count},{pay.bigpun_count},{pay.total:.6f}"
        )
    return "\n".join(lines) + "\n"
