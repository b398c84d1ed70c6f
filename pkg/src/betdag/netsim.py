"""Deterministic slot-based network simulator.

One run holds a single global block DAG plus a boolean known-mask per
*view* (each altruistic player owns a view; a coalition shares one), so a
player's DAG is never materialized — fork choice, scores and betting all
work off intrinsic per-block quantities that are identical in every view
containing the block.  Broadcast delivery samples an exponential delay per
(block, recipient-view), truncated at the semi-synchrony cap ``delta_cap``
and floored at one slot; blocks whose references have not arrived yet are
parked and ingested once the view closes over them, so every view is
causally closed at all times.

Everything is driven by one seeded generator: identical configs produce
bit-identical metrics and CSV artifacts.  At the horizon, settlement runs
over the majority prefix — the blocks known to views covering more than
half of all players — which is exactly the common settled DAG of the
player set, and per-run metrics (fork length, chain quality, class
payoffs, convergence, finality violations) are read off that prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .agents import (
    ALTRUISTIC,
    BYZANTINE,
    RATIONAL,
    AltruisticAgent,
    ByzantineCoalition,
    RationalCoalition,
)
from .blockdag import Block, BlockDag, make_block, make_genesis
from .finality import FinalityEvent, FinalityState
from .incentives import IncentiveParams, Payoff, settle_prefix
from .rules import ProtocolEnv, fcr, label
from .vrf_beacon import (
    EligibilityProof,
    VrfRegistry,
    gen_keypair,
    lottery_draw,
    proof_of_delay,
    wins,
    xor_bytes,
)

#: Prefix length used by the convergence metric.
K0 = 20

_CLASS_CODE = {BYZANTINE: 0, RATIONAL: 1}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one simulated network; defaults match the experiment scale."""

    n_players: int = 150
    slots: int = 5000
    fractions: Tuple[float, float, float] = (0.0, 1.0, 0.0)
    k: int = 3
    c: float = 1.0
    pun: float = 6.0
    bigpun: float = 10.0
    delay_mean: float = 2.0
    delta_cap: int = 10
    delay_pod: int = 12
    w: int = 6
    x_commit: int = 10
    runs: int = 10
    seed: int = 0
    withhold_depth: int = 2
    grind_window: int = 12

    def __post_init__(self) -> None:
        if self.n_players < 1:
            raise ValueError("invalid-config: n_players must be >= 1")
        if self.slots < 1:
            raise ValueError("invalid-config: slots must be >= 1")
        if len(self.fractions) != 3:
            raise ValueError("invalid-config: fractions must have three entries")
        if any(f < 0.0 or f > 1.0 for f in self.fractions):
            raise ValueError("invalid-config: fractions must lie in [0, 1]")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("invalid-config: fractions must sum to 1")
        if self.delay_pod <= self.delta_cap:
            raise ValueError("invalid-config: delay_pod must exceed delta_cap")
        if self.delay_mean <= 0.0:
            raise ValueError("invalid-config: delay_mean must be positive")
        if self.runs < 0 or self.withhold_depth < 1:
            raise ValueError("invalid-config: runs/withhold_depth out of range")
        if self.grind_window < 0:
            raise ValueError("invalid-config: grind_window must be >= 0")

    @property
    def n_byzantine(self) -> int:
        return round(self.fractions[0] * self.n_players)

    @property
    def n_rational(self) -> int:
        return round(self.fractions[2] * self.n_players)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class RunMetrics:
    """Per-run outcome summary, one row of ``metrics.csv``."""

    run_id: str
    coalition_size: int
    coalition_class: str
    longest_fork: int
    chain_quality: Dict[str, float]
    payoffs: Dict[str, float]
    convergence_slot: int
    finality_violations: int


@dataclass(frozen=True)
class RunOutput:
    """One run's metrics plus the per-player and finality detail rows."""

    metrics: RunMetrics
    payoff_rows: List[Tuple[str, Payoff, str]]
    event_rows: List[Tuple[str, FinalityEvent]]


# ---------------------------------------------------------------------------
# the shared world


class World:
    """Global DAG, per-view visibility, delivery, and the lottery."""

    def __init__(self, cfg: SimConfig, n_byz: int, n_rat: int, seed_seq) -> None:
        if n_byz + n_rat > cfg.n_players:
            raise ValueError("invalid-config: coalition larger than the player set")
        self.cfg = cfg
        self.rng = np.random.default_rng(seed_seq)
        n = cfg.n_players
        self.n_players = n

        self.keypairs = [gen_keypair(self.rng) for _ in range(n)]
        registry = VrfRegistry()
        for kp in self.keypairs:
            registry.register(kp)
        self.env = ProtocolEnv(registry, {i: kp.pk for i, kp in enumerate(self.keypairs)}, n=n)
        self.target = self.env.target

        byz_ids = list(range(n_byz))
        rat_ids = list(range(n_byz, n_byz + n_rat))
        alt_ids = list(range(n_byz + n_rat, n))
        self.class_of: List[str] = [BYZANTINE] * n_byz + [RATIONAL] * n_rat + [ALTRUISTIC] * len(alt_ids)

        # Views are ordered by their first member so that a world whose
        # coalitions are empty (or behave like protocol followers) is laid
        # out identically to the all-altruistic world under the same seed.
        self.view_members: List[List[int]] = []
        self.byz_view = self.rat_view = -1
        if byz_ids:
            self.byz_view = len(self.view_members)
            self.view_members.append(byz_ids)
        if rat_ids:
            self.rat_view = len(self.view_members)
            self.view_members.append(rat_ids)
        self.view_members.extend([pid] for pid in alt_ids)
        self.n_views = len(self.view_members)
        self.view_of = np.empty(n, dtype=np.int64)
        for v, members in enumerate(self.view_members):
            for pid in members:
                self.view_of[pid] = v
        self.view_weight = np.array([len(m) for m in self.view_members], dtype=np.int64)

        self.dag = BlockDag(capacity=1024)
        genesis = make_genesis(bytes(self.rng.bytes(32)))
        self.dag.insert(genesis)
        self.fin = FinalityState(n, window=cfg.w)

        self.known = np.zeros((self.n_views, 2048), dtype=bool)
        self.known[:, 0] = True
        self.keys: List[Tuple[int, int, str]] = [
            (-self.dag.base_score_of(0), self.dag.tiebreak_of(0), genesis.id)
        ]
        self.slot_of: List[int] = [0]
        self.is_public: List[bool] = [True]
        self.leaf_sets: List[Set[int]] = [{0} for _ in range(self.n_views)]
        self.pub_leaf_sets: List[Set[int]] = [{0} for _ in range(self.n_views)]
        self._tip: List[int] = [0] * self.n_views
        self._tip_dirty: List[bool] = [False] * self.n_views
        self._missing: List[Dict[int, int]] = [{} for _ in range(self.n_views)]
        self._waiters: List[Dict[int, List[int]]] = [{} for _ in range(self.n_views)]
        self.queue: Dict[int, List[Tuple[int, int]]] = {}
        self.pub_leaves: Set[int] = {0}
        self.tip_trace: List[Tuple[int, int]] = [(0, 0)]
        self.alarms: Dict[int, List[int]] = {}

    # -- lookups ------------------------------------------------------------

    def block_at(self, i: int) -> Block:
        return self.dag.block_at(i)

    def sender_of(self, i: int) -> int:
        return self.dag.sender_of(i)

    def key_of(self, i: int) -> Tuple[int, int, str]:
        return self.keys[i]

    def score_of(self, i: int) -> int:
        return -self.keys[i][0]

    def leaves_of(self, view: int) -> Set[int]:
        return self.leaf_sets[view]

    def tip_of(self, view: int, exclude: Optional[Set[int]] = None) -> int:
        if exclude:
            live = [i for i in self.leaf_sets[view] if i not in exclude]
            pool = live if live else self.pub_leaf_sets[view]
            return min(pool, key=self.keys.__getitem__)
        if self._tip_dirty[view]:
            self._tip[view] = min(self.leaf_sets[view], key=self.keys.__getitem__)
            self._tip_dirty[view] = False
        return self._tip[view]

    def tip_of_public(self, view: int) -> int:
        return min(self.pub_leaf_sets[view], key=self.keys.__getitem__)

    def public_tip(self) -> int:
        return min(self.pub_leaves, key=self.keys.__getitem__)

    def note_alarm(self, pid: int, slot: int) -> None:
        self.alarms.setdefault(pid, []).append(slot)

    def guard_ok(self, view: int, tip: int) -> bool:
        rec = self.fin.latest_second_witness(self.known[view])
        if rec is None:
            return True
        _, cand_ids = rec
        anc = self.dag.anc_row(tip)
        for cid in cand_ids:
            ci = self.dag.index_of(cid)
            if ci == tip or anc[ci]:
                return True
        return False

    # -- lottery ------------------------------------------------------------

    def draw(self, pid: int, root: int, depth: int) -> Optional[EligibilityProof]:
        out = lottery_draw(self.keypairs[pid].sk, self.dag.block_at(root).beacon, depth)
        if not wins(out, self.target):
            return None
        return EligibilityProof(
            participant=pid,
            y=out.y,
            proof=out.proof,
            rnd=self.dag.depth_of(root) + 1,
            redraw_depth=depth,
        )

    # -- block creation -----------------------------------------------------

    def publish(
        self, pid: int, view: int, root: int, depth: int, proof, refs: Sequence[int], slot: int
    ) -> int:
        return self._insert(pid, view, root, depth, proof, refs, slot, public=True)

    def mint(
        self, pid: int, view: int, root: int, depth: int, proof, refs: Sequence[int], slot: int
    ) -> int:
        return self._insert(pid, view, root, depth, proof, refs, slot, public=False)

    def _insert(
        self,
        pid: int,
        view: int,
        root: int,
        depth: int,
        proof,
        refs: Sequence[int],
        slot: int,
        public: bool,
    ) -> int:
        prev = self.dag.block_at(root)
        x = prev.beacon if depth == 0 else proof_of_delay(prev.beacon, depth)
        beacon = xor_bytes(x, proof.y)
        leaf_ids = sorted(self.dag.block_at(i).id for i in refs)
        blk = make_block(prev.id, leaf_ids, pid, proof, beacon)
        if blk.id in self.dag:
            return self.dag.index_of(blk.id)
        idx = self.dag.insert(blk)
        if idx >= self.known.shape[1]:
            extra = np.zeros_like(self.known)
            self.known = np.concatenate([self.known, extra], axis=1)
        self.keys.append((-self.dag.base_score_of(idx), self.dag.tiebreak_of(idx), blk.id))
        self.slot_of.append(slot)
        self.is_public.append(False)
        self.fin.update(self.dag, blk, slot=slot)
        self._learn(view, idx)
        if public:
            self._broadcast(idx, view, slot)
        return idx

    # -- visibility and delivery --------------------------------------------

    def _learn(self, view: int, idx: int) -> None:
        if self.known[view, idx]:
            return
        self.known[view, idx] = True
        ls = self.leaf_sets[view]
        for r in self.dag.refs_of(idx):
            ls.discard(r)
        ls.add(idx)
        self._tip_dirty[view] = True
        if self.is_public[idx]:
            ps = self.pub_leaf_sets[view]
            for r in self.dag.refs_of(idx):
                ps.discard(r)
            ps.add(idx)

    def reveal(self, view: int, idxs: Sequence[int], slot: int) -> None:
        for idx in idxs:
            self._broadcast(idx, view, slot)

    def _broadcast(self, idx: int, from_view: int, slot: int) -> None:
        self.is_public[idx] = True
        ps = self.pub_leaf_sets[from_view]
        for r in self.dag.refs_of(idx):
            ps.discard(r)
        ps.add(idx)
        for r in self.dag.refs_of(idx):
            self.pub_leaves.discard(r)
        self.pub_leaves.add(idx)
        tip = min(self.pub_leaves, key=self.keys.__getitem__)
        if tip != self.tip_trace[-1][1]:
            self.tip_trace.append((slot, tip))
        delays = self.rng.exponential(self.cfg.delay_mean, size=self.n_views)
        cap = self.cfg.delta_cap
        for v in range(self.n_views):
            if v == from_view:
                continue
            d = math.ceil(delays[v])
            if d < 1:
                d = 1
            elif d > cap:
                d = cap
            self.queue.setdefault(slot + d, []).append((v, idx))

    def deliver_due(self, slot: int) -> None:
        for view, idx in self.queue.pop(slot, ()):
            self._ingest(view, idx)

    def _ingest(self, view: int, idx: int) -> None:
        if self.known[view, idx]:
            return
        missing = [r for r in self.dag.refs_of(idx) if not self.known[view, r]]
        if missing:
            self._missing[view][idx] = len(missing)
            for r in missing:
                self._waiters[view].setdefault(r, []).append(idx)
            return
        stack = [idx]
        while stack:
            i = stack.pop()
            if self.known[view, i]:
                continue
            self._learn(view, i)
            for waiter in self._waiters[view].pop(i, ()):
                left = self._missing[view][waiter] - 1
                if left:
                    self._missing[view][waiter] = left
                else:
                    del self._missing[view][waiter]
                    stack.append(waiter)


# ---------------------------------------------------------------------------
# running


def _build_agents(world: World) -> Tuple[List[AltruisticAgent], Optional[ByzantineCoalition], Optional[RationalCoalition]]:
    alts = [
        AltruisticAgent(pid, int(world.view_of[pid]))
        for pid in range(world.n_players)
        if world.class_of[pid] == ALTRUISTIC
    ]
    byz = rat = None
    if world.byz_view >= 0:
        byz = ByzantineCoalition(world.view_members[world.byz_view], world.byz_view)
    if world.rat_view >= 0:
        rat = RationalCoalition(world.view_members[world.rat_view], world.rat_view)
    return alts, byz, rat


def _majority_prefix(world: World) -> Tuple[BlockDag, np.ndarray]:
    nblocks = len(world.dag)
    counts = world.view_weight @ world.known[:, :nblocks]
    maj = counts * 2 > world.n_players
    maj[0] = True
    prefix = BlockDag(capacity=max(64, int(maj.sum()) + 1))
    for i in range(nblocks):
        if maj[i]:
            prefix.insert(world.dag.block_at(i))
    return prefix, maj


def _longest_fork(prefix: BlockDag, winner_ids: Set[str]) -> int:
    longest = 0
    runs = [0] * len(prefix)
    for i in range(1, len(prefix)):
        if prefix.block_at(i).id in winner_ids:
            continue
        prev = prefix.prev_of(i)
        runs[i] = runs[prev] + 1
        if runs[i] > longest:
            longest = runs[i]
    return longest


def _convergence_slot(world: World, prefix: BlockDag) -> int:
    tip_id = fcr(prefix)
    chain: List[str] = []
    i = prefix.index_of(tip_id)
    while i > 0:
        chain.append(prefix.block_at(i).id)
        i = prefix.prev_of(i)
    chain.reverse()
    head = [world.dag.index_of(bid) for bid in chain[: min(K0, len(chain))]]
    if not head:
        return 0
    last_bad = 0
    final_ok = True
    for slot, tip in world.tip_trace:
        anc = world.dag.anc_row(tip)
        ok = all(anc[j] or j == tip for j in head)
        if not ok:
            last_bad = slot
            final_ok = False
        else:
            final_ok = True
    if not final_ok:
        return world.cfg.slots
    return last_bad


def run_detailed(
    cfg: SimConfig,
    n_byz: Optional[int] = None,
    n_rat: Optional[int] = None,
    run_id: str = "run-00",
    seed_key: Optional[Tuple[int, ...]] = None,
) -> RunOutput:
    """Simulate one run and collect metrics plus detail rows."""
    if n_byz is None:
        n_byz = cfg.n_byzantine
    if n_rat is None:
        n_rat = cfg.n_rational
    seed_seq = (
        np.random.SeedSequence(cfg.seed)
        if seed_key is None
        else np.random.SeedSequence(cfg.seed, spawn_key=seed_key)
    )
    world = World(cfg, n_byz, n_rat, seed_seq)
    alts, byz, rat = _build_agents(world)
    for slot in range(1, cfg.slots + 1):
        world.deliver_due(slot)
        if byz is not None:
            byz.step(world, slot)
        if rat is not None:
            rat.step(world, slot)
        for agent in alts:
            agent.step(world, slot)

    prefix, _ = _majority_prefix(world)
    labels = label(prefix, cfg.k)
    genesis_id = prefix.genesis.id
    winner_ids = labels.winners() - {genesis_id}
    counts = {ALTRUISTIC: 0, "coalition": 0}
    for bid in winner_ids:
        cls = world.class_of[prefix.get(bid).sender]
        counts[ALTRUISTIC if cls == ALTRUISTIC else "coalition"] += 1
    total = max(1, len(winner_ids))
    quality = {
        ALTRUISTIC: counts[ALTRUISTIC] / total,
        "coalition": counts["coalition"] / total,
    }

    params = IncentiveParams(c=cfg.c, pun=cfg.pun, bigpun=cfg.bigpun, k=cfg.k)
    pays = settle_prefix(prefix, cfg.n_players, params, n_dag=prefix)
    sums = {ALTRUISTIC: 0.0, "coalition": 0.0}
    members = {ALTRUISTIC: 0, "coalition": 0}
    for pid, pay in enumerate(pays):
        side = ALTRUISTIC if world.class_of[pid] == ALTRUISTIC else "coalition"
        sums[side] += pay.total
        members[side] += 1
    payoffs = {
        side: (sums[side] / members[side]) if members[side] else 0.0
        for side in (ALTRUISTIC, "coalition")
    }

    size = n_byz + n_rat
    if n_byz and n_rat:
        coalition_class = "mixed"
    elif n_byz:
        coalition_class = BYZANTINE
    elif n_rat:
        coalition_class = RATIONAL
    else:
        coalition_class = ALTRUISTIC

    metrics = RunMetrics(
        run_id=run_id,
        coalition_size=size,
        coalition_class=coalition_class,
        longest_fork=_longest_fork(prefix, winner_ids),
        chain_quality=quality,
        payoffs=payoffs,
        convergence_slot=_convergence_slot(world, prefix),
        finality_violations=world.fin.violations(world.dag),
    )
    payoff_rows = [(run_id, pay, world.class_of[pid]) for pid, pay in enumerate(pays)]
    event_rows = [(run_id, ev) for ev in world.fin.events]
    return RunOutput(metrics, payoff_rows, event_rows)


def run(cfg: SimConfig) -> RunMetrics:
    """Simulate one run with class counts taken from ``cfg.fractions``."""
    return run_detailed(cfg).metrics


def sweep_detailed(
    cfg: SimConfig, coalition_sizes: Sequence[int], coalition_class: str
) -> List[RunOutput]:
    """Repeat runs over coalition sizes with per-run derived seeds."""
    if coalition_class not in _CLASS_CODE:
        raise ValueError(f"unknown coalition class {coalition_class!r}")
    code = _CLASS_CODE[coalition_class]
    outputs: List[RunOutput] = []
    for size in coalition_sizes:
        for rep in range(cfg.runs):
            outputs.append(
                run_detailed(
                    cfg,
                    n_byz=size if coalition_class == BYZANTINE else 0,
                    n_rat=size if coalition_class == RATIONAL else 0,
                    run_id=f"{coalition_class}-{size:03d}-{rep:02d}",
                    seed_key=(code, size, rep),
                )
            )
    return outputs


def sweep(cfg: SimConfig, coalition_sizes: Sequence[int], coalition_class: str) -> List[RunMetrics]:
    """Per-run metrics table for a coalition-size sweep."""
    return [out.metrics for out in sweep_detailed(cfg, coalition_sizes, coalition_class)]


def summarize(rows: Sequence[RunMetrics]) -> Dict[int, Dict[str, float]]:
    """Mean metric values per coalition size across a sweep's runs."""
    grouped: Dict[int, List[RunMetrics]] = {}
    for m in rows:
        grouped.setdefault(m.coalition_size, []).append(m)
    out: Dict[int, Dict[str, float]] = {}
    for size, ms in sorted(grouped.items()):
        k = len(ms)
        out[size] = {
            "longest_fork": sum(m.longest_fork for m in ms) / k,
            "max_longest_fork": max(m.longest_fork for m in ms),
            "quality_altruistic": sum(m.chain_quality[ALTRUISTIC] for m in ms) / k,
            "quality_coalition": sum(m.chain_quality["coalition"] for m in ms) / k,
            "payoff_altruistic": sum(m.payoffs[ALTRUISTIC] for m in ms) / k,
            "payoff_coalition": sum(m.payoffs["coalition"] for m in ms) / k,
            "convergence_slot": sum(m.convergence_slot for m in ms) / k,
            "finality_violations": sum(m.finality_violations for m in ms),
        }
    return out


# ---------------------------------------------------------------------------
# CSV artifacts


def metrics_to_csv(rows: Sequence[RunMetrics]) -> str:
    """Fixed-header metrics table; floats carry six decimal digits."""
    lines = [
        "run-id,coalition-size,class,longest_fork,quality_altruistic,"
        "quality_coalition,payoff_altruistic,payoff_coalition,finality_violations"
    ]
    for m in rows:
        lines.append(
            f"{m.run_id},{m.coalition_size},{m.coalition_class},{m.longest_fork},"
            f"{m.chain_quality[ALTRUISTIC]:.6f},{m.chain_quality['coalition']:.6f},"
            f"{m.payoffs[ALTRUISTIC]:.6f},{m.payoffs['coalition']:.6f},"
            f"{m.finality_violations}"
        )
    return "\n".join(lines) + "\n"


def payoffs_to_csv(rows: Sequence[Tuple[str, Payoff, str]]) -> str:
    """Per-player settlement rows as written by the preset runner."""
    lines = ["run-id,player,class,reward_sum,pun_count,bigpun_count,total"]
    for run_id, pay, cls in rows:
        lines.append(
            f"{run_id},{pay.player},{cls},{pay.reward_sum:.6f},"
            f"{pay.pun_count},{pay.bigpun_count},{pay.total:.6f}"
        )
    return "\n".join(lines) + "\n"


def finality_events_to_csv(rows: Sequence[Tuple[str, FinalityEvent]]) -> str:
    """Finality transition log; one row per candidate/witness event."""
    lines = ["run-id,slot,rank,block_id,event"]
    for run_id, ev in rows:
        lines.append(f"{run_id},{ev.slot},{ev.rank},{ev.block_id},{ev.event}")
    return "\n".join(lines) + "\n"
