"""Betting strategies for the simulated network.

Three behaviours drive the experiments.  Altruistic bettors follow the
protocol exactly: bet on the fork-choice tip, reference every other known
leaf, and fall back to delay-beacon redraws when no leader shows up.  A
byzantine coalition floods the DAG with every block it can prove
eligibility for, grinding the fork-choice tip and its own side branches
while never leaf-referencing blocks from outside the coalition.  A
rational coalition withholds winning blocks, regrows them over instant
intra-coalition links while next-slot redraws keep hitting, and reveals
the private bundle at the first miss if it still leads the public tip;
bundles that fall behind are folded without ever paying punishment.

Agents act through the world handle owned by :mod:`betdag.netsim`.  The
world exposes each view's known blocks, leaves and fork-choice tip, runs
the eligibility lottery, and takes care of block construction plus
delivery bookkeeping.  Every block built here bets on the fork-choice tip
of its own referenced past, so broadcasts verify against the creator's
view as of creation time.
"""

from __future__ import annotations

from typing import List, Sequence, Set, Tuple

from .blockdag import Block

ALTRUISTIC = "altruistic"
BYZANTINE = "byzantine"
RATIONAL = "rational"


# ---------------------------------------------------------------------------
# altruistic


class AltruisticAgent:
    """Protocol follower: one lottery draw per (tip, redraw-depth) pair.

    The redraw depth grows by one for every ``delay_pod`` slots the current
    tip has gone unextended, which models waiting out the delay function
    before retrying the lottery.
    """

    __slots__ = ("pid", "view", "tip", "tip_slot", "_drawn")

    def __init__(self, pid: int, view: int) -> None:
        self.pid = pid
        self.view = view
        self.tip = -1
        self.tip_slot = 0
        self._drawn: Set[Tuple[int, int]] = set()

    def step(self, world, slot: int) -> List[Block]:
        tip = world.tip_of(self.view)
        if tip != self.tip:
            self.tip, self.tip_slot = tip, slot
        depth = (slot - self.tip_slot) // world.cfg.delay_pod
        key = (tip, depth)
        if key in self._drawn:
            return []
        self._drawn.add(key)
        if not world.guard_ok(self.view, tip):
            world.note_alarm(self.pid, slot)
            return []
        proof = world.draw(self.pid, tip, depth)
        if proof is None:
            return []
        refs = [i for i in world.leaves_of(self.view) if i != tip]
        idx = world.publish(self.pid, self.view, tip, depth, proof, refs, slot)
        return [world.block_at(idx)]


def altruistic_step(state: AltruisticAgent, world, slot: int) -> List[Block]:
    """Run one altruistic slot; returns the blocks broadcast."""
    return state.step(world, slot)


# ---------------------------------------------------------------------------
# byzantine


class ByzantineCoalition:
    """Block-count maximizer: grind every coalition branch, broadcast all.

    The coalition shares a single view.  Each slot, every member draws on
    the fork-choice tip (with delay redraws, exactly like everyone else)
    and on every coalition-built leaf — each win becomes a broadcast block
    whose extra references point only at weaker coalition-built leaves.
    Blocks from outside the coalition are never touched except when the
    fork-choice rule forces the tip: extending an altruistic side branch
    would grow altruistic history, the opposite of the coalition's goal of
    building the biggest rival subDAG.  Own side branches keep re-rolling
    the delay lottery until they go ``grind_window`` slots without a win,
    after which they are left to rot.  Blocks minted during a slot become
    roots for the next slot's pass, so grinding recurses at slot
    granularity rather than instantaneously.
    """

    __slots__ = ("members", "view", "root_seen", "_drawn")

    def __init__(self, members: Sequence[int], view: int) -> None:
        self.members = tuple(members)
        self.view = view
        self.root_seen: dict = {}
        self._drawn: Set[Tuple[int, int]] = set()

    def step(self, world, slot: int) -> List[Block]:
        if not self.members:
            return []
        out: List[Block] = []
        mine = set(self.members)
        best = world.tip_of(self.view)
        for root in sorted(world.leaves_of(self.view)):
            seen = self.root_seen.setdefault(root, slot)
            depth = (slot - seen) // world.cfg.delay_pod
            if root != best:
                if world.sender_of(root) not in mine:
                    continue
                if depth > 0 and slot - seen > world.cfg.grind_window:
                    continue
            key = (root, depth)
            if key in self._drawn:
                continue
            self._drawn.add(key)
            root_key = world.key_of(root)
            for pid in self.members:
                proof = world.draw(pid, root, depth)
                if proof is None:
                    continue
                refs = [
                    i
                    for i in world.leaves_of(self.view)
                    if i != root
                    and world.sender_of(i) in mine
                    and world.key_of(i) > root_key
                ]
                idx = world.publish(pid, self.view, root, depth, proof, refs, slot)
                out.append(world.block_at(idx))
        return out


def byzantine_step(state: ByzantineCoalition, world, slot: int) -> List[Block]:
    """Run one byzantine slot; returns the blocks broadcast."""
    return state.step(world, slot)


# ---------------------------------------------------------------------------
# rational


class RationalCoalition:
    """Withhold-and-grind coalition with a first-miss reveal rule.

    Wins on the public tip are withheld rather than broadcast.  Every
    withheld block reseeds the eligibility beacon, so over the coalition's
    instant internal links all members redraw the lottery on the fresh
    private head one slot later -- a free extra draw the rest of the
    network cannot see.  The private bundle grows while those redraws keep
    hitting and is resolved on the first miss: revealed when it still
    leads the public tip by a full score point (or is a single block with
    nothing to lose), abandoned otherwise.  Surplus same-round wins are
    never raced against the coalition's own bundle; they ride along hidden
    and are cited by the next private block, fattening its reference
    reward.  Abandoning never pays punishment: bundle blocks that bet on
    the public chain are released as neutral reference fodder, and blocks
    betting on hidden bundle heads are discarded unseen.

    A singleton coalition has no internal links to exploit, so it
    collapses to altruistic behaviour: every win is broadcast in the slot
    it happens.
    """

    __slots__ = ("members", "view", "tip", "tip_slot", "private", "fodder", "dead", "_drawn")

    def __init__(self, members: Sequence[int], view: int) -> None:
        self.members = tuple(members)
        self.view = view
        self.tip = -1
        self.tip_slot = 0
        self.private: List[int] = []
        self.fodder: List[int] = []
        self.dead: Set[int] = set()
        self._drawn: Set[Tuple[int, int]] = set()

    # -- helpers ------------------------------------------------------------

    def _refs_for(self, world, prev: int) -> List[int]:
        """Leaves the coalition may cite without unseating its bet target."""
        prev_key = world.key_of(prev)
        return [
            i
            for i in world.leaves_of(self.view)
            if i != prev and i not in self.dead and world.key_of(i) > prev_key
        ]

    def _grow(self, world, root: int, depth: int, slot: int) -> bool:
        """Mint every win on ``(root, depth)``; the strongest extends the bundle.

        Weaker same-round wins become withheld reference fodder for the
        next bundle block, never public competitors of their own sibling.
        """
        refs = self._refs_for(world, root)
        minted: List[int] = []
        for pid in self.members:
            proof = world.draw(pid, root, depth)
            if proof is None:
                continue
            minted.append(world.mint(pid, self.view, root, depth, proof, refs, slot))
        if not minted:
            return False
        minted.sort(key=world.key_of)
        self.private.append(minted[0])
        self.fodder.extend(minted[1:])
        return True

    def _reveal(self, world, slot: int) -> List[Block]:
        out = sorted(self.private + self.fodder)
        world.reveal(self.view, out, slot)
        blocks = [world.block_at(i) for i in out]
        self._reset()
        return blocks

    def _abandon(self, world, slot: int) -> List[Block]:
        """Fold the bundle: release what stays neutral, bury the rest.

        A block betting on the public chain is neutral whatever happens to
        the race, and its cited past is public by construction, so it is
        safe to release as reference fodder.  Blocks betting on hidden
        bundle heads would be labeled losers once the chain outruns them,
        so they are never shown to anyone.
        """
        public = world.tip_of_public(self.view)
        anc = world.dag.anc_row(public)
        keep: List[int] = []
        for i in sorted(self.private + self.fodder):
            prev = world.dag.prev_of(i)
            if prev == public or anc[prev]:
                keep.append(i)
            else:
                self.dead.add(i)
        blocks: List[Block] = []
        if keep:
            world.reveal(self.view, keep, slot)
            blocks = [world.block_at(i) for i in keep]
        self._reset()
        return blocks

    def _reset(self) -> None:
        self.private.clear()
        self.fodder.clear()

    # -- phases ---------------------------------------------------------

    def _public_phase(self, world, slot: int) -> List[Block]:
        tip = world.tip_of(self.view, exclude=self.dead)
        if tip != self.tip:
            self.tip, self.tip_slot = tip, slot
        depth = (slot - self.tip_slot) // world.cfg.delay_pod
        key = (tip, depth)
        if key in self._drawn:
            return []
        self._drawn.add(key)
        if not world.guard_ok(self.view, tip):
            for pid in self.members:
                world.note_alarm(pid, slot)
            return []
        if len(self.members) == 1:
            pid = self.members[0]
            proof = world.draw(pid, tip, depth)
            if proof is None:
                return []
            refs = [i for i in world.leaves_of(self.view) if i != tip]
            idx = world.publish(pid, self.view, tip, depth, proof, refs, slot)
            return [world.block_at(idx)]
        self._grow(world, tip, depth, slot)
        return []

    def _private_phase(self, world, slot: int) -> List[Block]:
        head = self.private[-1]
        if world.key_of(world.tip_of_public(self.view)) < world.key_of(head):
            return self._abandon(world, slot)
        if len(self.private) < world.cfg.withhold_depth:
            key = (head, 0)
            if key not in self._drawn:
                self._drawn.add(key)
                if self._grow(world, head, 0, slot):
                    return []
        lead = world.score_of(self.private[-1]) - world.score_of(world.tip_of_public(self.view))
        if lead >= 1 or len(self.private) == 1:
            return self._reveal(world, slot)
        return self._abandon(world, slot)

    def step(self, world, slot: int) -> List[Block]:
        if not self.members:
            return []
        if self.private:
            return self._private_phase(world, slot)
        return self._public_phase(world, slot)


def rational_step(state: RationalCoalition, world, slot: int) -> List[Block]:
    """Run one rational-coalition slot; returns the blocks broadcast."""
    return state.step(world, slot)
