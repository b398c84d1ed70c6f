"""Checkpointing ladder: candidates, witnesses, ranks, reconfiguration."""

import numpy as np
import pytest

from betdag.blockdag import BlockDag, make_block, make_genesis
from betdag.finality import (
    EVENT_CANDIDATE,
    EVENT_FINALIZED,
    EVENT_JUSTIFIED,
    EVENT_SECOND_WITNESS,
    EVENT_WITNESS,
    FinalityState,
    begin_reconfiguration,
    events_to_csv,
    update_finality,
)

from oracles import _fake_proof, o_checkpoints, o_past, random_dag


def fresh_dag(rng):
    dag = BlockDag()
    genesis = make_genesis(rng.bytes(32))
    dag.insert(genesis)
    return dag, genesis


def bet(dag, rng, prev_id, sender, leaves=()):
    depth = dag.depth_of(dag.index_of(prev_id)) + 1
    blk = make_block(prev_id, list(leaves), sender, _fake_proof(rng, sender, depth), rng.bytes(32))
    dag.insert(blk)
    return blk


def feed(state, dag, blocks):
    for blk in blocks:
        update_finality(state, dag, blk)
    return state


class TestThreshold:
    def test_two_thirds_rounding(self):
        for n, want in [(1, 1), (2, 2), (3, 2), (4, 3), (5, 4), (6, 4), (150, 100)]:
            assert FinalityState(n).threshold == want

    def test_follows_player_set_size(self):
        state = FinalityState(3)
        state.player_set.add(3)
        assert state.threshold == 3


class TestWalkthrough:
    """Three players, two sibling candidates, one witness each."""

    def build(self):
        rng = np.random.default_rng(11)
        dag, genesis = fresh_dag(rng)
        a = bet(dag, rng, genesis.id, 0)
        c = bet(dag, rng, genesis.id, 1)
        e = bet(dag, rng, a.id, 0, leaves=[c.id])
        f = bet(dag, rng, c.id, 1, leaves=[a.id])
        h = bet(dag, rng, e.id, 2)
        i = bet(dag, rng, f.id, 0, leaves=[e.id])
        state = FinalityState(3, window=2)
        feed(state, dag, [a, c, e, f, h, i])
        return dag, state, {"a": a, "c": c, "e": e, "f": f, "h": h, "i": i}

    def test_genesis_children_become_candidates(self):
        _, state, blk = self.build()
        assert state.candidates[1] == {blk["a"].id, blk["c"].id}
        assert state.rank == 1

    def test_first_witnesses(self):
        _, state, blk = self.build()
        assert state.witnesses[blk["a"].id] == {blk["h"].id}
        assert state.witnesses[blk["c"].id] == {blk["i"].id}

    def test_same_sender_repeat_bets_do_not_witness(self):
        _, state, blk = self.build()
        assert blk["e"].id not in state.witness_ids
        assert blk["f"].id not in state.witness_ids

    def test_both_candidates_justified_none_finalized(self):
        dag, state, blk = self.build()
        assert state.justified == {blk["a"].id, blk["c"].id}
        assert state.finalized == set()
        assert state.second_witness_ids == set()
        assert state.violations(dag) == 0

    def test_event_order(self):
        _, state, blk = self.build()
        got = [(e.event, e.block_id) for e in state.events]
        assert got == [
            (EVENT_CANDIDATE, blk["a"].id),
            (EVENT_CANDIDATE, blk["c"].id),
            (EVENT_WITNESS, blk["h"].id),
            (EVENT_JUSTIFIED, blk["a"].id),
            (EVENT_WITNESS, blk["i"].id),
            (EVENT_JUSTIFIED, blk["c"].id),
        ]

    def test_justified_monotone_while_feeding(self):
        rng = np.random.default_rng(11)
        dag, genesis = fresh_dag(rng)
        a = bet(dag, rng, genesis.id, 0)
        c = bet(dag, rng, genesis.id, 1)
        e = bet(dag, rng, a.id, 0, leaves=[c.id])
        f = bet(dag, rng, c.id, 1, leaves=[a.id])
        h = bet(dag, rng, e.id, 2)
        i = bet(dag, rng, f.id, 0, leaves=[e.id])
        state = FinalityState(3, window=2)
        seen_justified, seen_finalized = set(), set()
        for blk in [a, c, e, f, h, i]:
            state.update(dag, blk)
            assert seen_justified <= state.justified
            assert seen_finalized <= state.finalized
            seen_justified = set(state.justified)
            seen_finalized = set(state.finalized)


class TestThresholdBoundary:
    def build_chain(self, senders):
        rng = np.random.default_rng(23)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(6, window=2)
        tip = genesis.id
        blocks = []
        for s in senders:
            blk = bet(dag, rng, tip, s)
            state.update(dag, blk)
            tip = blk.id
            blocks.append(blk)
        return state, blocks

    def test_one_below_threshold_is_not_justified(self):
        state, _ = self.build_chain([0, 1, 2])  # three distinct bettors, need four
        assert state.justified == set()
        assert state.witness_ids == set()

    def test_exactly_threshold_justifies(self):
        state, blocks = self.build_chain([0, 1, 2, 3])
        assert state.justified == {blocks[0].id}
        assert state.witnesses[blocks[0].id] == {blocks[3].id}

    def test_repeat_senders_do_not_help(self):
        state, _ = self.build_chain([0, 1, 0, 1, 0, 1])
        assert state.justified == set()


class TestRankLadder:
    """Four players: justify, finalize, then open the next rank."""

    def build(self, window):
        rng = np.random.default_rng(37)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(4, window=window)
        tip = genesis.id
        blocks = {}
        for name, s in [("x", 0), ("a", 1), ("b", 2), ("c", 3), ("d", 0), ("e", 1), ("f", 2)]:
            blk = bet(dag, rng, tip, s)
            state.update(dag, blk)
            tip = blk.id
            blocks[name] = blk
        return dag, state, blocks

    def test_justify_then_finalize(self):
        dag, state, blk = self.build(window=2)
        assert state.witnesses[blk["x"].id] == {blk["b"].id, blk["c"].id, blk["d"].id, blk["e"].id, blk["f"].id}
        assert state.justified == {blk["x"].id}
        assert blk["d"].id in state.second_witnesses[blk["x"].id]
        assert state.finalized == {blk["x"].id}
        assert state.violations(dag) == 0

    def test_candidate_opens_at_window_distance(self):
        _, state, blk = self.build(window=2)
        # d is the second witness; f sits exactly two bets above it
        assert state.candidates[2] == {blk["f"].id}
        assert state.rank == 2

    def test_zero_window_promotes_the_second_witness_itself(self):
        _, state, blk = self.build(window=0)
        assert blk["d"].id in state.candidates[2]
        assert state.rank >= 2

    def test_latest_second_witness_names_its_candidate(self):
        _, state, blk = self.build(window=2)
        got = state.latest_second_witness()
        assert got == (blk["f"].id, frozenset({blk["x"].id}))

    def test_second_rank_justifies_in_turn(self):
        rng = np.random.default_rng(37)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(4, window=2)
        tip = genesis.id
        blocks = {}
        for name, s in [
            ("x", 0), ("a", 1), ("b", 2), ("c", 3), ("d", 0), ("e", 1), ("f", 2),
            ("g", 3), ("h", 0),
        ]:
            blk = bet(dag, rng, tip, s)
            state.update(dag, blk)
            tip = blk.id
            blocks[name] = blk
        # f is the rank-2 candidate; f(2), g(3), h(0) are three distinct bettors
        assert blocks["f"].id in state.justified
        assert state.witnesses[blocks["f"].id] == {blocks["h"].id}


class TestViolations:
    def test_equivocating_factions_are_counted(self):
        rng = np.random.default_rng(41)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(3, window=1)
        a = bet(dag, rng, genesis.id, 0)
        a1 = bet(dag, rng, a.id, 1)
        a2 = bet(dag, rng, a1.id, 0)
        b = bet(dag, rng, genesis.id, 1)
        b1 = bet(dag, rng, b.id, 2)
        b2 = bet(dag, rng, b1.id, 1)
        feed(state, dag, [a, a1, a2, b, b1, b2])
        assert state.finalized == {a.id, b.id}
        assert state.violations(dag) == 1

    def test_ordered_finalized_pairs_are_fine(self):
        rng = np.random.default_rng(43)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(3, window=0)
        tip = genesis.id
        for s in [0, 1, 2, 0, 1, 2, 0, 1, 2, 0]:
            blk = bet(dag, rng, tip, s)
            state.update(dag, blk)
            tip = blk.id
        assert len(state.finalized) >= 2
        assert state.violations(dag) == 0


class TestReconfiguration:
    def finalized_state(self):
        rng = np.random.default_rng(53)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(4, window=2)
        tip = genesis.id
        blocks = []
        for s in [0, 1, 2, 3, 0]:
            blk = bet(dag, rng, tip, s)
            state.update(dag, blk)
            tip = blk.id
            blocks.append(blk)
        assert state.finalized
        return rng, dag, state, tip

    def test_requires_a_finalized_block(self):
        state = FinalityState(4, window=2)
        with pytest.raises(ValueError):
            begin_reconfiguration(state)

    def test_join_outside_window_is_rejected(self):
        _, _, state, _ = self.finalized_state()
        assert state.request_join(7) is False
        assert 7 not in state.player_set

    def test_join_during_window_lands_at_close(self):
        rng, dag, state, tip = self.finalized_state()
        begin_reconfiguration(state)
        assert state.reconfiguring
        assert state.request_join(7) is True
        blk = bet(dag, rng, tip, 1)
        state.update(dag, blk)
        assert state.reconfiguring  # one block into a two-block window
        assert state.request_join(8) is True
        blk2 = bet(dag, rng, blk.id, 2)
        state.update(dag, blk2)
        assert not state.reconfiguring
        assert state.player_set == {0, 1, 2, 3, 7, 8}
        assert state.threshold == 4
        assert state.request_join(9) is False

    def test_leave_during_window(self):
        rng, dag, state, tip = self.finalized_state()
        begin_reconfiguration(state)
        assert state.request_leave(3) is True
        for s in [1, 2]:
            blk = bet(dag, rng, tip, s)
            state.update(dag, blk)
            tip = blk.id
        assert state.player_set == {0, 1, 2}
        assert state.threshold == 2


class TestQueries:
    def test_latest_second_witness_respects_known_mask(self):
        rng = np.random.default_rng(41)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(3, window=1)
        a = bet(dag, rng, genesis.id, 0)
        a1 = bet(dag, rng, a.id, 1)
        a2 = bet(dag, rng, a1.id, 0)
        b = bet(dag, rng, genesis.id, 1)
        b1 = bet(dag, rng, b.id, 2)
        b2 = bet(dag, rng, b1.id, 1)
        feed(state, dag, [a, a1, a2, b, b1, b2])
        newest = state.latest_second_witness()
        assert newest == (b2.id, frozenset({b.id}))
        known = np.ones(len(dag), dtype=bool)
        known[dag.index_of(b2.id)] = False
        assert state.latest_second_witness(known) == (a2.id, frozenset({a.id}))
        assert state.latest_second_witness(np.zeros(len(dag), dtype=bool)) is None

    def test_events_csv_shape(self):
        rng = np.random.default_rng(59)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(3, window=1)
        blk = bet(dag, rng, genesis.id, 0)
        state.update(dag, blk, slot=17)
        text = events_to_csv(state.events)
        lines = text.strip().split("\n")
        assert lines[0] == "slot,rank,block_id,event"
        assert lines[1] == f"17,1,{blk.id},candidate"

    def test_genesis_is_ignored(self):
        rng = np.random.default_rng(61)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(3, window=2)
        state.update(dag, genesis)
        assert state.candidates == {}
        assert state.events == []


class TestOracleEquivalence:
    def test_matches_brute_force_replay(self):
        rng = np.random.default_rng(67)
        for trial in range(150):
            dag, recs = random_dag(rng, max_blocks=14, n_senders=3, p_double=0.1)
            window = trial % 3
            state = FinalityState(3, window=window, retire_depth=None)
            for i in range(len(dag)):
                state.update(dag, dag.block_at(i))
            want = o_checkpoints(recs, 3, window)
            assert state.candidates == want["candidates"], trial
            assert state.justified == want["justified"], trial
            assert state.finalized == want["finalized"], trial
            assert state.witnesses == want["witnesses"], trial
            assert state.second_witnesses == want["second_witnesses"], trial
            want_viol = 0
            for cands in want["finalized_by_rank"].values():
                ordered = sorted(cands)
                for x in range(len(ordered)):
                    for y in range(x + 1, len(ordered)):
                        cx, cy = ordered[x], ordered[y]
                        if cx not in o_past(recs, cy) and cy not in o_past(recs, cx):
                            want_viol += 1
            assert state.violations(dag) == want_viol, trial


class TestHonestLadderSmoke:
    def test_round_robin_chain_climbs_ranks_without_violations(self):
        rng = np.random.default_rng(71)
        dag, genesis = fresh_dag(rng)
        state = FinalityState(4, window=2)
        tip = genesis.id
        for r in range(40):
            blk = bet(dag, rng, tip, r % 4)
            state.update(dag, blk, slot=r)
            tip = blk.id
        assert state.rank >= 4
        assert len(state.finalized) >= 4
        assert state.violations(dag) == 0
        # finalized checkpoints on a single chain are totally ordered
        idxs = [dag.index_of(b) for b in state.finalized]
        for x in range(len(idxs)):
            for y in range(x + 1, len(idxs)):
                a, b = idxs[x], idxs[y]
                assert dag.past_row(a)[b] or dag.past_row(b)[a]
