"""Tests for the three player strategies and their broadcast discipline."""

import numpy as np
import pytest

from betdag.agents import AltruisticAgent, ByzantineCoalition, RationalCoalition
from betdag.netsim import SimConfig, World, _build_agents, run_detailed

SMALL = SimConfig(n_players=21, slots=300, w=4, x_commit=6, runs=1)


def drive(cfg, n_byz=0, n_rat=0, seed_key=(11,)):
    world = World(cfg, n_byz, n_rat, np.random.SeedSequence(cfg.seed, spawn_key=seed_key))
    alts, byz, rat = _build_agents(world)
    for slot in range(1, cfg.slots + 1):
        world.deliver_due(slot)
        if byz is not None:
            byz.step(world, slot)
        if rat is not None:
            rat.step(world, slot)
        for agent in alts:
            agent.step(world, slot)
    return world, byz, rat


class TestAltruistic:
    def test_broadcasts_instantly_and_never_withholds(self):
        world, _, _ = drive(SMALL, seed_key=(1,))
        altruistic_blocks = 0
        for i in range(1, len(world.dag)):
            if world.class_of[world.sender_of(i)] == "altruistic":
                assert world.is_public[i]
                altruistic_blocks += 1
        assert altruistic_blocks > 10

    def test_redraws_after_delay_window(self):
        cfg = SimConfig(n_players=40, slots=3 * 12 + 1, w=4, x_commit=6, runs=1)
        world = World(cfg, 0, 0, np.random.SeedSequence(99))
        agent = AltruisticAgent(pid=0, view=0)
        for slot in range(1, cfg.slots + 1):
            agent.step(world, slot)
        depths = {depth for _, depth in agent._drawn}
        assert depths == {0, 1, 2, 3}

    def test_one_draw_per_tip_and_depth(self):
        world, _, _ = drive(SMALL, seed_key=(2,))
        seen = set()
        for i in range(1, len(world.dag)):
            block = world.dag.block_at(i)
            if world.class_of[block.sender] != "altruistic":
                continue
            key = (block.sender, block.prev, block.proof.redraw_depth)
            assert key not in seen
            seen.add(key)


class TestByzantine:
    def test_extra_references_never_point_at_altruistic_blocks(self):
        world, _, _ = drive(SMALL, n_byz=6, seed_key=(3,))
        coalition = {pid for pid in range(len(world.class_of)) if world.class_of[pid] == "byzantine"}
        byz_blocks = 0
        for i in range(1, len(world.dag)):
            block = world.dag.block_at(i)
            if block.sender not in coalition:
                continue
            byz_blocks += 1
            for leaf in block.leaves:
                assert world.dag.get(leaf).sender in coalition
        assert byz_blocks > 5

    def test_builds_more_blocks_than_fair_share(self):
        cfg = SimConfig(n_players=21, slots=900, w=4, x_commit=6, runs=1)
        per_byz = per_alt = 0.0
        for seed_key in [(3,), (4,), (5,)]:
            world, _, _ = drive(cfg, n_byz=6, seed_key=seed_key)
            counts = {"byzantine": 0, "altruistic": 0}
            for i in range(1, len(world.dag)):
                counts[world.class_of[world.sender_of(i)]] += 1
            per_byz += counts["byzantine"] / 6
            per_alt += counts["altruistic"] / (cfg.n_players - 6)
        assert per_byz > per_alt

    def test_empty_coalition_is_inert(self):
        world = World(SMALL, 0, 0, np.random.SeedSequence(0))
        coalition = ByzantineCoalition(members=(), view=0)
        assert coalition.step(world, 1) == []


class TestRational:
    def test_singleton_publishes_like_a_protocol_follower(self):
        world, _, rat = drive(SMALL, n_rat=1, seed_key=(4,))
        assert rat.private == [] and rat.fodder == [] and rat.dead == set()
        for i in range(1, len(world.dag)):
            if world.class_of[world.sender_of(i)] == "rational":
                assert world.is_public[i]

    def test_coalition_never_pays_punishment_on_small_runs(self):
        for seed_key in [(20,), (21,), (22,)]:
            out = run_detailed(SMALL, n_rat=7, seed_key=seed_key)
            for _, pay, cls in out.payoff_rows:
                if cls == "rational":
                    assert pay.pun_count == 0
                    assert pay.bigpun_count == 0

    def test_withheld_blocks_stay_hidden_unless_revealed(self):
        world, _, rat = drive(SMALL, n_rat=7, seed_key=(5,))
        for idx in rat.dead:
            assert not world.is_public[idx]
        for idx in rat.private + rat.fodder:
            assert not world.is_public[idx]

    def test_no_duplicate_draw_per_root_and_depth(self):
        world, _, _ = drive(SMALL, n_rat=7, seed_key=(6,))
        seen = set()
        for i in range(1, len(world.dag)):
            block = world.dag.block_at(i)
            if world.class_of[block.sender] != "rational":
                continue
            key = (block.sender, block.prev, block.proof.redraw_depth)
            assert key not in seen
            seen.add(key)

    def test_empty_coalition_is_inert(self):
        world = World(SMALL, 0, 0, np.random.SeedSequence(0))
        coalition = RationalCoalition(members=(), view=0)
        assert coalition.step(world, 1) == []


class TestCoalitionAdvantage:
    def test_rational_coalition_gains_over_time(self):
        cfg = SimConfig(n_players=21, slots=900, w=4, x_commit=6, runs=1)
        totals = []
        for seed_key in [(30,), (31,), (32,)]:
            out = run_detailed(cfg, n_rat=7, seed_key=seed_key)
            totals.append(
                out.metrics.payoffs["coalition"] / max(1e-9, out.metrics.payoffs["altruistic"])
            )
        assert sum(totals) / len(totals) > 0.9
