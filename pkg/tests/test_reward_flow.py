"""Share propagation and budget tests, pinned to hand-worked examples."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagmarl.dag import DagTopology
from dagmarl.reward_flow import (RewardBaseline, RgdOutput, ShareTable,
                                 distribute, sink_initial_shares, split_share,
                                 synthetic_budget, update_baseline)

FAN = DagTopology(3, [(0, 1), (0, 2)])  # node 0 feeds sinks 1 and 2


def random_dag(rng, node_count):
    order = rng.permutation(node_count)
    arcs = []
    for i in range(node_count):
        for j in range(i + 1, node_count):
            if rng.random() < 0.4:
                arcs.append((int(order[i]), int(order[j])))
    return arcs


class TestBudget:
    def test_frozen_examples(self):
        assert synthetic_budget(
            0.5, RewardBaseline(200.0, 10.0)) == pytest.approx(10.0)
        assert synthetic_budget(
            1.0, RewardBaseline(37.5, 30.0)) == pytest.approx(1.25)

    def test_initial_baseline_gives_zero(self):
        assert synthetic_budget(1.0, RewardBaseline()) == 0.0

    def test_negative_baseline_clamps_to_zero(self):
        assert synthetic_budget(0.7, RewardBaseline(-500.0, 10.0)) == 0.0

    def test_monotone_in_q(self):
        baseline = RewardBaseline(80.0, 8.0)
        budgets = [synthetic_budget(q, baseline)
                   for q in np.linspace(0.0, 1.0, 11)]
        assert budgets == sorted(budgets)
        assert budgets[0] == 0.0
        assert budgets[-1] == pytest.approx(10.0)

    def test_rejects_q_outside_unit_interval(self):
        with pytest.raises(ValueError):
            synthetic_budget(1.2, RewardBaseline(10.0, 1.0))
        with pytest.raises(ValueError):
            synthetic_budget(-0.1, RewardBaseline(10.0, 1.0))

    def test_update_baseline_replaces_wholesale(self):
        b0 = RewardBaseline()
        b1 = update_baseline(b0, 120.0, 6)
        assert b1.total_reward == 120.0 and b1.goal_periods == 6.0
        b2 = update_baseline(b1, -30.0, 3)
        # only the previous episode counts, no running average
        assert b2.total_reward == -30.0 and b2.goal_periods == 3.0

    def test_update_baseline_needs_periods(self):
        with pytest.raises(ValueError):
            update_baseline(RewardBaseline(), 1.0, 0)


class TestRgdOutput:
    def test_values_clamped_to_unit_interval(self):
        out = RgdOutput(0.5, np.array([-0.5, 1.7, 0.3]), np.array([2.0, -1.0]))
        assert np.all((out.node_values >= 0.0) & (out.node_values <= 1.0))
        assert np.all((out.arc_values >= 0.0) & (out.arc_values <= 1.0))
        np.testing.assert_array_equal(out.node_values, [0.0, 1.0, 0.3])

    def test_sink_initial_shares_proportional(self):
        diamond = DagTopology(4, [(0, 2), (1, 2), (2, 3)])
        shares = sink_initial_shares(diamond, np.array([0.1, 0.2, 0.3, 0.2]))
        assert shares == {3: pytest.approx(1.0)}
        # spec example: two sinks valued 0.6 / 0.2 split 0.75 / 0.25
        shares = sink_initial_shares(FAN, np.array([0.4, 0.6, 0.2]))
        assert shares[1] == pytest.approx(0.75)
        assert shares[2] == pytest.approx(0.25)

    def test_all_zero_sinks_split_uniformly(self):
        shares = sink_initial_shares(FAN, np.zeros(3))
        assert shares[1] == pytest.approx(0.5)
        assert shares[2] == pytest.approx(0.5)


class TestSplitShare:
    def test_frozen_example(self):
        # initial 0.75, node value 0.6, one arc at 0.2:
        # keep 0.75 * 0.6/0.8 = 0.5625, send 0.1875
        kept, sent = split_share(0.75, 0.6, [0.2])
        assert kept == pytest.approx(0.5625)
        assert sent[0] == pytest.approx(0.1875)

    def test_degenerate_uniform(self):
        kept, sent = split_share(0.6, 0.0, [0.0, 0.0])
        assert kept == pytest.approx(0.2)
        assert sent[0] == pytest.approx(0.2) and sent[1] == pytest.approx(0.2)

    def test_no_parents_keeps_all(self):
        kept, sent = split_share(0.4, 0.0, [])
        assert kept == pytest.approx(0.4)
        assert sent == []

    def test_conserves_mass(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            init = float(rng.uniform(0, 1))
            v = float(rng.uniform(0, 1))
            arcs = list(rng.uniform(0, 1, size=rng.integers(0, 4)))
            kept, sent = split_share(init, v, arcs)
            assert kept + sum(sent) == pytest.approx(init, abs=1e-12)


class TestDistribute:
    def test_fan_frozen_example(self):
        # 0 -> 1, 0 -> 2 with v = (0.4, 0.6, 0.2), both arcs 0.2, budget 8:
        # shares (0.3125, 0.5625, 0.125), rewards (2.5, 4.5, 1.0)
        output = RgdOutput(1.0, np.array([0.4, 0.6, 0.2]),
                           np.array([0.2, 0.2]))
        table, sr = distribute(FAN, output, 8.0)
        np.testing.assert_allclose(table.node_share,
                                   [0.3125, 0.5625, 0.125], atol=1e-12)
        np.testing.assert_allclose(sr, [2.5, 4.5, 1.0], atol=1e-12)

    def test_zero_budget_zero_rewards(self):
        output = RgdOutput(0.0, np.array([0.4, 0.6, 0.2]),
                           np.array([0.2, 0.2]))
        table, sr = distribute(FAN, output, 0.0)
        np.testing.assert_array_equal(sr, np.zeros(3))
        # shares still a valid distribution
        assert table.node_share.sum() == pytest.approx(1.0)

    def test_chain_passes_share_upstream(self):
        chain = DagTopology(3, [(0, 1), (1, 2)])
        output = RgdOutput(1.0, np.array([0.0, 0.0, 0.5]),
                           np.array([1.0, 1.0]))
        table, sr = distribute(chain, output, 4.0)
        # sink keeps 0.5/(0.5+1) = 1/3; middle gets 2/3, keeps nothing
        # (v=0 but arc=1), passes 2/3 on; source keeps everything received
        assert table.node_share[2] == pytest.approx(1.0 / 3.0)
        assert table.node_share[1] == pytest.approx(0.0)
        assert table.node_share[0] == pytest.approx(2.0 / 3.0)
        assert sr.sum() == pytest.approx(4.0)

    def test_conservation_random(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            n = int(rng.integers(2, 13))
            topo = DagTopology(n, random_dag(rng, n))
            output = RgdOutput(float(rng.uniform(0, 1)),
                               rng.uniform(0, 1, size=n),
                               rng.uniform(0, 1, size=len(topo.arcs)))
            budget = float(rng.uniform(0, 50))
            table, sr = distribute(topo, output, budget)
            assert abs(table.node_share.sum() - 1.0) <= 1e-9
            assert abs(sr.sum() - budget) <= 1e-9 * max(budget, 1.0)
            assert np.all(sr >= 0.0)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 10), st.integers(0, 10 ** 6))
    def test_conservation_property(self, n, seed):
        rng = np.random.default_rng(seed)
        topo = DagTopology(n, random_dag(rng, n))
        output = RgdOutput(float(rng.uniform(0, 1)),
                           rng.uniform(0, 1, size=n),
                           rng.uniform(0, 1, size=len(topo.arcs)))
        table, sr = distribute(topo, output, 10.0)
        assert abs(table.node_share.sum() - 1.0) <= 1e-9
        assert abs(sr.sum() - 10.0) <= 1e-8

    def test_arc_share_keys_reward_oriented(self):
        output = RgdOutput(1.0, np.array([0.4, 0.6, 0.2]),
                           np.array([0.2, 0.2]))
        table, _ = distribute(FAN, output, 1.0)
        # reward flows sink -> source, so keys are (sender, receiver)
        assert (1, 0) in table.arc_share
        assert (2, 0) in table.arc_share

    def test_rejects_wrong_lengths(self):
        with pytest.raises(ValueError):
            distribute(FAN, RgdOutput(0.5, np.array([0.1, 0.2]),
                                      np.array([0.3, 0.3])), 1.0)
        with pytest.raises(ValueError):
            distribute(FAN, RgdOutput(0.5, np.array([0.1, 0.2, 0.3]),
                                      np.array([0.3])), 1.0)
        with pytest.raises(ValueError):
            distribute(FAN, RgdOutput(0.5, np.array([0.1, 0.2, 0.3]),
                                      np.array([0.3, 0.3])), -1.0)
