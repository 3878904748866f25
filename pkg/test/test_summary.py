#!/usr/bin/env python3
"""
Tests for the summary-statistics framework and the bundled neighbor-mean spec

Usage: pytest test/test_summary.py
"""

import pytest
import os
import sys
from dataclasses import replace

import numpy as np

# Add the parent directory to the path to import the streambp package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from streambp.evaluation import accuracy
from streambp.model import SymmetricParams, sample
from streambp.runner import replay
from streambp.summary import (
    SummaryNumericError,
    SummarySpecError,
    SummaryState,
    check_lipschitz,
    load_summary_spec,
    neighbor_mean_spec,
    summary_estimate,
)

# 0 - 1, 1 - 2, 1 - 3, 2 - 4, 3 - 4, then vertex 5 joins 2 and 4
ARRIVALS = [[], [0], [1], [1], [2, 3], [2, 4]]


def keep_vertex(i, view):
    return view.vertex_states[i]


def keep_edge(key, view):
    return view.edge_states[key]


def scripted_spec(values, **changes):
    """Neighbor-mean spec whose initial vertex states come from ``values`` in order and edges start at 0.5."""
    pending = iter(values)
    spec = neighbor_mean_spec(noise=0.0)
    return replace(
        spec,
        init_vertex=lambda rng, m: np.array([next(pending)]),
        init_edge=lambda rng, m: np.array([0.5]),
        **changes,
    )


@pytest.mark.unit
class TestSummaryState:

    def setup_method(self):
        self.instance = sample(SymmetricParams(n=500, k=2, a=4.0, b=1.0, alpha=0.3), 3)

    def test_identity_update_keeps_initial_states(self):
        spec = scripted_spec([0.2, 0.4, 0.6, 0.8, 1.0, 0.0], update_vertex=keep_vertex, update_edge=keep_edge)
        state = SummaryState(spec, k=2)
        for earlier in ARRIVALS:
            state.insert(None, earlier)
        assert state.w_bar == pytest.approx([0.5])
        assert state.e_bar == pytest.approx([0.5])
        # 13 vertex updates and 7 edge updates over the six arrivals
        assert state.messages_touched == 20

    def test_neighbor_mean_arrival(self):
        values = [0.2, 0.4, 0.6, 0.8, 1.0, 0.0]
        state = SummaryState(scripted_spec(values, update_vertex=keep_vertex, update_edge=keep_edge), k=2)
        for earlier in ARRIVALS[:-1]:
            state.insert(None, earlier)
        state.spec = scripted_spec(values[-1:])
        state.insert(None, ARRIVALS[-1])

        # averages seen by the update include the new vertex: (0.2 + 0.4 + 0.6 + 0.8 + 1.0 + 0.0) / 6 = 0.5
        # vertices 5, 2 and 4 each average the states 0.6, 1.0 and 0.0
        for v in (2, 4, 5):
            assert state.w[v] == pytest.approx([1.6 / 3])
        for v, value in ((0, 0.2), (1, 0.4), (3, 0.8)):
            assert state.w[v] == pytest.approx([value])
        assert state.e[(2, 5)] == pytest.approx([0.3])
        assert state.e[(4, 5)] == pytest.approx([0.5])
        assert state.e[(0, 1)] == pytest.approx([0.5])
        assert state.w_bar == pytest.approx([0.5])
        assert state.e_bar == pytest.approx([3.3 / 7])

    def test_empty_edge_set(self):
        seen = []

        def record(i, view):
            seen.append((view.e_bar_defined, view.e_bar.copy()))
            return view.vertex_states[i]

        state = SummaryState(replace(neighbor_mean_spec(), update_vertex=record), k=2)
        state.insert(0, [])
        assert seen[0][0] is False
        assert np.array_equal(seen[0][1], np.zeros(1))
        assert not state.e_bar_defined
        state.insert(0, [0])
        assert state.e_bar_defined

    def test_running_means_match_batch(self):
        state = SummaryState(neighbor_mean_spec(), k=2, seed=4)
        replay(state, self.instance.graph, self.instance.tau_tilde)
        w_mean, e_mean = state.batch_means()
        assert np.allclose(state.w_bar, w_mean, atol=1e-9)
        assert np.allclose(state.e_bar, e_mean, atol=1e-9)

    def test_range_cap_enforced(self):
        def everything(graph, ball, max_range):
            center = ball.center
            return [center] + ball.shells[1], [(min(center, u), max(center, u)) for u in ball.shells[1]]

        state = SummaryState(replace(neighbor_mean_spec(max_range=3), select_range=everything), k=2)
        state.insert(0, [])
        state.insert(0, [0])
        with pytest.raises(SummarySpecError):
            state.insert(0, [0, 1])

    def test_range_outside_ball_rejected(self):
        def far(graph, ball, max_range):
            return [ball.center, 0], []

        state = SummaryState(replace(neighbor_mean_spec(), select_range=far), k=2)
        state.insert(0, [])
        state.insert(0, [0])
        with pytest.raises(SummarySpecError):
            state.insert(0, [])

    def test_non_finite_update(self):
        state = SummaryState(replace(neighbor_mean_spec(), update_vertex=lambda i, view: np.array([np.nan])), k=2)
        with pytest.raises(SummaryNumericError):
            state.insert(0, [])

    def test_wrong_shape_update(self):
        state = SummaryState(replace(neighbor_mean_spec(), update_vertex=lambda i, view: np.zeros(2)), k=2)
        with pytest.raises(SummarySpecError):
            state.insert(0, [])

    def test_bound_violations_counted(self):
        state = SummaryState(neighbor_mean_spec(output_bound=0.1), k=2, seed=1)
        replay(state, self.instance.graph, self.instance.tau_tilde)
        assert state.bound_violations > 0

    def test_estimate_is_reproducible(self):
        state = SummaryState(neighbor_mean_spec(), k=3, seed=7)
        replay(state, self.instance.graph, self.instance.tau_tilde)
        first, second = state.finalize(), state.finalize()
        assert np.array_equal(first.labels, second.labels)
        assert set(first.labels.tolist()) <= {0, 1, 2}

    def test_noise_free_estimate_of_equal_states(self):
        spec = replace(neighbor_mean_spec(noise=0.0), init_vertex=lambda rng, m: np.array([0.25]),
                       update_vertex=keep_vertex)
        state = SummaryState(spec, k=2)
        for earlier in ARRIVALS:
            state.insert(None, earlier)
        assert summary_estimate(state, seed=0).labels.tolist() == [0] * 6

    def test_large_noise_hides_informative_states(self):
        rng = np.random.default_rng(12)
        truth = rng.integers(0, 2, size=4000)
        spec = replace(neighbor_mean_spec(noise=0.0), update_vertex=keep_vertex, update_edge=keep_edge)
        state = SummaryState(spec, k=2)
        for _ in truth:
            state.insert(None, [])
        for v, label in enumerate(truth):
            state.w[v] = np.array([0.25 + 0.5 * label])

        assert accuracy(summary_estimate(state, seed=1), truth, 2).accuracy == 1.0
        state.spec = replace(spec, noise=10.0)
        assert accuracy(summary_estimate(state, seed=1), truth, 2).accuracy <= 0.5 + 0.05


@pytest.mark.unit
class TestSpecs:

    def test_neighbor_mean_within_lipschitz_bound(self):
        report = check_lipschitz(neighbor_mean_spec(), samples=300, seed=2)
        assert report.violations == 0
        assert report.max_ratio <= 1.0 + 1e-6

    def test_steep_update_flagged(self):
        def steep(i, view):
            states = [view.vertex_states[i]] + [view.vertex_states[j] for j in view.adjacency[i]]
            return 20.0 * np.mean(states, axis=0)

        report = check_lipschitz(replace(neighbor_mean_spec(), update_vertex=steep), samples=300, seed=2)
        assert report.violations > 0
        assert report.max_ratio > 2.0

    def test_load_bundled_spec(self):
        spec = load_summary_spec("neighbor-mean")
        assert spec.name == "neighbor-mean"
        assert spec.m == 1
        assert load_summary_spec("neighbor-mean", radius=2).radius == 2

    def test_unknown_spec(self):
        with pytest.raises(SummarySpecError):
            load_summary_spec("no-such-spec")

    def test_invalid_spec(self):
        with pytest.raises(SummarySpecError):
            replace(neighbor_mean_spec(), m=0)
