#!/usr/bin/env python3
"""
Tests for streaming BP (StreamBP) and bounded-distance streaming BP (StreamBP*)

Usage: pytest test/test_online_bp.py
"""

import pytest
import os
import sys

import numpy as np

# Add the parent directory to the path to import the streambp package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from streambp.bp_kernel import BpDomainError, KernelParams, LabelError, bp_combine, uniform_belief
from streambp.graph import InvalidEdgeError, StreamingGraph
from streambp.model import SymmetricParams, sample
from streambp.online_bp import MessageStore, StreamBP, StreamBPStar
from streambp.runner import replay
from streambp.tools.posterior import exact_marginals


def random_tree(n, rng):
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    order = rng.permutation(n).tolist()
    return StreamingGraph.from_arrivals(order, edges)


@pytest.mark.unit
class TestMessageStore:

    def setup_method(self):
        self.store = MessageStore()
        for v in (0, 1, 2):
            self.store.add_vertex(v)
        self.store.add_edge(0, 1, "0->1", "1->0")
        self.store.add_edge(1, 2, "1->2", "2->1")

    def test_get_and_inbox(self):
        assert self.store.get(0, 1) == "0->1"
        assert self.store.get(1, 0) == "1->0"
        assert self.store.inbox(1) == {0: "0->1", 2: "2->1"}
        assert len(self.store) == 4

    def test_others_excludes_receiver(self):
        assert self.store.others(1, 2) == ["0->1"]

    def test_set_requires_edge(self):
        self.store.set(2, 1, "new")
        assert self.store.get(2, 1) == "new"
        with pytest.raises(KeyError):
            self.store.set(0, 2, "missing")


@pytest.mark.unit
class TestStreamBP:
    """Single-message streaming BP"""

    def setup_method(self):
        self.params = KernelParams(a=5.0, b=1.0, alpha=0.3, k=2, eps=0.0)

    def test_isolated_vertex_uses_side_label(self):
        algorithm = StreamBP(self.params, radius=2)
        algorithm.insert(1, [])
        estimates = algorithm.finalize()
        assert estimates.labels.tolist() == [1]
        assert algorithm.messages_touched == 0

    def test_two_vertex_trace(self):
        for engine in ("probability", "llr"):
            algorithm = StreamBP(self.params, radius=1, engine=engine)
            algorithm.insert(1, [])
            algorithm.insert(0, [0])
            estimates = algorithm.finalize()
            # vertex 0: (0.3, 0.7) * (1 + 4 * 0.7, 1 + 4 * 0.3); vertex 1 mirrored
            assert np.allclose(estimates.beliefs[0], np.array([1.14, 1.54]) / 2.68)
            assert np.allclose(estimates.beliefs[1], np.array([1.54, 1.14]) / 2.68)
            assert estimates.labels.tolist() == [1, 0]

    def test_certain_side_labels(self):
        params = KernelParams(a=5.0, b=1.0, alpha=0.0, k=2, eps=0.0)
        algorithm = StreamBP(params, radius=1, engine="probability")
        algorithm.insert(0, [])
        algorithm.insert(0, [0])
        assert np.allclose(algorithm.messages.get(1, 0), [1.0, 0.0])
        assert algorithm.finalize().labels.tolist() == [0, 0]

    def test_message_count_tracks_edges(self):
        instance = sample(SymmetricParams(n=150, k=2, a=4.0, b=1.0, alpha=0.2), 4)
        algorithm = StreamBP(self.params, radius=2)
        for vertex, earlier in instance.graph.arrivals():
            algorithm.insert(int(instance.tau_tilde[vertex]), earlier, vertex=vertex)
            assert len(algorithm.messages) == 2 * algorithm.graph.num_edges

    def test_work_bound(self):
        instance = sample(SymmetricParams(n=150, k=2, a=4.0, b=1.0, alpha=0.2), 8)
        algorithm = StreamBP(self.params, radius=3)
        for vertex, earlier in instance.graph.arrivals():
            algorithm.insert(int(instance.tau_tilde[vertex]), earlier, vertex=vertex)
            ball = algorithm.graph.ball(vertex, 3)
            assert algorithm.last_touched <= 2 * algorithm.graph.ball_edge_count(ball)

    def test_exact_on_trees(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(2, 11))
            graph = random_tree(n, rng)
            side = rng.integers(0, 2, size=n).tolist()
            params = KernelParams(a=float(rng.uniform(1, 6)), b=float(rng.uniform(0.2, 3)),
                                  alpha=float(rng.uniform(0.05, 0.45)), k=2, eps=0.0)
            expected = exact_marginals(graph, side, params)
            for engine in ("probability", "llr"):
                estimates = replay(StreamBP(params, radius=n, engine=engine), graph, side)
                assert np.allclose(estimates.beliefs, expected, atol=1e-9)

    def test_exact_on_trees_three_communities(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            n = int(rng.integers(2, 8))
            graph = random_tree(n, rng)
            side = rng.integers(0, 3, size=n).tolist()
            params = KernelParams(a=float(rng.uniform(1, 6)), b=float(rng.uniform(0.2, 3)),
                                  alpha=float(rng.uniform(0.05, 0.6)), k=3, eps=0.0)
            estimates = replay(StreamBP(params, radius=n), graph, side)
            assert np.allclose(estimates.beliefs, exact_marginals(graph, side, params), atol=1e-9)

    def test_invalid_label_leaves_state_untouched(self):
        algorithm = StreamBP(self.params, radius=1)
        algorithm.insert(0, [])
        with pytest.raises(LabelError):
            algorithm.insert(2, [0])
        with pytest.raises(InvalidEdgeError):
            algorithm.insert(0, [5])
        assert algorithm.graph.num_vertices == 1
        assert len(algorithm.messages) == 0

    def test_contradictory_certain_messages(self):
        graph = StreamingGraph.from_arrivals([0, 1], [(0, 1)])
        params = KernelParams(a=1.0, b=0.0, alpha=0.0, k=2, eps=0.0)
        for engine in ("probability", "llr"):
            with pytest.raises(BpDomainError):
                replay(StreamBP(params, radius=1, engine=engine), graph, [0, 1])

    def test_deterministic(self):
        instance = sample(SymmetricParams(n=300, k=2, a=4.0, b=1.0, alpha=0.2), 2)
        params = KernelParams(a=4.0, b=1.0, alpha=0.2, k=2)
        first = replay(StreamBP(params, radius=2), instance.graph, instance.tau_tilde)
        second = replay(StreamBP(params, radius=2), instance.graph, instance.tau_tilde)
        assert np.array_equal(first.beliefs, second.beliefs)


@pytest.mark.unit
class TestStreamBPStar:
    """Layered messages with bounded-distance estimates"""

    def setup_method(self):
        self.params = KernelParams(a=5.0, b=1.0, alpha=0.3, k=2, eps=0.0)

    def test_layer_zero_stays_uniform(self):
        instance = sample(SymmetricParams(n=200, k=3, a=4.0, b=1.0, alpha=0.2), 1)
        params = KernelParams(a=4.0, b=1.0, alpha=0.2, k=3)
        algorithm = StreamBPStar(params, radius=3)
        replay(algorithm, instance.graph, instance.tau_tilde)
        assert len(algorithm.messages) == 2 * instance.graph.num_edges
        for _, layers in algorithm.messages.items():
            assert layers.shape == (4, 3)
            assert np.allclose(layers[0], uniform_belief(3))

    def test_single_edge_messages(self):
        algorithm = StreamBPStar(self.params, radius=2, engine="probability")
        algorithm.insert(1, [])
        algorithm.insert(0, [0])
        message = algorithm.messages.get(1, 0)
        assert np.allclose(message[1], bp_combine([], 0, self.params))
        assert np.allclose(message[2], bp_combine([], 0, self.params))

    def test_contradictory_certain_messages(self):
        graph = StreamingGraph.from_arrivals([0, 1], [(0, 1)])
        params = KernelParams(a=1.0, b=0.0, alpha=0.0, k=2, eps=0.0)
        for engine in ("probability", "llr"):
            with pytest.raises(BpDomainError):
                replay(StreamBPStar(params, radius=2, engine=engine), graph, [0, 1])

    def test_work_bound(self):
        instance = sample(SymmetricParams(n=150, k=2, a=4.0, b=1.0, alpha=0.2), 8)
        algorithm = StreamBPStar(self.params, radius=3)
        for vertex, earlier in instance.graph.arrivals():
            algorithm.insert(int(instance.tau_tilde[vertex]), earlier, vertex=vertex)
            ball = algorithm.graph.ball(vertex, 3)
            assert algorithm.last_touched <= 2 * 4 * algorithm.graph.ball_edge_count(ball)

    def test_exact_on_trees(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            n = int(rng.integers(2, 11))
            graph = random_tree(n, rng)
            side = rng.integers(0, 2, size=n).tolist()
            params = KernelParams(a=float(rng.uniform(1, 6)), b=float(rng.uniform(0.2, 3)),
                                  alpha=float(rng.uniform(0.05, 0.45)), k=2, eps=0.0)
            expected = exact_marginals(graph, side, params)
            for engine in ("probability", "llr"):
                estimates = replay(StreamBPStar(params, radius=n, engine=engine), graph, side)
                assert np.allclose(estimates.beliefs, expected, atol=1e-9)

    def test_far_side_label_has_no_effect(self):
        # path 0 - 1 - 2 - 3 - 4 - 5, radius 2 around vertex 0 stops at vertex 2
        params = KernelParams(a=5.0, b=1.0, alpha=0.2, k=2)
        side = [0, 1, 0, 1, 1, 0]
        flipped = side[:3] + [1 - s for s in side[3:]]
        graph = StreamingGraph.from_arrivals([3, 0, 5, 1, 4, 2], [(i, i + 1) for i in range(5)])
        first = replay(StreamBPStar(params, radius=2), graph, side)
        second = replay(StreamBPStar(params, radius=2), graph, flipped)
        assert np.array_equal(first.beliefs[0], second.beliefs[0])

    def test_locality_on_random_graphs(self):
        rng = np.random.default_rng(5)
        checked = 0
        for trial in range(20):
            instance = sample(SymmetricParams(n=200, k=2, a=3.0, b=1.0, alpha=0.2), trial)
            params = KernelParams(a=3.0, b=1.0, alpha=0.2, k=2)
            radius = int(rng.integers(1, 4))
            center = int(rng.integers(0, 200))
            inside = instance.graph.ball(center, radius).vertices
            outside = [v for v in range(200) if v not in inside]
            if not outside:
                continue
            side = instance.tau_tilde.copy()
            first = replay(StreamBPStar(params, radius=radius), instance.graph, side)
            target = outside[int(rng.integers(0, len(outside)))]
            side[target] = 1 - side[target]
            second = replay(StreamBPStar(params, radius=radius), instance.graph, side)
            assert np.array_equal(first.beliefs[center], second.beliefs[center])
            checked += 1
        assert checked > 0
