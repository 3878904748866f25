import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from streambp.config import get_summary_config
from streambp.evaluation import Estimates
from streambp.graph import NeighborhoodBall, StreamingGraph

logger = logging.getLogger(__name__)

EdgeKey = Tuple[int, int]


class SummarySpecError(ValueError):
    """Raised for malformed summary specs or an oversized range of action"""
    pass


class SummaryNumericError(ValueError):
    """Raised when an update map returns a non-finite state"""
    pass


@dataclass
class SummaryView:
    """
    Everything an update map may read on one arrival: the previous states inside the range of
    action, adjacency restricted to that range, and the two global averages. When no edge has
    arrived yet ``e_bar`` is a zero vector and ``e_bar_defined`` is False.
    """
    arrival: int
    side_label: Optional[int]
    vertex_states: Dict[int, np.ndarray]
    edge_states: Dict[EdgeKey, np.ndarray]
    adjacency: Dict[int, List[int]]
    w_bar: np.ndarray
    e_bar: np.ndarray
    e_bar_defined: bool


RangeSelector = Callable[[StreamingGraph, NeighborhoodBall, int], Tuple[List[int], List[EdgeKey]]]


@dataclass
class SummarySpec:
    """A local streaming algorithm with bounded per-vertex and per-edge state plus global averages."""
    name: str
    m: int
    radius: int
    max_range: int
    init_vertex: Callable[[np.random.Generator, int], np.ndarray]
    init_edge: Callable[[np.random.Generator, int], np.ndarray]
    select_range: RangeSelector
    update_vertex: Callable[[int, SummaryView], np.ndarray]
    update_edge: Callable[[EdgeKey, SummaryView], np.ndarray]
    estimator: Callable[[np.ndarray, int], int]
    noise: float = 0.0
    lipschitz_bound: float = math.inf
    output_bound: float = math.inf

    def __post_init__(self):
        if self.m < 1:
            raise SummarySpecError(f"State dimension must be positive, got {self.m}")
        if self.radius < 0:
            raise SummarySpecError(f"Radius must be non-negative, got {self.radius}")
        if self.max_range < 1:
            raise SummarySpecError(f"Range of action cap must be positive, got {self.max_range}")
        if self.noise < 0:
            raise SummarySpecError(f"Noise magnitude must be non-negative, got {self.noise}")


def edge_key(u: int, v: int) -> EdgeKey:
    return (u, v) if u < v else (v, u)


class SummaryState:
    """
    Per-vertex and per-edge state vectors with running averages ``w_bar`` and ``e_bar``.

    Initial states are drawn from a generator seeded by ``seed``; the estimate noise uses an
    independent stream derived from the same seed.
    """

    def __init__(self, spec: SummarySpec, k: int, seed: int = 0):
        self.spec = spec
        self.k = k
        self.seed = seed
        init_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(init_seq)
        self.noise_seed = int(noise_seq.generate_state(1)[0])
        self.graph = StreamingGraph()
        self.side: Dict[int, Optional[int]] = {}
        self.w: Dict[int, np.ndarray] = {}
        self.e: Dict[EdgeKey, np.ndarray] = {}
        self._w_sum = np.zeros(spec.m)
        self._e_sum = np.zeros(spec.m)
        self.bound_violations = 0
        self.messages_touched = 0

    @property
    def name(self) -> str:
        return f"summary:{self.spec.name}"

    @property
    def w_bar(self) -> np.ndarray:
        if not self.w:
            return np.zeros(self.spec.m)
        return self._w_sum / len(self.w)

    @property
    def e_bar_defined(self) -> bool:
        return bool(self.e)

    @property
    def e_bar(self) -> np.ndarray:
        if not self.e:
            return np.zeros(self.spec.m)
        return self._e_sum / len(self.e)

    def batch_means(self) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Averages recomputed from scratch, for checking the running ones."""
        w_mean = np.mean(np.stack(list(self.w.values())), axis=0) if self.w else np.zeros(self.spec.m)
        e_mean = np.mean(np.stack(list(self.e.values())), axis=0) if self.e else None
        return w_mean, e_mean

    def _checked(self, value, what: str) -> np.ndarray:
        state = np.asarray(value, dtype=float)
        if state.shape != (self.spec.m,):
            raise SummarySpecError(f"{what}: expected a state of shape ({self.spec.m},), got {state.shape}")
        if not np.isfinite(state).all():
            raise SummaryNumericError(f"{what}: update produced a non-finite state {state}")
        if np.abs(state).max() > self.spec.output_bound:
            self.bound_violations += 1
            logger.warning(f"{what}: state {state} exceeds the declared bound {self.spec.output_bound}")
        return state

    def insert(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        spec = self.spec
        step = self.graph.insert_vertex(new_edges, vertex=vertex)
        v = self.graph.arrival_order[-1]
        self.side[v] = side_label

        state = self._checked(spec.init_vertex(self.rng, spec.m), f"initial state of vertex {v}")
        self.w[v] = state
        self._w_sum += state
        for u in sorted(int(u) for u in new_edges):
            key = edge_key(u, v)
            state = self._checked(spec.init_edge(self.rng, spec.m), f"initial state of edge {key}")
            self.e[key] = state
            self._e_sum += state

        ball = self.graph.ball(v, spec.radius)
        vertices, edges = spec.select_range(self.graph, ball, spec.max_range)
        if len(vertices) + len(edges) > spec.max_range:
            raise SummarySpecError(
                f"Range of action has {len(vertices)} vertices and {len(edges)} edges, cap is {spec.max_range}"
            )
        for i in vertices:
            if i not in ball.distance:
                raise SummarySpecError(f"Vertex {i} in the range of action lies outside the radius-{spec.radius} ball")
        for key in edges:
            if key not in self.e or key[0] not in ball.distance or key[1] not in ball.distance:
                raise SummarySpecError(f"Edge {key} in the range of action is not an edge of the ball")

        in_range = set(vertices)
        view = SummaryView(
            arrival=v,
            side_label=side_label,
            vertex_states={i: self.w[i].copy() for i in vertices},
            edge_states={key: self.e[key].copy() for key in edges},
            adjacency={i: [j for j in self.graph.neighbors(i) if j in in_range] for i in vertices},
            w_bar=self.w_bar,
            e_bar=self.e_bar,
            e_bar_defined=self.e_bar_defined,
        )
        new_w = {i: self._checked(spec.update_vertex(i, view), f"vertex {i}") for i in vertices}
        new_e = {key: self._checked(spec.update_edge(key, view), f"edge {key}") for key in edges}

        for i, state in new_w.items():
            self._w_sum += state - self.w[i]
            self.w[i] = state
        for key, state in new_e.items():
            self._e_sum += state - self.e[key]
            self.e[key] = state
        self.messages_touched += len(new_w) + len(new_e)
        return step

    def finalize(self) -> Estimates:
        return summary_estimate(self, self.noise_seed)


def summary_estimate(state: SummaryState, seed: int) -> Estimates:
    """Label every vertex by the spec's estimator applied to its state plus uniform noise on [-noise, noise]^m."""
    spec = state.spec
    vertices = sorted(state.w)
    if not vertices:
        return Estimates(vertices=np.empty(0, dtype=np.int64), labels=np.empty(0, dtype=np.int64))
    states = np.stack([state.w[v] for v in vertices])
    noise = np.random.default_rng(seed).uniform(-1.0, 1.0, size=states.shape)
    perturbed = states + spec.noise * noise
    labels = np.array([spec.estimator(x, state.k) for x in perturbed], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= state.k:
        raise SummarySpecError(f"Estimator of '{spec.name}' returned labels outside [0, {state.k})")
    return Estimates(vertices=np.array(vertices, dtype=np.int64), labels=labels)


@dataclass
class LipschitzReport:
    samples: int
    max_ratio: float
    violations: int
    bound: float
    worst: List[Tuple[str, float]] = field(default_factory=list)


def check_lipschitz(spec: SummarySpec, samples: int = 200, seed: int = 0, degree: int = 4, step: float = 1e-3) -> LipschitzReport:
    """
    Estimate how fast ``update_vertex`` reacts to its inputs by finite differences on random
    star-shaped views, and count slopes above ``spec.lipschitz_bound``. This only flags
    obvious violations; it cannot certify a bound.
    """
    rng = np.random.default_rng(seed)
    m = spec.m
    max_ratio = 0.0
    violations = 0
    worst: List[Tuple[str, float]] = []
    leaves = list(range(1, degree + 1))
    for _ in range(samples):
        states = {i: rng.uniform(0.0, 1.0, size=m) for i in range(degree + 1)}
        view = SummaryView(
            arrival=0,
            side_label=None,
            vertex_states=states,
            edge_states={},
            adjacency={0: leaves, **{j: [0] for j in leaves}},
            w_bar=rng.uniform(0.0, 1.0, size=m),
            e_bar=np.zeros(m),
            e_bar_defined=False,
        )
        target = int(rng.integers(0, degree + 1))
        base = np.asarray(spec.update_vertex(target, view), dtype=float)

        delta = rng.uniform(-step, step, size=m)
        moved = int(rng.integers(0, degree + 2))
        if moved <= degree:
            perturbed_states = dict(states)
            perturbed_states[moved] = states[moved] + delta
            perturbed = replace(view, vertex_states=perturbed_states)
            what = f"vertex {moved} -> vertex {target}"
        else:
            perturbed = replace(view, w_bar=view.w_bar + delta)
            what = f"w_bar -> vertex {target}"
        shifted = np.asarray(spec.update_vertex(target, perturbed), dtype=float)

        ratio = float(np.abs(shifted - base).max() / np.abs(delta).max())
        max_ratio = max(max_ratio, ratio)
        if ratio > spec.lipschitz_bound * (1.0 + 1e-9):
            violations += 1
            worst.append((what, ratio))

    if violations:
        logger.warning(f"Summary spec '{spec.name}': {violations}/{samples} slopes exceed {spec.lipschitz_bound}")
    return LipschitzReport(samples=samples, max_ratio=max_ratio, violations=violations, bound=spec.lipschitz_bound, worst=worst)


def _uniform_state(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=m)


def star_range(graph: StreamingGraph, ball: NeighborhoodBall, max_range: int) -> Tuple[List[int], List[EdgeKey]]:
    """The arriving vertex, its lowest-id neighbors and the edges to them, within ``max_range`` entries."""
    center = ball.center
    neighbors = ball.shells[1] if ball.radius >= 1 else []
    kept = neighbors[:max(0, (max_range - 1) // 2)]
    return [center] + list(kept), [edge_key(center, u) for u in kept]


def _neighbor_mean_vertex(i: int, view: SummaryView) -> np.ndarray:
    states = [view.vertex_states[i]] + [view.vertex_states[j] for j in view.adjacency[i]]
    return np.clip(np.mean(states, axis=0) - view.w_bar + 0.5, 0.0, 1.0)


def _neighbor_mean_edge(key: EdgeKey, view: SummaryView) -> np.ndarray:
    return 0.5 * (view.vertex_states[key[0]] + view.vertex_states[key[1]])


def _binned_label(x: np.ndarray, k: int) -> int:
    return int(min(max(math.floor(float(x[0]) * k), 0), k - 1))


def neighbor_mean_spec(
    radius: int = 1,
    max_range: int = 64,
    noise: float = 0.01,
    lipschitz_bound: float = 2.0,
    output_bound: float = 1.0,
) -> SummarySpec:
    """
    One-dimensional states in [0, 1], uniform at start. On each arrival the new vertex and its
    neighbors replace their state by the local mean recentred on the global mean; edges hold
    the mean of their endpoints. Labels come from splitting [0, 1] into k equal bins. The spec
    never reads side labels.
    """
    return SummarySpec(
        name="neighbor-mean",
        m=1,
        radius=radius,
        max_range=max_range,
        init_vertex=_uniform_state,
        init_edge=_uniform_state,
        select_range=star_range,
        update_vertex=_neighbor_mean_vertex,
        update_edge=_neighbor_mean_edge,
        estimator=_binned_label,
        noise=noise,
        lipschitz_bound=lipschitz_bound,
        output_bound=output_bound,
    )


SUMMARY_SPECS: Dict[str, Callable[..., SummarySpec]] = {
    "neighbor-mean": neighbor_mean_spec,
}


def load_summary_spec(name: str, **overrides) -> SummarySpec:
    """Build a bundled spec by name, with parameters from ``algorithms.json`` and ``overrides`` on top."""
    if name not in SUMMARY_SPECS:
        raise SummarySpecError(f"Unknown summary spec '{name}'. Available: {sorted(SUMMARY_SPECS)}")
    parameters = get_summary_config(name)
    parameters.update(overrides)
    return SUMMARY_SPECS[name](**parameters)
