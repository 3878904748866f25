import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from streambp.bp_kernel import (
    BpDomainError,
    KernelParams,
    LlrEngine,
    check_label,
    llr_edge_factors,
    log_factors,
    make_engine,
    normalize_logits,
)
from streambp.evaluation import Estimates
from streambp.graph import StreamingGraph

logger = logging.getLogger(__name__)

SideLabels = Union[Sequence[Optional[int]], Mapping[int, Optional[int]]]


@dataclass
class DirectedEdges:
    """
    Both orientations of every edge, addressed by vertex position (index into ``vertices``).

    ``rev[e]`` is the opposite orientation of ``e``. ``canonical`` lists edge indices sorted by
    (receiver, sender); per-vertex sums always accumulate in that order, so they do not depend
    on how the edges themselves are numbered.
    """
    vertices: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    rev: np.ndarray
    canonical: np.ndarray
    indptr: np.ndarray

    @classmethod
    def from_graph(cls, graph: StreamingGraph, edge_order: Optional[Sequence[int]] = None) -> "DirectedEdges":
        vertices = np.array(sorted(graph.vertices()), dtype=np.int64)
        position = {int(v): i for i, v in enumerate(vertices)}
        pairs = [(position[u], position[v]) for u, v in graph.edges()]
        m = len(pairs)

        src = np.empty(2 * m, dtype=np.int64)
        dst = np.empty(2 * m, dtype=np.int64)
        if m:
            forward = np.array(pairs, dtype=np.int64)
            src[0::2], dst[0::2] = forward[:, 0], forward[:, 1]
            src[1::2], dst[1::2] = forward[:, 1], forward[:, 0]
        rev = np.arange(2 * m, dtype=np.int64) ^ 1

        if edge_order is not None:
            perm = np.asarray(edge_order, dtype=np.int64)
            if len(perm) != 2 * m or not np.array_equal(np.sort(perm), np.arange(2 * m)):
                raise ValueError(f"edge_order must be a permutation of range({2 * m})")
            inverse = np.empty_like(perm)
            inverse[perm] = np.arange(2 * m)
            src, dst, rev = src[perm], dst[perm], inverse[rev[perm]]

        canonical = np.lexsort((src, dst))
        indptr = np.searchsorted(dst[canonical], np.arange(len(vertices) + 1))
        return cls(vertices=vertices, src=src, dst=dst, rev=rev, canonical=canonical, indptr=indptr)

    def __len__(self) -> int:
        return len(self.src)

    def vertex_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum ``values`` (one row per directed edge) over the edges entering each vertex."""
        n = len(self.vertices)
        order = self.canonical
        receivers = self.dst[order]
        if values.ndim == 1:
            return np.bincount(receivers, weights=values[order], minlength=n)
        columns = [np.bincount(receivers, weights=values[order, c], minlength=n) for c in range(values.shape[1])]
        return np.stack(columns, axis=1)

    def exclusive_sums(self, values: np.ndarray, totals: np.ndarray) -> np.ndarray:
        """
        For each edge u -> v, the sum of ``values`` over edges entering u other than v -> u.

        Subtracting the excluded term is exact only when it is finite; rows where it is not
        are summed explicitly.
        """
        with np.errstate(invalid="ignore"):
            result = totals[self.src] - values[self.rev]
        excluded = values[self.rev]
        bad = ~np.isfinite(excluded) if values.ndim == 1 else ~np.isfinite(excluded).all(axis=1)
        for e in np.flatnonzero(bad):
            u = self.src[e]
            members = self.canonical[self.indptr[u]:self.indptr[u + 1]]
            members = members[members != self.rev[e]]
            result[e] = values[members].sum(axis=0) if len(members) else 0.0
        return result


@dataclass
class OfflineBpRun:
    """Outcome of a synchronous BP run: final message buffer, vertex estimates and work done."""
    edges: DirectedEdges
    params: KernelParams
    radius: int
    rounds: int
    engine: str
    messages: np.ndarray
    estimates: Estimates

    @property
    def messages_touched(self) -> int:
        return self.rounds * len(self.edges)


def _side_label(side: SideLabels, vertex: int) -> Optional[int]:
    label = side.get(vertex) if isinstance(side, Mapping) else side[vertex]
    return None if label is None else int(label)


def offline_bp(
    graph: StreamingGraph,
    side: SideLabels,
    params: KernelParams,
    radius: int,
    engine: str = "auto",
    edge_order: Optional[Sequence[int]] = None,
) -> OfflineBpRun:
    """
    Run R - 1 synchronous rounds of the BP update on every directed edge of the final graph,
    starting from uniform messages, then combine all incoming messages at each vertex.

    Args:
        graph: The full graph; arrival order plays no role.
        side: Side label per vertex id (``None`` for no side information).
        params: Kernel parameters.
        radius: R >= 1; R = 1 runs no rounds and returns the side-information estimate.
        engine: ``auto``, ``probability`` or ``llr``.
        edge_order: Optional permutation of the directed edges. Results are bit-identical
            for every order.
    """
    if radius < 1:
        raise ValueError(f"Offline BP needs radius >= 1, got {radius}")
    message_engine = make_engine(params, engine)
    edges = DirectedEdges.from_graph(graph, edge_order)
    labels = [_side_label(side, int(v)) for v in edges.vertices]
    for label in labels:
        check_label(label, params.k)

    rounds = radius - 1
    if isinstance(message_engine, LlrEngine):
        messages, estimates = _run_llr(edges, labels, params, rounds)
    else:
        messages, estimates = _run_probability(edges, labels, params, rounds, message_engine)
    logger.debug(f"Offline BP: {len(edges.vertices)} vertices, {len(edges)} directed edges, {rounds} rounds")
    return OfflineBpRun(
        edges=edges,
        params=params,
        radius=radius,
        rounds=rounds,
        engine=message_engine.name,
        messages=messages,
        estimates=estimates,
    )


def offline_bp_run(
    graph: StreamingGraph,
    side: SideLabels,
    params: KernelParams,
    radius: int,
    engine: str = "auto",
    edge_order: Optional[Sequence[int]] = None,
) -> Estimates:
    return offline_bp(graph, side, params, radius, engine=engine, edge_order=edge_order).estimates


def _run_probability(edges: DirectedEdges, labels, params: KernelParams, rounds: int, engine):
    k = params.k
    log_prior = np.array([engine.log_prior(label) for label in labels]).reshape(len(labels), k)
    current = np.full((len(edges), k), 1.0 / k)
    for _ in range(rounds):
        factors = log_factors(current, params)
        totals = edges.vertex_sums(factors)
        logits = log_prior[edges.src] + edges.exclusive_sums(factors, totals)
        current = normalize_logits(logits, params.eps)

    totals = edges.vertex_sums(log_factors(current, params))
    beliefs = normalize_logits(log_prior + totals, params.eps)
    estimates = Estimates(vertices=edges.vertices, labels=np.argmax(beliefs, axis=1), beliefs=beliefs)
    return current, estimates


def _run_llr(edges: DirectedEdges, labels, params: KernelParams, rounds: int):
    engine = LlrEngine(params)
    h = np.array([engine.log_prior(label) for label in labels], dtype=float)
    bound = params.max_llr
    current = np.zeros(len(edges))
    for _ in range(rounds):
        factors = llr_edge_factors(current, params)
        totals = edges.vertex_sums(factors)
        current = np.clip(h[edges.src] + edges.exclusive_sums(factors, totals), -bound, bound)
        if np.isnan(current).any():
            raise BpDomainError("Contradictory certain messages produced an undefined log-likelihood ratio")

    values = np.clip(h + edges.vertex_sums(llr_edge_factors(current, params)), -bound, bound)
    if np.isnan(values).any():
        raise BpDomainError("Contradictory certain messages produced an undefined log-likelihood ratio")
    p0 = 0.5 * (1.0 + np.tanh(values))
    beliefs = np.stack([p0, 1.0 - p0], axis=1)
    estimates = Estimates(vertices=edges.vertices, labels=np.where(values >= 0, 0, 1), beliefs=beliefs)
    return current, estimates


class OfflineBP:
    """
    Offline BP behind the streaming interface: arrivals only build the graph, and
    ``finalize`` runs the full synchronous schedule on the graph revealed so far.
    """

    name = "offline-bp"

    def __init__(self, params: KernelParams, radius: int, engine: str = "auto"):
        if radius < 1:
            raise ValueError(f"Offline BP needs radius >= 1, got {radius}")
        self.params = params
        self.radius = radius
        self.engine = engine
        self.graph = StreamingGraph()
        self.side: Dict[int, Optional[int]] = {}
        self.messages_touched = 0
        self.last_run: Optional[OfflineBpRun] = None

    def insert(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        check_label(side_label, self.params.k)
        step = self.graph.insert_vertex(new_edges, vertex=vertex)
        self.side[self.graph.arrival_order[-1]] = side_label
        return step

    def finalize(self) -> Estimates:
        self.last_run = offline_bp(self.graph, self.side, self.params, self.radius, engine=self.engine)
        self.messages_touched = self.last_run.messages_touched
        return self.last_run.estimates
