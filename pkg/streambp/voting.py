import logging
from typing import Dict, Optional, Sequence

import numpy as np

from streambp.bp_kernel import check_label
from streambp.config import get_vote_weight
from streambp.evaluation import Estimates
from streambp.graph import StreamingGraph

logger = logging.getLogger(__name__)


class VotingState:
    """
    Streaming plurality vote. A new vertex takes the label with the most votes, where each
    already labeled neighbor casts one vote and the vertex's own side label casts ``delta``.
    Labels are assigned once, on arrival, and never revised.
    """

    messages_touched = 0

    def __init__(self, k: int, delta: int = 1, name: Optional[str] = None):
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        if delta < 1:
            raise ValueError(f"Vote weight must be a positive integer, got {delta}")
        self.k = k
        self.delta = int(delta)
        self.name = name or f"vote{self.delta}x"
        self.graph = StreamingGraph()
        self.side: Dict[int, Optional[int]] = {}
        self.estimates: Dict[int, int] = {}

    @classmethod
    def from_name(cls, algorithm: str, k: int) -> "VotingState":
        """Build a configured baseline such as ``vote2x``."""
        return cls(k, delta=get_vote_weight(algorithm), name=algorithm)

    def scores(self, side_label: Optional[int], neighbors: Sequence[int]) -> np.ndarray:
        scores = np.zeros(self.k, dtype=np.int64)
        if side_label is not None:
            scores[side_label] += self.delta
        for u in neighbors:
            scores[self.estimates[u]] += 1
        return scores

    def insert(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        check_label(side_label, self.k)
        step = self.graph.insert_vertex(new_edges, vertex=vertex)
        v = self.graph.arrival_order[-1]
        self.side[v] = side_label

        scores = self.scores(side_label, self.graph.neighbors(v))
        winners = np.flatnonzero(scores == scores.max())
        # own side label wins ties, otherwise the lowest label
        label = side_label if side_label is not None and side_label in winners else int(winners[0])
        self.estimates[v] = int(label)
        return step

    def finalize(self) -> Estimates:
        vertices = sorted(self.estimates)
        return Estimates(
            vertices=np.array(vertices, dtype=np.int64),
            labels=np.array([self.estimates[v] for v in vertices], dtype=np.int64),
        )
