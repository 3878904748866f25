import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from streambp.graph import StreamingGraph

logger = logging.getLogger(__name__)

# Largest k for which the best permutation is found by exhaustive search
BRUTE_FORCE_MAX_K = 8


class EvaluationError(ValueError):
    """Raised for mismatched or out-of-range labels"""
    pass


@dataclass
class Estimates:
    """
    Estimated labels for a set of revealed vertices.

    ``vertices`` holds vertex ids in ascending order; ``labels[i]`` (and ``beliefs[i]`` when
    present) belong to ``vertices[i]``.
    """
    vertices: np.ndarray
    labels: np.ndarray
    beliefs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.vertices) != len(self.labels):
            raise EvaluationError(f"{len(self.vertices)} vertices but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def as_dict(self) -> dict:
        return {int(v): int(label) for v, label in zip(self.vertices, self.labels)}

    def label_of(self, vertex: int) -> int:
        position = int(np.searchsorted(self.vertices, vertex))
        if position >= len(self.vertices) or self.vertices[position] != vertex:
            raise KeyError(vertex)
        return int(self.labels[position])


@dataclass
class TracePoint:
    t: int
    revealed: int
    accuracy: float
    elapsed_ms: float = 0.0
    messages_touched: int = 0


@dataclass
class AccuracyReport:
    """
    Permutation-maximized accuracy. ``best_permutation[s]`` is the estimated label matched to
    true label ``s``; ``confusion[i][j]`` counts vertices estimated ``i`` with truth ``j``.
    """
    accuracy: float
    best_permutation: Tuple[int, ...]
    confusion: np.ndarray
    trace: List[TracePoint] = field(default_factory=list)


def confusion_matrix(estimated: np.ndarray, truth: np.ndarray, k: int) -> np.ndarray:
    estimated = np.asarray(estimated, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if len(estimated) != len(truth):
        raise EvaluationError(f"Got {len(estimated)} estimates for {len(truth)} true labels")
    for name, labels in (("estimated", estimated), ("true", truth)):
        if len(labels) and (labels.min() < 0 or labels.max() >= k):
            raise EvaluationError(f"Some {name} labels fall outside [0, {k})")
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (estimated, truth), 1)
    return confusion


def best_permutation(confusion: np.ndarray) -> Tuple[Tuple[int, ...], int]:
    """
    Maximize ``sum_s confusion[perm[s], s]`` over permutations of the labels.

    Exhaustive for k <= 8, where the first maximizer in lexicographic order wins (so the
    identity is returned whenever it is optimal); linear assignment otherwise.
    """
    confusion = np.asarray(confusion)
    k = confusion.shape[0]
    if k <= BRUTE_FORCE_MAX_K:
        perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
        scores = confusion[perms, np.arange(k)].sum(axis=1)
        best = int(np.argmax(scores))
        return tuple(int(s) for s in perms[best]), int(scores[best])
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    perm = np.empty(k, dtype=np.int64)
    perm[cols] = rows
    return tuple(int(s) for s in perm), int(confusion[rows, cols].sum())


def accuracy(estimates: Union[Estimates, Sequence[int]], truth: Sequence[int], k: int) -> AccuracyReport:
    """
    Fraction of vertices whose estimated label matches truth under the best relabeling.

    With ``Estimates``, ``truth`` is indexed by vertex id and only the estimated vertices are
    scored; a plain label sequence must have the same length as ``truth``.
    """
    truth = np.asarray(truth, dtype=np.int64)
    if isinstance(estimates, Estimates):
        if len(estimates) and (estimates.vertices.min() < 0 or estimates.vertices.max() >= len(truth)):
            raise EvaluationError("Estimates cover vertices with no true label")
        estimated, truth = estimates.labels, truth[estimates.vertices]
    else:
        estimated = np.asarray(estimates, dtype=np.int64)
    if len(estimated) == 0:
        raise EvaluationError("Cannot score an empty set of estimates")

    confusion = confusion_matrix(estimated, truth, k)
    perm, matched = best_permutation(confusion)
    return AccuracyReport(accuracy=matched / len(estimated), best_permutation=perm, confusion=confusion)


class StreamingEstimator(Protocol):
    def insert(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        ...

    def finalize(self) -> Estimates:
        ...


def accuracy_trace(
    algorithm: StreamingEstimator,
    graph: StreamingGraph,
    side: Union[Sequence[Optional[int]], Mapping[int, Optional[int]]],
    truth: Sequence[int],
    k: int,
    checkpoints: Iterable[int],
) -> List[TracePoint]:
    """
    Replay ``graph`` into a fresh ``algorithm`` and score it on the revealed prefix at every
    checkpoint. Each checkpoint gets its own best permutation.
    """
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if checkpoints and (checkpoints[0] < 1 or checkpoints[-1] > graph.num_vertices):
        raise EvaluationError(f"Checkpoints must lie in [1, {graph.num_vertices}], got {checkpoints}")

    trace = []
    start = time.perf_counter()
    pending = iter(checkpoints)
    next_checkpoint = next(pending, None)
    for t, (vertex, earlier) in enumerate(graph.arrivals(), start=1):
        if next_checkpoint is None:
            break
        label = side[vertex]
        algorithm.insert(None if label is None else int(label), earlier, vertex=vertex)
        if t == next_checkpoint:
            estimates = algorithm.finalize()
            report = accuracy(estimates, truth, k)
            trace.append(TracePoint(
                t=t,
                revealed=len(estimates),
                accuracy=report.accuracy,
                elapsed_ms=(time.perf_counter() - start) * 1000.0,
                messages_touched=getattr(algorithm, "messages_touched", 0),
            ))
            logger.debug(f"Checkpoint t={t}: accuracy {report.accuracy:.4f}")
            next_checkpoint = next(pending, None)
    return trace
