import itertools
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from streambp.bp_kernel import KernelParams, bp_prior
from streambp.graph import StreamingGraph

# Enumeration visits k^n labelings
MAX_LABELINGS = 1 << 20


def exact_marginals(
    graph: StreamingGraph,
    side: Union[Sequence[Optional[int]], Mapping[int, Optional[int]]],
    params: KernelParams,
) -> np.ndarray:
    """
    Posterior marginals by brute force over every labeling, weighting a labeling by the side
    label priors times ``a`` for each edge inside a community and ``b`` for each edge across.
    Non-edges are ignored, which matches BP on sparse graphs.

    Returns an array with one row per vertex, vertices in ascending id order.
    """
    vertices = sorted(graph.vertices())
    n, k = len(vertices), params.k
    if k ** n > MAX_LABELINGS:
        raise ValueError(f"{k}^{n} labelings is too many to enumerate")
    position = {v: i for i, v in enumerate(vertices)}

    labelings = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64).reshape(-1, n)
    with np.errstate(divide="ignore"):
        log_weight = np.zeros(len(labelings))
        for i, v in enumerate(vertices):
            label = side.get(v) if isinstance(side, Mapping) else side[v]
            log_prior = np.log(bp_prior(None if label is None else int(label), params))
            log_weight += log_prior[labelings[:, i]]
        log_w0 = np.log(np.where(np.eye(k, dtype=bool), params.a, params.b))
        for u, v in graph.edges():
            log_weight += log_w0[labelings[:, position[u]], labelings[:, position[v]]]

    weight = np.exp(log_weight - log_weight.max())
    weight /= weight.sum()
    marginals = np.zeros((n, k))
    for i in range(n):
        marginals[i] = np.bincount(labelings[:, i], weights=weight, minlength=k)
    return marginals
