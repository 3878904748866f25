import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from streambp.graph import StreamingGraph

logger = logging.getLogger(__name__)

# Tolerance on the community prior summing to one
PROBABILITY_TOLERANCE = 1e-12


class ModelParameterError(ValueError):
    """Raised for invalid block-model parameters"""
    pass


class ModelParams(BaseModel):
    """
    Parameters of the streaming SBM: community prior ``p``, intensity matrix ``W0``
    (edge probability ``W0[r][s] / n``) and side-information noise level ``alpha``.
    """
    n: int = Field(..., ge=1, description="Number of vertices")
    k: int = Field(..., ge=1, description="Number of communities")
    p: List[float] = Field(..., description="Community prior, a probability vector of length k")
    W0: List[List[float]] = Field(..., description="Symmetric k x k edge intensity matrix")
    alpha: float = Field(..., description="Probability that a side label is wrong")

    @model_validator(mode="after")
    def check_invariants(self) -> "ModelParams":
        k = self.k
        if len(self.p) != k:
            raise ModelParameterError(f"p has length {len(self.p)}, expected k={k}")
        if any(x < 0 for x in self.p) or abs(sum(self.p) - 1.0) > PROBABILITY_TOLERANCE:
            raise ModelParameterError(f"p must be a probability vector, got {self.p}")
        w0 = np.asarray(self.W0, dtype=float)
        if w0.shape != (k, k):
            raise ModelParameterError(f"W0 has shape {w0.shape}, expected ({k}, {k})")
        if not np.array_equal(w0, w0.T):
            raise ModelParameterError("W0 must be symmetric")
        if (w0 < 0).any():
            raise ModelParameterError("W0 entries must be non-negative")
        if (w0 / self.n > 1).any():
            raise ModelParameterError(f"W0 / n must not exceed 1 (n={self.n}, max W0={w0.max()})")
        if not 0.0 <= self.alpha <= (k - 1) / k:
            raise ModelParameterError(f"alpha must lie in [0, {(k - 1) / k}], got {self.alpha}")
        return self

    def w0_array(self) -> np.ndarray:
        return np.asarray(self.W0, dtype=float)

    def as_symmetric(self) -> Tuple[float, float]:
        """Return ``(a, b)`` when the model is the symmetric one, else raise."""
        w0 = self.w0_array()
        a = float(w0[0, 0])
        b = float(w0[0, 1]) if self.k > 1 else 0.0
        expected = np.full((self.k, self.k), b)
        np.fill_diagonal(expected, a)
        if not np.allclose(self.p, 1.0 / self.k, rtol=0.0, atol=PROBABILITY_TOLERANCE) or not np.array_equal(w0, expected):
            raise ModelParameterError("Model is not a symmetric block model")
        return a, b


class SymmetricParams(BaseModel):
    """Symmetric streaming SBM: uniform prior, intensity ``a`` within and ``b`` across communities."""
    n: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    a: float = Field(..., ge=0.0, description="Within-community intensity")
    b: float = Field(..., ge=0.0, description="Cross-community intensity")
    alpha: float = Field(..., description="Probability that a side label is wrong")

    @model_validator(mode="after")
    def check_invariants(self) -> "SymmetricParams":
        if self.a == 0 and self.b == 0:
            raise ModelParameterError("a and b must not both be zero")
        if self.a / self.n > 1 or self.b / self.n > 1:
            raise ModelParameterError(f"a / n and b / n must not exceed 1 (n={self.n})")
        if not 0.0 <= self.alpha <= (self.k - 1) / self.k:
            raise ModelParameterError(f"alpha must lie in [0, {(self.k - 1) / self.k}], got {self.alpha}")
        return self


@dataclass
class Instance:
    """A sampled or loaded triple (true labels, noisy labels, arrival-ordered graph)."""
    graph: StreamingGraph
    tau: np.ndarray
    tau_tilde: np.ndarray
    params: ModelParams
    seed: int

    @property
    def n(self) -> int:
        return len(self.tau)


def symmetric_to_general(params: SymmetricParams) -> ModelParams:
    w0 = np.full((params.k, params.k), params.b, dtype=float)
    np.fill_diagonal(w0, params.a)
    return ModelParams(
        n=params.n,
        k=params.k,
        p=[1.0 / params.k] * params.k,
        W0=w0.tolist(),
        alpha=params.alpha,
    )


def snr(a: float, b: float, k: int) -> float:
    """Signal-to-noise ratio (a - b)^2 / (a + (k - 1) b); non-trivial recovery is expected above 1."""
    denominator = a + (k - 1) * b
    if denominator <= 0:
        raise ModelParameterError(f"a + (k - 1) b must be positive, got {denominator}")
    return (a - b) ** 2 / denominator


def invert_snr(a_plus_b: float, lam: float, k: int) -> Tuple[float, float]:
    """
    Find the assortative intensities ``a >= b >= 0`` with ``a + b = a_plus_b`` and ``snr(a, b, k) = lam``.

    Writing d = a - b, the SNR equation becomes d^2 - lam (1 - k/2) d - lam k s / 2 = 0.
    """
    if a_plus_b <= 0:
        raise ModelParameterError(f"a + b must be positive, got {a_plus_b}")
    if lam < 0:
        raise ModelParameterError(f"SNR must be non-negative, got {lam}")
    c = 1.0 - k / 2.0
    d = (lam * c + math.sqrt((lam * c) ** 2 + 2.0 * lam * k * a_plus_b)) / 2.0
    b = (a_plus_b - d) / 2.0
    if b < -1e-12:
        raise ModelParameterError(f"SNR {lam} is unreachable with a + b = {a_plus_b} and k = {k}")
    b = max(b, 0.0)
    return a_plus_b - b, b


def perturb_parameters(a: float, b: float, a_shift_pct: float = 0.0, b_shift_pct: float = 0.0) -> Tuple[float, float]:
    """Shift intensities by percentages: ``a_shift_pct=200`` triples ``a``, ``b_shift_pct=-67`` keeps 33% of ``b``."""
    a_new = a * (1.0 + a_shift_pct / 100.0)
    b_new = b * (1.0 + b_shift_pct / 100.0)
    if a_new < 0 or b_new < 0 or (a_new == 0 and b_new == 0):
        raise ModelParameterError(f"Shifted intensities are invalid: a={a_new}, b={b_new}")
    return a_new, b_new


def apply_noise_channel(tau: np.ndarray, k: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """
    Each label is kept with probability ``1 - alpha`` and otherwise replaced by a uniform
    choice among the other ``k - 1`` labels. Draws are made for every vertex regardless of
    ``alpha`` so the stream consumed from ``rng`` does not depend on it.
    """
    tau = np.asarray(tau, dtype=np.int64)
    if k == 1:
        return tau.copy()
    flips = rng.random(len(tau)) < alpha
    shifts = rng.integers(1, k, size=len(tau))
    return np.where(flips, (tau + shifts) % k, tau)


def _bernoulli_positions(rng: np.random.Generator, total: int, prob: float) -> np.ndarray:
    """Indices in ``[0, total)`` of independent Bernoulli(prob) successes, by geometric skipping."""
    if total <= 0 or prob <= 0:
        return np.empty(0, dtype=np.int64)
    if prob >= 1:
        return np.arange(total, dtype=np.int64)

    chunks = []
    last = -1
    while True:
        expected = (total - 1 - last) * prob
        batch = int(expected + 5.0 * math.sqrt(expected) + 16)
        positions = last + np.cumsum(rng.geometric(prob, size=batch), dtype=np.int64)
        inside = positions[positions < total]
        chunks.append(inside)
        if len(inside) < batch:
            break
        last = int(inside[-1])
    return np.concatenate(chunks)


def _decode_pairs(index: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Map linear indices q = j (j - 1) / 2 + i, with i < j, back to (i, j)."""
    j = ((1.0 + np.sqrt(1.0 + 8.0 * index.astype(np.float64))) / 2.0).astype(np.int64)
    # float rounding can be off by one either way
    too_big = j * (j - 1) // 2 > index
    j[too_big] -= 1
    too_small = (j + 1) * j // 2 <= index
    j[too_small] += 1
    i = index - j * (j - 1) // 2
    return i, j


def _sample_edges(tau: np.ndarray, probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample every unordered pair independently, block by block; returns an (m, 2) array."""
    k = probabilities.shape[0]
    groups = [np.flatnonzero(tau == s) for s in range(k)]
    blocks = []
    for r in range(k):
        for s in range(r, k):
            prob = float(probabilities[r, s])
            if r == s:
                size = len(groups[r])
                hits = _bernoulli_positions(rng, size * (size - 1) // 2, prob)
                i, j = _decode_pairs(hits)
                blocks.append(np.stack([groups[r][i], groups[r][j]], axis=1))
            else:
                width = len(groups[s])
                hits = _bernoulli_positions(rng, len(groups[r]) * width, prob)
                blocks.append(np.stack([groups[r][hits // width], groups[s][hits % width]], axis=1))
    if not blocks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(blocks).astype(np.int64)


def sample(params: Union[ModelParams, SymmetricParams], seed: int) -> Instance:
    """
    Draw an instance of the streaming SBM.

    Four independent generator streams are derived from ``seed`` for labels, noise, edges
    and the arrival permutation, so changing ``alpha`` leaves labels and graph untouched.
    """
    if isinstance(params, SymmetricParams):
        params = symmetric_to_general(params)

    labels_seq, noise_seq, edges_seq, order_seq = np.random.SeedSequence(seed).spawn(4)
    n, k = params.n, params.k

    tau = np.random.default_rng(labels_seq).choice(k, size=n, p=np.asarray(params.p))
    tau_tilde = apply_noise_channel(tau, k, params.alpha, np.random.default_rng(noise_seq))
    edges = _sample_edges(tau, params.w0_array() / n, np.random.default_rng(edges_seq))
    order = np.random.default_rng(order_seq).permutation(n)

    graph = StreamingGraph.from_arrivals(order.tolist(), edges.tolist())
    logger.debug(f"Sampled instance n={n} k={k} edges={graph.num_edges} seed={seed}")
    return Instance(graph=graph, tau=tau.astype(np.int64), tau_tilde=tau_tilde.astype(np.int64), params=params, seed=seed)


def save_instance(instance: Instance, directory: Union[str, Path]) -> Path:
    """
    Write an instance as plain text files (0-based ids and labels):
    ``edges.txt`` ("u v"), ``labels.txt`` and ``side_labels.txt`` ("v label"),
    ``arrival.txt`` ("t v", t 1-based) and ``params.json``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    graph = instance.graph

    with open(directory / "edges.txt", "w", encoding="utf-8", newline="\n") as f:
        for u, v in graph.edges():
            f.write(f"{u} {v}\n")
    for filename, labels in (("labels.txt", instance.tau), ("side_labels.txt", instance.tau_tilde)):
        with open(directory / filename, "w", encoding="utf-8", newline="\n") as f:
            for v, label in enumerate(labels):
                f.write(f"{v} {int(label)}\n")
    with open(directory / "arrival.txt", "w", encoding="utf-8", newline="\n") as f:
        for t, v in enumerate(graph.arrival_order, start=1):
            f.write(f"{t} {v}\n")
    sidecar = {"params": instance.params.model_dump(), "seed": instance.seed}
    with open(directory / "params.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")

    logger.info(f"Saved instance with {instance.n} vertices and {graph.num_edges} edges to {directory}")
    return directory


def _read_pairs(path: Path) -> List[Tuple[int, int]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                first, second = line.split()[:2]
                pairs.append((int(first), int(second)))
    return pairs


def load_instance(directory: Union[str, Path]) -> Instance:
    directory = Path(directory)
    with open(directory / "params.json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    params = ModelParams(**sidecar["params"])

    tau = np.zeros(params.n, dtype=np.int64)
    for v, label in _read_pairs(directory / "labels.txt"):
        tau[v] = label
    tau_tilde = np.zeros(params.n, dtype=np.int64)
    for v, label in _read_pairs(directory / "side_labels.txt"):
        tau_tilde[v] = label
    order = [v for _, v in sorted(_read_pairs(directory / "arrival.txt"))]
    graph = StreamingGraph.from_arrivals(order, _read_pairs(directory / "edges.txt"))
    return Instance(graph=graph, tau=tau, tau_tilde=tau_tilde, params=params, seed=int(sidecar["seed"]))
