import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from streambp.config import get_kernel_defaults

logger = logging.getLogger(__name__)

DEFAULT_EPS = float(get_kernel_defaults().get("eps", 1e-6))

# A belief vector is a length-k numpy array on the probability simplex
BeliefVector = np.ndarray


class KernelParameterError(ValueError):
    """Raised for invalid BP kernel parameters"""
    pass


class LabelError(ValueError):
    """Raised when a side label is outside [0, k)"""
    pass


class BpDomainError(ValueError):
    """Raised when a BP product leaves no state with positive mass"""
    pass


class UnsupportedKError(ValueError):
    """Raised when a two-community operation is used with k != 2"""
    pass


@dataclass(frozen=True)
class KernelParams:
    """
    Intensities and noise level used by the BP update.

    ``eps`` clamps every written message into [eps, 1 - eps]; ``eps = 0`` disables clamping
    (exact BP, used by the enumeration oracles).
    """
    a: float
    b: float
    alpha: float
    k: int
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.k < 1:
            raise KernelParameterError(f"k must be positive, got {self.k}")
        if self.a < 0 or self.b < 0 or (self.a == 0 and self.b == 0):
            raise KernelParameterError(f"Need a, b >= 0 and not both zero, got a={self.a}, b={self.b}")
        if not 0.0 <= self.alpha <= (self.k - 1) / self.k:
            raise KernelParameterError(f"alpha must lie in [0, {(self.k - 1) / self.k}], got {self.alpha}")
        if self.eps < 0 or (self.k > 1 and self.eps * self.k >= 1):
            raise KernelParameterError(f"eps must lie in [0, 1/k), got {self.eps}")

    @property
    def max_llr(self) -> float:
        if self.eps == 0:
            return math.inf
        return 0.5 * math.log((1.0 - self.eps) / self.eps)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def check_label(side_label: Optional[int], k: int) -> None:
    if side_label is None:
        return
    if not isinstance(side_label, (int, np.integer)) or not 0 <= side_label < k:
        raise LabelError(f"Side label {side_label!r} is outside [0, {k})")


def uniform_belief(k: int) -> BeliefVector:
    return np.full(k, 1.0 / k)


def bp_prior(side_label: Optional[int], params: KernelParams) -> BeliefVector:
    """
    Prior from the noisy label: ``1 - alpha`` on the observed label and ``alpha / (k - 1)``
    elsewhere. A missing label gives the uniform prior.
    """
    k = params.k
    check_label(side_label, k)
    if side_label is None or k == 1:
        return uniform_belief(k)
    alpha = params.alpha
    prior = np.full(k, alpha / (k - 1))
    prior[side_label] = 1.0 - alpha
    return prior


def clamp(belief: BeliefVector, eps: float) -> BeliefVector:
    """
    Project a belief so every entry is at least ``eps``.

    Entries below ``eps`` are pinned to ``eps`` and the rest are rescaled to keep the total
    at one, repeating until no free entry falls below ``eps``. With k >= 2 every entry then
    lies in [eps, 1 - (k - 1) eps], and clamping an already clamped vector is a no-op.
    For k = 2 this is plain clipping to [eps, 1 - eps].
    """
    belief = np.asarray(belief, dtype=float)
    return clamp_rows((belief / belief.sum())[np.newaxis, :], eps)[0]


def clamp_rows(beliefs: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise ``clamp`` of already normalized beliefs. A row is rewritten only if one of its entries is pinned."""
    beliefs = np.asarray(beliefs, dtype=float)
    k = beliefs.shape[1]
    if eps <= 0 or k == 1:
        return beliefs
    if eps * k >= 1:
        raise KernelParameterError(f"eps must be below 1/k, got {eps} for k={k}")

    out = beliefs.copy()
    pinned = np.zeros(beliefs.shape, dtype=bool)
    while True:
        low = ~pinned & (out < eps)
        rows = low.any(axis=1)
        if not rows.any():
            return out
        pinned[rows] = pinned[rows] | low[rows]
        row_pinned = pinned[rows]
        source = beliefs[rows]
        free_total = np.where(row_pinned, 0.0, source).sum(axis=1, keepdims=True)
        scale = (1.0 - eps * row_pinned.sum(axis=1, keepdims=True)) / free_total
        out[rows] = np.where(row_pinned, eps, source * scale)


def normalize_logits(logits: np.ndarray, eps: float) -> np.ndarray:
    top = logits.max(axis=1, keepdims=True)
    if not np.isfinite(top).all():
        raise BpDomainError("Every state has zero mass after the BP product")
    weights = np.exp(logits - top)
    return clamp_rows(weights / weights.sum(axis=1, keepdims=True), eps)


def _finish(logits: np.ndarray, eps: float) -> BeliefVector:
    return normalize_logits(logits[np.newaxis, :], eps)[0]


def _log_prior(side_label: Optional[int], params: KernelParams) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(bp_prior(side_label, params))


def log_factors(incoming: np.ndarray, params: KernelParams) -> np.ndarray:
    factors = params.b + (params.a - params.b) * incoming
    if (factors < 0).any():
        raise BpDomainError("Negative factor b + (a - b) m(s); incoming message is off the simplex")
    with np.errstate(divide="ignore"):
        return np.log(factors)


def bp_combine(incoming: Sequence[BeliefVector], side_label: Optional[int], params: KernelParams) -> BeliefVector:
    """
    The BP update: out(s) is proportional to prior(s) * prod_i (b + (a - b) m_i(s)).

    Products are taken as sums of logs, shifted by the maximum before exponentiating,
    normalized and finally clamped to ``params.eps``.
    """
    logits = _log_prior(side_label, params)
    if len(incoming):
        messages = np.asarray(incoming, dtype=float).reshape(len(incoming), params.k)
        logits = logits + log_factors(messages, params).sum(axis=0)
    return _finish(logits, params.eps)


def belief_to_llr(belief: BeliefVector) -> float:
    """Half log-likelihood ratio 0.5 log(m(0) / m(1)) of a two-state belief."""
    p0, p1 = float(belief[0]), float(belief[1])
    return 0.5 * (_log(p0) - _log(p1))


def llr_to_belief(value: float) -> BeliefVector:
    p0 = 0.5 * (1.0 + math.tanh(value))
    return np.array([p0, 1.0 - p0])


def llr_edge_factor(value: float, params: KernelParams) -> float:
    """
    F(x) = 0.5 log((e^{2x} a + b) / (e^{2x} b + a)), the contribution of one incoming
    message to a two-community log-likelihood ratio. Evaluated with non-positive
    exponents only, so it never overflows.
    """
    a, b = params.a, params.b
    if a == b:
        return 0.0
    if math.isinf(value):
        limit = 0.5 * (_log(a) - _log(b))
        return limit if value > 0 else -limit
    if value >= 0:
        e = math.exp(-2.0 * value)
        return 0.5 * (_log(a + b * e) - _log(b + a * e))
    e = math.exp(2.0 * value)
    return 0.5 * (_log(a * e + b) - _log(b * e + a))


def llr_edge_factors(values: np.ndarray, params: KernelParams) -> np.ndarray:
    """Elementwise ``llr_edge_factor`` over an array, using that F is odd."""
    values = np.asarray(values, dtype=float)
    a, b = params.a, params.b
    if a == b:
        return np.zeros_like(values)
    e = np.exp(-2.0 * np.abs(values))
    with np.errstate(divide="ignore", invalid="ignore"):
        magnitude = 0.5 * (np.log(a + b * e) - np.log(b + a * e))
    return np.where(values < 0, -magnitude, magnitude)


def llr_prior(side_label: Optional[int], params: KernelParams) -> float:
    """h = +/- 0.5 log((1 - alpha) / alpha) for observed label 0 / 1, and 0 without side information."""
    check_label(side_label, params.k)
    if side_label is None:
        return 0.0
    h = 0.5 * (_log(1.0 - params.alpha) - _log(params.alpha))
    return h if side_label == 0 else -h


def _check_defined(value) -> None:
    # +inf and -inf contributions meet when certain messages contradict each other
    if np.any(np.isnan(value)):
        raise BpDomainError("Contradictory certain messages produced an undefined log-likelihood ratio")


def llr_combine(incoming: Sequence[float], side_label: Optional[int], params: KernelParams) -> float:
    """Two-community BP update on log-likelihood ratios: h + sum F(M_i), clipped to +/- max_llr."""
    if params.k != 2:
        raise UnsupportedKError(f"Log-likelihood-ratio updates need k = 2, got k = {params.k}")
    value = llr_prior(side_label, params)
    for message in incoming:
        value += llr_edge_factor(message, params)
    _check_defined(value)
    bound = params.max_llr
    return min(max(value, -bound), bound)


Message = Union[np.ndarray, float]


class ProbabilityEngine:
    """Messages are belief vectors; works for any k."""

    name = "probability"

    def __init__(self, params: KernelParams):
        self.params = params
        self._uniform = uniform_belief(params.k)
        self._log_priors: Dict[Optional[int], np.ndarray] = {None: _log_prior(None, params)}
        for label in range(params.k):
            self._log_priors[label] = _log_prior(label, params)

    def uniform(self) -> np.ndarray:
        return self._uniform

    def log_prior(self, side_label: Optional[int]) -> np.ndarray:
        return self._log_priors[side_label]

    def combine(self, incoming: Sequence[np.ndarray], side_label: Optional[int]) -> np.ndarray:
        logits = self._log_priors[side_label]
        if incoming:
            logits = logits + log_factors(np.vstack(incoming), self.params).sum(axis=0)
        return _finish(logits, self.params.eps)

    def uniform_layers(self, depth: int) -> np.ndarray:
        return np.tile(self._uniform, (depth + 1, 1))

    def combine_layers(self, incoming: Sequence[np.ndarray], side_label: Optional[int], depth: int) -> np.ndarray:
        """
        Indexed update: row i of the result combines row i - 1 of every incoming layered
        message, and row 0 is uniform.
        """
        out = np.empty((depth + 1, self.params.k))
        out[0] = self._uniform
        if depth == 0:
            return out
        logits = np.tile(self._log_priors[side_label], (depth, 1))
        if incoming:
            stacked = np.stack(incoming)[:, :-1, :]
            logits = logits + log_factors(stacked, self.params).sum(axis=0)
        out[1:] = normalize_logits(logits, self.params.eps)
        return out

    def to_belief(self, message: np.ndarray) -> BeliefVector:
        return message

    def label(self, message: np.ndarray) -> int:
        # argmax returns the first maximizer, i.e. the lowest label on ties
        return int(np.argmax(message))


class LlrEngine:
    """Messages are scalar half log-likelihood ratios; k = 2 only."""

    name = "llr"

    def __init__(self, params: KernelParams):
        if params.k != 2:
            raise UnsupportedKError(f"The log-likelihood-ratio engine needs k = 2, got k = {params.k}")
        self.params = params
        self._priors = {None: 0.0, 0: llr_prior(0, params), 1: llr_prior(1, params)}
        self._bound = params.max_llr

    def uniform(self) -> float:
        return 0.0

    def combine(self, incoming: Sequence[float], side_label: Optional[int]) -> float:
        params = self.params
        value = self._priors[side_label]
        for message in incoming:
            value += llr_edge_factor(message, params)
        _check_defined(value)
        bound = self._bound
        return min(max(value, -bound), bound)

    def log_prior(self, side_label: Optional[int]) -> float:
        return self._priors[side_label]

    def uniform_layers(self, depth: int) -> np.ndarray:
        return np.zeros(depth + 1)

    def combine_layers(self, incoming: Sequence[np.ndarray], side_label: Optional[int], depth: int) -> np.ndarray:
        out = np.zeros(depth + 1)
        if depth == 0:
            return out
        total = np.full(depth, self._priors[side_label])
        if incoming:
            total = total + llr_edge_factors(np.vstack(incoming)[:, :-1], self.params).sum(axis=0)
            _check_defined(total)
        out[1:] = np.clip(total, -self._bound, self._bound)
        return out

    def to_belief(self, message: float) -> BeliefVector:
        return llr_to_belief(message)

    def label(self, message: float) -> int:
        return 0 if message >= 0 else 1


def make_engine(params: KernelParams, engine: str = "auto"):
    """
    Pick the message representation: ``llr`` (k = 2 only), ``probability``, or ``auto``
    which prefers ``llr`` whenever k = 2.
    """
    if engine == "auto":
        engine = "llr" if params.k == 2 else "probability"
    if engine == "llr":
        return LlrEngine(params)
    if engine == "probability":
        return ProbabilityEngine(params)
    raise KernelParameterError(f"Unknown message engine '{engine}'")
