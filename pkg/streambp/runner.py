import csv
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Sequence, TextIO, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator
from tqdm import tqdm

from streambp.bp_kernel import DEFAULT_EPS, KernelParams
from streambp.config import DEFAULT_WORKERS, configs, get_dataset_entry, get_kernel_defaults
from streambp.datasets import DatasetBundle, estimate_ab, load_edge_list, load_named_dataset, synthesize_side_info
from streambp.evaluation import accuracy, accuracy_trace
from streambp.graph import StreamingGraph
from streambp.model import SymmetricParams, invert_snr, perturb_parameters, sample, save_instance, snr
from streambp.offline_bp import OfflineBP, offline_bp
from streambp.online_bp import StreamBP, StreamBPStar
from streambp.summary import SUMMARY_SPECS, SummaryState, load_summary_spec
from streambp.voting import VotingState

logger = logging.getLogger(__name__)

BP_ALGORITHMS = ("streambp", "streambp-star", "offline-bp")
SUMMARY_PREFIX = "summary:"

COLUMNS = [
    "model_id", "algorithm", "n", "k", "a", "b", "lambda", "alpha", "a_shift", "b_shift",
    "a_used", "b_used", "R", "eps", "engine", "seed", "trial", "trial_seed",
    "accuracy", "runtime_ms", "messages_touched",
]
TRACE_COLUMNS = COLUMNS + ["t", "revealed", "snr_t"]
ESTIMATE_COLUMNS = ["dataset", "num_vertices", "num_edges", "k", "a", "b", "expected_a", "expected_b"]
GENERATE_COLUMNS = ["model_id", "n", "k", "a", "b", "lambda", "alpha", "seed", "trial", "trial_seed", "num_edges", "path"]


class ConfigError(ValueError):
    """Raised when an experiment configuration is incomplete or inconsistent"""
    pass


def is_voting(name: str) -> bool:
    return name in configs.get("voting", {})


def is_radius_free(name: str) -> bool:
    """Voting and summary-statistics algorithms do not use the BP radius or intensities."""
    return is_voting(name) or name.startswith(SUMMARY_PREFIX)


def known_algorithm(name: str) -> bool:
    if name in BP_ALGORITHMS or is_voting(name):
        return True
    return name.startswith(SUMMARY_PREFIX) and name[len(SUMMARY_PREFIX):] in SUMMARY_SPECS


def community_problems(k: int, alphas: Sequence[float], eps: float) -> List[str]:
    """Side-information noise and clamp threshold checks that depend on the number of communities."""
    problems = []
    top = (k - 1) / k
    bad = [x for x in alphas if not 0.0 <= x <= top]
    if bad:
        problems.append(f"alphas: values must lie in [0, {top}], got {bad}")
    if k > 1 and eps * k >= 1:
        problems.append(f"eps: must be below 1/k = {1 / k}, got {eps}")
    return problems


def _manifest_k(dataset: str) -> Optional[int]:
    try:
        return get_dataset_entry(dataset).get("expected", {}).get("k")
    except ValueError:
        return None


class ExperimentConfig(BaseModel):
    """One experiment: a model or dataset, the algorithms to run and the parameter axes to sweep."""
    mode: Literal["generate", "run", "sweep", "estimate-params", "trace"] = "sweep"
    model_id: Optional[str] = Field(None, description="Label written to the model_id column")
    n: Optional[int] = Field(None, ge=1, description="Number of vertices of the synthetic model")
    k: Optional[int] = Field(None, ge=1, description="Number of communities of the synthetic model")
    a: Optional[float] = Field(None, ge=0.0, description="Within-community intensity")
    b: Optional[float] = Field(None, ge=0.0, description="Cross-community intensity")
    a_plus_b: Optional[float] = Field(None, gt=0.0, description="Total intensity for SNR sweeps")
    lambdas: List[float] = Field(default_factory=list, description="SNR values; (a, b) derived from a_plus_b")
    alphas: List[float] = Field(default_factory=list, description="Side-information noise levels")
    dataset: Optional[str] = Field(None, description="Dataset name from datasets.json ('all' for estimate-params)")
    edges_path: Optional[str] = None
    labels_path: Optional[str] = None
    algorithms: List[str] = Field(default_factory=lambda: ["streambp"])
    radii: List[int] = Field(default_factory=lambda: [1])
    eps: float = Field(default_factory=lambda: DEFAULT_EPS, ge=0.0)
    engine: Literal["auto", "probability", "llr"] = Field(default_factory=lambda: get_kernel_defaults().get("engine", "auto"))
    trials: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    checkpoints: List[int] = Field(default_factory=list)
    output: Optional[str] = None
    workers: int = Field(default_factory=lambda: DEFAULT_WORKERS, ge=1)
    a_shifts: List[float] = Field(default_factory=lambda: [0.0], description="Percent shifts of a fed to BP")
    b_shifts: List[float] = Field(default_factory=lambda: [0.0], description="Percent shifts of b fed to BP")
    timing: bool = Field(True, description="Record wall-clock runtime; disable for byte-identical output")

    @property
    def synthetic(self) -> bool:
        return self.n is not None or self.k is not None

    @property
    def real(self) -> bool:
        return any(x is not None for x in (self.dataset, self.edges_path, self.labels_path))

    @model_validator(mode="after")
    def check_fields(self) -> "ExperimentConfig":
        problems = []
        for name in self.algorithms:
            if not known_algorithm(name):
                problems.append(f"algorithms: unknown algorithm '{name}'")
        if not self.algorithms and self.mode in ("run", "sweep", "trace"):
            problems.append("algorithms: at least one algorithm is required")
        if any(r < 1 for r in self.radii):
            problems.append(f"radii: every radius must be at least 1, got {self.radii}")
        if not self.radii:
            problems.append("radii: at least one radius is required")

        if self.mode == "estimate-params":
            if not self.real:
                problems.append("dataset, edges_path, labels_path: estimate-params needs a dataset")
        else:
            problems.extend(self._source_problems())

        if self.dataset == "all" and self.mode != "estimate-params":
            problems.append("dataset: 'all' is only valid in estimate-params mode")
        if self.mode == "run" and (len(self.radii) != 1 or len(self.alphas) != 1 or len(self.lambdas) > 1
                                   or len(self.a_shifts) != 1 or len(self.b_shifts) != 1):
            problems.append("radii, alphas, lambdas, a_shifts, b_shifts: run mode takes one value each; use sweep")
        if self.mode == "trace" and not self.checkpoints:
            problems.append("checkpoints: required in trace mode")
        if self.mode == "generate" and not self.output:
            problems.append("output: required in generate mode")

        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def _source_problems(self) -> List[str]:
        problems = []
        if self.synthetic and self.real:
            problems.append("n, k, dataset, edges_path: a synthetic model and a dataset are mutually exclusive")
        elif not self.synthetic and not self.real:
            problems.append("n, k, dataset: give n and k for a synthetic model, or a dataset")
        if self.synthetic:
            if self.n is None or self.k is None:
                problems.append("n, k: both are required for a synthetic model")
            if self.lambdas:
                if self.a_plus_b is None:
                    problems.append("a_plus_b: required together with lambdas")
                if self.a is not None or self.b is not None:
                    problems.append("a, b, lambdas: give either a and b, or a_plus_b and lambdas")
            elif self.a is None or self.b is None:
                problems.append("a, b: required for a synthetic model (or a_plus_b with lambdas)")
            if self.k is not None:
                problems.extend(community_problems(self.k, self.alphas, self.eps))
        if self.real:
            if self.dataset is None and (self.edges_path is None or self.labels_path is None):
                problems.append("edges_path, labels_path: both are required without a dataset name")
            if self.mode == "generate":
                problems.append("mode: generate needs a synthetic model")
            if self.dataset is not None and self.dataset != "all":
                k = _manifest_k(self.dataset)
                if k is not None:
                    problems.extend(community_problems(k, self.alphas, self.eps))
            elif self.eps * 2 >= 1:
                # every labelled dataset has at least two communities
                problems.append(f"eps: must be below 1/k <= 0.5, got {self.eps}")
        if not self.alphas and self.mode != "generate":
            problems.append("alphas: at least one value is required")
        return problems

    def resolved_model_id(self) -> str:
        if self.model_id:
            return self.model_id
        if self.real:
            return self.dataset or Path(self.edges_path).stem
        return f"stsbm-n{self.n}-k{self.k}"


def build_config(values: Dict[str, Any]) -> ExperimentConfig:
    """Validate raw settings, reporting every problem as a ``ConfigError``."""
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def make_algorithm(name: str, k: int, a: float, b: float, alpha: float, radius: int, eps: float, engine: str, seed: int):
    """Build a fresh streaming estimator by name."""
    if is_voting(name):
        return VotingState.from_name(name, k)
    if name.startswith(SUMMARY_PREFIX):
        return SummaryState(load_summary_spec(name[len(SUMMARY_PREFIX):]), k, seed=seed)
    params = KernelParams(a=a, b=b, alpha=alpha, k=k, eps=eps)
    if name == "streambp":
        return StreamBP(params, radius, engine=engine)
    if name == "streambp-star":
        return StreamBPStar(params, radius, engine=engine)
    if name == "offline-bp":
        return OfflineBP(params, radius, engine=engine)
    raise ConfigError(f"Unknown algorithm '{name}'")


def replay(algorithm, graph: StreamingGraph, side: Sequence[int]):
    for vertex, earlier in graph.arrivals():
        algorithm.insert(int(side[vertex]), earlier, vertex=vertex)
    return algorithm.finalize()


class _Problem:
    """One graph with its truth and side labels, plus the metadata every row repeats."""

    def __init__(self, graph: StreamingGraph, truth: np.ndarray, side: np.ndarray, k: int, a: float, b: float,
                 lam: Optional[float], alpha: float):
        self.graph = graph
        self.truth = truth
        self.side = side
        self.k = k
        self.a = a
        self.b = b
        self.lam = lam
        self.alpha = alpha

    @property
    def n(self) -> int:
        return self.graph.num_vertices


def _intensities(config: ExperimentConfig) -> List[Tuple[Optional[float], float, float]]:
    if config.lambdas:
        return [(lam, *invert_snr(config.a_plus_b, lam, config.k)) for lam in config.lambdas]
    return [(None, config.a, config.b)]


def _load_bundle(config: ExperimentConfig, seed: int) -> DatasetBundle:
    if config.dataset:
        return load_named_dataset(config.dataset, seed)
    return load_edge_list(config.edges_path, config.labels_path, seed)


def _problems(config: ExperimentConfig, seed: int) -> Iterable[_Problem]:
    if config.synthetic:
        for lam, a, b in _intensities(config):
            for alpha in config.alphas:
                instance = sample(SymmetricParams(n=config.n, k=config.k, a=a, b=b, alpha=alpha), seed)
                yield _Problem(instance.graph, instance.tau, instance.tau_tilde, config.k, a, b, lam, alpha)
        return

    order_seed, noise_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(2))
    bundle = _load_bundle(config, order_seed)
    problems = community_problems(bundle.k, config.alphas, config.eps)
    if problems:
        raise ConfigError(f"{config.resolved_model_id()} has k={bundle.k}: " + "; ".join(problems))
    if config.a is not None and config.b is not None:
        a, b = config.a, config.b
    else:
        a, b = estimate_ab(bundle)
    for alpha in config.alphas:
        side = synthesize_side_info(bundle, alpha, noise_seed)
        yield _Problem(bundle.graph, bundle.truth, side, bundle.k, a, b, None, alpha)


def _base_row(config: ExperimentConfig, problem: _Problem, algorithm: str, radius: Optional[int],
              a_shift: float, b_shift: float, a_used: float, b_used: float, trial: int, seed: int) -> Dict[str, Any]:
    radius_free = is_radius_free(algorithm)
    return {
        "model_id": config.resolved_model_id(),
        "algorithm": algorithm,
        "n": problem.n,
        "k": problem.k,
        "a": problem.a,
        "b": problem.b,
        "lambda": "" if problem.lam is None else problem.lam,
        "alpha": problem.alpha,
        "a_shift": "" if radius_free else a_shift,
        "b_shift": "" if radius_free else b_shift,
        "a_used": "" if radius_free else a_used,
        "b_used": "" if radius_free else b_used,
        "R": "" if radius_free else radius,
        "eps": "" if radius_free else config.eps,
        "engine": "" if radius_free else config.engine,
        "seed": config.seed,
        "trial": trial,
        "trial_seed": seed,
    }


def _settings(config: ExperimentConfig, problem: _Problem):
    """Yield ``(algorithm, radius, a_shift, b_shift, a_used, b_used)``; radius-free algorithms appear once."""
    first_shift = True
    for a_shift in config.a_shifts:
        for b_shift in config.b_shifts:
            a_used, b_used = perturb_parameters(problem.a, problem.b, a_shift, b_shift)
            for algorithm in config.algorithms:
                if is_radius_free(algorithm):
                    if first_shift:
                        yield algorithm, None, a_shift, b_shift, a_used, b_used
                    continue
                for radius in config.radii:
                    yield algorithm, radius, a_shift, b_shift, a_used, b_used
            first_shift = False


def _evaluate(config: ExperimentConfig, problem: _Problem, algorithm: str, radius: Optional[int],
              a_used: float, b_used: float, seed: int) -> Tuple[float, float, int]:
    start = time.perf_counter()
    if algorithm == "offline-bp":
        params = KernelParams(a=a_used, b=b_used, alpha=problem.alpha, k=problem.k, eps=config.eps)
        run = offline_bp(problem.graph, problem.side, params, radius, engine=config.engine)
        estimates, touched = run.estimates, run.messages_touched
    else:
        estimator = make_algorithm(algorithm, problem.k, a_used, b_used, problem.alpha, radius or 0,
                                   config.eps, config.engine, seed)
        estimates = replay(estimator, problem.graph, problem.side)
        touched = estimator.messages_touched
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    report = accuracy(estimates, problem.truth, problem.k)
    return report.accuracy, elapsed_ms, touched


def run_trial(config: ExperimentConfig, trial: int) -> List[Dict[str, Any]]:
    """All rows of one trial, in a fixed order: intensities, alphas, shifts, algorithms, radii."""
    seed = trial_seed(config.seed, trial)
    rows = []
    for problem in _problems(config, seed):
        for algorithm, radius, a_shift, b_shift, a_used, b_used in _settings(config, problem):
            base = _base_row(config, problem, algorithm, radius, a_shift, b_shift, a_used, b_used, trial, seed)
            if config.mode == "trace":
                rows.extend(_trace_rows(config, problem, algorithm, radius, a_used, b_used, seed, base))
                continue
            score, elapsed_ms, touched = _evaluate(config, problem, algorithm, radius, a_used, b_used, seed)
            rows.append({
                **base,
                "accuracy": score,
                "runtime_ms": round(elapsed_ms, 3) if config.timing else "",
                "messages_touched": touched,
            })
            logger.debug(f"trial {trial} {algorithm} R={radius} alpha={problem.alpha}: accuracy {score:.4f}")
    return rows


def _trace_rows(config: ExperimentConfig, problem: _Problem, algorithm: str, radius: Optional[int],
                a_used: float, b_used: float, seed: int, base: Dict[str, Any]) -> List[Dict[str, Any]]:
    estimator = make_algorithm(algorithm, problem.k, a_used, b_used, problem.alpha, radius or 0,
                               config.eps, config.engine, seed)
    checkpoints = [t for t in config.checkpoints if t <= problem.n]
    dropped = len(config.checkpoints) - len(checkpoints)
    if dropped:
        logger.warning(f"Ignoring {dropped} checkpoints beyond n={problem.n}")
    full_snr = snr(problem.a, problem.b, problem.k)
    rows = []
    for point in accuracy_trace(estimator, problem.graph, problem.side, problem.truth, problem.k, checkpoints):
        rows.append({
            **base,
            "accuracy": point.accuracy,
            "runtime_ms": round(point.elapsed_ms, 3) if config.timing else "",
            "messages_touched": point.messages_touched,
            "t": point.t,
            "revealed": point.revealed,
            "snr_t": point.t / problem.n * full_snr,
        })
    return rows


def _generate(config: ExperimentConfig) -> List[Dict[str, Any]]:
    lam, a, b = _intensities(config)[0]
    alpha = config.alphas[0] if config.alphas else 0.0
    rows = []
    for trial in range(config.trials):
        seed = trial_seed(config.seed, trial)
        instance = sample(SymmetricParams(n=config.n, k=config.k, a=a, b=b, alpha=alpha), seed)
        directory = Path(config.output) / f"trial-{trial}" if config.trials > 1 else Path(config.output)
        save_instance(instance, directory)
        rows.append({
            "model_id": config.resolved_model_id(), "n": config.n, "k": config.k, "a": a, "b": b,
            "lambda": "" if lam is None else lam, "alpha": alpha, "seed": config.seed, "trial": trial,
            "trial_seed": seed, "num_edges": instance.graph.num_edges, "path": str(directory),
        })
    return rows


def _estimate_params(config: ExperimentConfig) -> List[Dict[str, Any]]:
    if config.dataset == "all":
        names = sorted(configs.get("datasets", {}))
    elif config.dataset:
        names = [config.dataset]
    else:
        names = []

    rows = []
    bundles = [(name, load_named_dataset(name, config.seed)) for name in names]
    if not names:
        bundles.append((None, load_edge_list(config.edges_path, config.labels_path, config.seed)))
    for name, bundle in bundles:
        a, b = estimate_ab(bundle)
        expected = get_dataset_entry(name).get("expected", {}) if name else {}
        rows.append({
            "dataset": bundle.name, "num_vertices": bundle.n, "num_edges": bundle.graph.num_edges, "k": bundle.k,
            "a": round(a, 4), "b": round(b, 4),
            "expected_a": expected.get("a", ""), "expected_b": expected.get("b", ""),
        })
        logger.info(f"{bundle.name}: a={a:.2f} b={b:.2f} (n={bundle.n}, |E|={bundle.graph.num_edges}, k={bundle.k})")
    return rows


def columns_for(config: ExperimentConfig) -> List[str]:
    return {
        "trace": TRACE_COLUMNS,
        "estimate-params": ESTIMATE_COLUMNS,
        "generate": GENERATE_COLUMNS,
    }.get(config.mode, COLUMNS)


def run_experiment(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """
    Execute an experiment and return its rows.

    Trials run in a process pool when ``workers > 1``; rows come back in trial order either
    way, so the output does not depend on the worker count.
    """
    if config.mode == "generate":
        return _generate(config)
    if config.mode == "estimate-params":
        return _estimate_params(config)

    logger.info(f"Running {config.mode} on {config.resolved_model_id()}: {config.trials} trials, "
                f"algorithms {config.algorithms}, radii {config.radii}, alphas {config.alphas}")
    trials = range(config.trials)
    rows: List[Dict[str, Any]] = []
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, config.trials)) as executor:
            results = executor.map(run_trial, [config] * config.trials, trials)
            for trial_rows in tqdm(results, total=config.trials, desc="Trials", disable=None):
                rows.extend(trial_rows)
    else:
        for trial in tqdm(trials, desc="Trials", disable=None):
            rows.extend(run_trial(config, trial))
    return rows


def write_rows(rows: List[Dict[str, Any]], columns: List[str], output: Optional[str] = None,
               stream: Optional[TextIO] = None) -> None:
    """Write rows as CSV to ``output`` (a file path) or to ``stream`` (stdout by default)."""
    if output:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            _write(rows, columns, f)
        logger.info(f"Wrote {len(rows)} rows to {path}")
    else:
        _write(rows, columns, stream or sys.stdout)


def _write(rows: List[Dict[str, Any]], columns: List[str], f: TextIO) -> None:
    writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
