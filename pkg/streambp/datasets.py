import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from streambp.config import DATA_DIR, get_dataset_entry
from streambp.graph import StreamingGraph
from streambp.model import apply_noise_channel

logger = logging.getLogger(__name__)

SEPARATOR = re.compile(r"[\s,]+")


class DatasetParseError(ValueError):
    """Raised for a malformed line in an edge or label file"""
    pass


class DatasetError(ValueError):
    """Raised for missing files, empty graphs, unknown datasets and checksum mismatches"""
    pass


class EstimationError(ValueError):
    """Raised when community sizes make the intensity estimates undefined"""
    pass


@dataclass
class DatasetBundle:
    """
    A labeled real-world graph ready to be streamed. Vertex ids are dense 0..n-1 in order of
    first appearance in the label file, labels are dense 0..k-1 in sorted order of the raw
    class names, and the arrival order is a uniform permutation drawn from ``seed``.
    """
    name: str
    graph: StreamingGraph
    truth: np.ndarray
    k: int
    seed: int
    vertex_names: List[str] = field(default_factory=list)
    label_names: List[str] = field(default_factory=list)
    estimated_a: Optional[float] = None
    estimated_b: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.truth)


def _tokens(path: Path, minimum: int):
    """Yield ``(line_number, tokens)`` for every non-empty, non-comment line."""
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = [t for t in SEPARATOR.split(line) if t]
            if len(tokens) < minimum:
                raise DatasetParseError(f"{path}:{number}: expected at least {minimum} fields, got {line!r}")
            yield number, tokens


def _read_labels(path: Path) -> Dict[str, str]:
    labels: Dict[str, str] = {}
    for number, tokens in _tokens(path, 2):
        vertex, label = tokens[0], tokens[-1]
        if vertex in labels and labels[vertex] != label:
            raise DatasetParseError(f"{path}:{number}: vertex {vertex!r} labeled both {labels[vertex]!r} and {label!r}")
        labels[vertex] = label
    return labels


def load_edge_list(
    edges_path: Union[str, Path],
    labels_path: Union[str, Path],
    seed: int,
    name: Optional[str] = None,
    drop_isolated: bool = False,
) -> DatasetBundle:
    """
    Load an edge list ("u v" per line, comma or whitespace separated, '#' comments) and a
    label file ("v label" per line) as an undirected simple graph.

    Edge directions are ignored, duplicate edges and self-loops are dropped, and vertices
    without a label are removed together with their edges. With ``drop_isolated`` vertices
    left without any edge are removed too.
    """
    edges_path, labels_path = Path(edges_path), Path(labels_path)
    if not labels_path.exists():
        raise DatasetError(f"Label file {labels_path} does not exist")
    if not edges_path.exists():
        raise DatasetError(f"Edge file {edges_path} does not exist")

    raw_labels = _read_labels(labels_path)
    pairs = set()
    dropped_unlabeled = dropped_loops = 0
    for number, tokens in _tokens(edges_path, 2):
        u, v = tokens[0], tokens[1]
        if u == v:
            dropped_loops += 1
            continue
        if u not in raw_labels or v not in raw_labels:
            dropped_unlabeled += 1
            continue
        pairs.add((u, v) if u < v else (v, u))

    names = list(raw_labels)
    if drop_isolated:
        touched = {x for pair in pairs for x in pair}
        names = [x for x in names if x in touched]
    if not names:
        raise DatasetError(f"No labeled vertices left in {edges_path}")

    label_names = sorted(set(raw_labels[x] for x in names))
    label_index = {label: i for i, label in enumerate(label_names)}
    vertex_index = {x: i for i, x in enumerate(names)}
    truth = np.array([label_index[raw_labels[x]] for x in names], dtype=np.int64)
    edges = sorted((vertex_index[u], vertex_index[v]) for u, v in pairs)

    order = np.random.default_rng(seed).permutation(len(names))
    graph = StreamingGraph.from_arrivals(order.tolist(), edges)
    logger.info(
        f"Loaded {name or edges_path.stem}: {graph.num_vertices} vertices, {graph.num_edges} edges, "
        f"k={len(label_names)} ({dropped_loops} self-loops, {dropped_unlabeled} edges to unlabeled vertices dropped)"
    )
    return DatasetBundle(
        name=name or edges_path.stem,
        graph=graph,
        truth=truth,
        k=len(label_names),
        seed=seed,
        vertex_names=names,
        label_names=label_names,
    )


def estimate_ab(bundle: DatasetBundle) -> Tuple[float, float]:
    """
    Intensities matching the observed edge densities:
    a = n * (intra-community edges) / (intra-community pairs) and
    b = n * (cross-community edges) / (cross-community pairs).
    The results are also stored on the bundle.
    """
    truth = bundle.truth
    n, k = bundle.n, bundle.k
    sizes = np.bincount(truth, minlength=k).astype(float)
    if (sizes < 1).any():
        raise EstimationError(f"Every community needs at least one vertex, sizes are {sizes.astype(int).tolist()}")
    intra_pairs = float((sizes * (sizes - 1) / 2).sum())
    cross_pairs = float((sizes.sum() ** 2 - (sizes ** 2).sum()) / 2)
    if intra_pairs == 0 or cross_pairs == 0:
        raise EstimationError(f"Need both intra- and cross-community pairs (intra={intra_pairs}, cross={cross_pairs})")

    intra = cross = 0
    for u, v in bundle.graph.edges():
        if truth[u] == truth[v]:
            intra += 1
        else:
            cross += 1
    a = n * intra / intra_pairs
    b = n * cross / cross_pairs
    bundle.estimated_a, bundle.estimated_b = a, b
    logger.debug(f"{bundle.name}: intra={intra} cross={cross} -> a={a:.4f} b={b:.4f}")
    return a, b


def synthesize_side_info(bundle: DatasetBundle, alpha: float, seed: int) -> np.ndarray:
    """Noisy labels from the true ones: kept with probability 1 - alpha, else uniform among the others."""
    if not 0.0 <= alpha <= (bundle.k - 1) / bundle.k:
        raise ValueError(f"alpha must lie in [0, {(bundle.k - 1) / bundle.k}], got {alpha}")
    return apply_noise_channel(bundle.truth, bundle.k, alpha, np.random.default_rng(seed))


def sha256_of(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_paths(name: str, data_dir: Optional[Path] = None) -> Tuple[Path, Path]:
    entry = get_dataset_entry(name)
    root = Path(data_dir) if data_dir is not None else DATA_DIR
    return root / entry["edges"], root / entry["labels"]


def verify_checksums(name: str, data_dir: Optional[Path] = None) -> bool:
    """
    Compare dataset files against the manifest checksums. Missing checksums are reported
    and treated as unverified, not as a mismatch.
    """
    entry = get_dataset_entry(name)
    checksums = entry.get("sha256") or {}
    verified = True
    for role, path in zip(("edges", "labels"), dataset_paths(name, data_dir)):
        expected = checksums.get(role)
        if not expected:
            logger.warning(f"No checksum recorded for {name} {role}; {path} is unverified")
            verified = False
            continue
        actual = sha256_of(path)
        if actual != expected:
            raise DatasetError(f"Checksum mismatch for {path}: expected {expected}, got {actual}")
    return verified


def load_named_dataset(name: str, seed: int, data_dir: Optional[Path] = None) -> DatasetBundle:
    """Load a dataset listed in ``datasets.json`` from the data directory."""
    try:
        entry = get_dataset_entry(name)
    except ValueError as e:
        raise DatasetError(str(e)) from e
    edges_path, labels_path = dataset_paths(name, data_dir)
    if not edges_path.exists() or not labels_path.exists():
        raise DatasetError(
            f"Files for dataset '{name}' not found under {edges_path.parent}; run fetch_datasets.py first"
        )
    verify_checksums(name, data_dir)
    return load_edge_list(edges_path, labels_path, seed, name=name, drop_isolated=bool(entry.get("drop_isolated", False)))
