#!/usr/bin/env python3
"""
Tests for real-world dataset loading, intensity estimation and synthetic side information

The checks against the bundled datasets are marked ``dataset`` and skipped when the files
are not under STREAMBP_DATA_DIR (see fetch_datasets.py).

Usage: pytest test/test_datasets.py
"""

import pytest
import os
import sys

import numpy as np

# Add the parent directory to the path to import the streambp package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from streambp.config import configs
from streambp.datasets import (
    DatasetBundle,
    DatasetError,
    DatasetParseError,
    EstimationError,
    dataset_paths,
    estimate_ab,
    load_edge_list,
    load_named_dataset,
    synthesize_side_info,
)
from streambp.graph import StreamingGraph


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def bundle_with_truth(truth, k):
    graph = StreamingGraph()
    for _ in truth:
        graph.insert_vertex([])
    return DatasetBundle(name="synthetic", graph=graph, truth=np.asarray(truth, dtype=np.int64), k=k, seed=0)


@pytest.mark.unit
class TestLoadEdgeList:

    def setup_method(self):
        self.labels_text = "a A\nb B\nc A\n"

    def test_duplicates_and_self_loops_dropped(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a b\nb a\nc c\nb c\n")
        labels = write(tmp_path / "labels.txt", self.labels_text)
        bundle = load_edge_list(edges, labels, seed=0)
        assert bundle.graph.num_edges == 2
        assert bundle.n == 3
        assert bundle.k == 2
        assert bundle.truth.tolist() == [0, 1, 0]
        assert bundle.label_names == ["A", "B"]
        assert bundle.vertex_names == ["a", "b", "c"]

    def test_commas_and_comments(self, tmp_path):
        edges = write(tmp_path / "edges.csv", "# source,target\na,b  # first\n\nb,c\n")
        labels = write(tmp_path / "labels.csv", "a,paper,A\nb,paper,B\nc,paper,A\n")
        bundle = load_edge_list(edges, labels, seed=0)
        assert bundle.graph.num_edges == 2
        assert bundle.truth.tolist() == [0, 1, 0]

    def test_parse_error_names_line(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a b\nc\n")
        labels = write(tmp_path / "labels.txt", self.labels_text)
        with pytest.raises(DatasetParseError, match=":2:"):
            load_edge_list(edges, labels, seed=0)

    def test_conflicting_labels(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a b\n")
        labels = write(tmp_path / "labels.txt", "a A\nb B\na B\n")
        with pytest.raises(DatasetParseError, match=":3:"):
            load_edge_list(edges, labels, seed=0)

    def test_unlabeled_vertices_removed_with_edges(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a b\nb x\nx c\n")
        labels = write(tmp_path / "labels.txt", self.labels_text)
        bundle = load_edge_list(edges, labels, seed=0)
        assert bundle.n == 3
        assert bundle.graph.num_edges == 1

    def test_drop_isolated(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a b\n")
        labels = write(tmp_path / "labels.txt", self.labels_text)
        assert load_edge_list(edges, labels, seed=0).n == 3
        bundle = load_edge_list(edges, labels, seed=0, drop_isolated=True)
        assert bundle.n == 2
        assert bundle.vertex_names == ["a", "b"]

    def test_missing_files(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a b\n")
        with pytest.raises(DatasetError):
            load_edge_list(edges, tmp_path / "missing.txt", seed=0)
        with pytest.raises(DatasetError):
            load_edge_list(tmp_path / "missing.txt", write(tmp_path / "labels.txt", self.labels_text), seed=0)

    def test_arrival_order_from_seed(self, tmp_path):
        names = [f"v{i}" for i in range(50)]
        edges = write(tmp_path / "edges.txt", "".join(f"{u} {v}\n" for u, v in zip(names, names[1:])))
        labels = write(tmp_path / "labels.txt", "".join(f"{x} {i % 3}\n" for i, x in enumerate(names)))
        first = load_edge_list(edges, labels, seed=5)
        second = load_edge_list(edges, labels, seed=5)
        other = load_edge_list(edges, labels, seed=6)
        assert first.graph.arrival_order == second.graph.arrival_order
        assert list(first.graph.edges()) == list(second.graph.edges())
        assert first.graph.arrival_order != other.graph.arrival_order
        assert list(first.graph.edges()) == list(other.graph.edges())


@pytest.mark.unit
class TestEstimateAB:

    def test_two_pairs(self, tmp_path):
        edges = write(tmp_path / "edges.txt", "a0 a1\nb0 b1\n")
        labels = write(tmp_path / "labels.txt", "a0 A\na1 A\nb0 B\nb1 B\n")
        bundle = load_edge_list(edges, labels, seed=0)
        # two intra edges over two intra pairs, no cross edges over four cross pairs
        assert estimate_ab(bundle) == pytest.approx((4.0, 0.0))
        assert bundle.estimated_a == pytest.approx(4.0)

    def test_invariant_to_order_and_label_names(self, tmp_path):
        rng = np.random.default_rng(0)
        names = [f"v{i}" for i in range(40)]
        lines = [f"{names[u]} {names[v]}\n" for u in range(40) for v in range(u + 1, 40) if rng.random() < 0.1]
        edges = write(tmp_path / "edges.txt", "".join(lines))
        classes = rng.integers(0, 3, size=40)
        labels = write(tmp_path / "labels.txt", "".join(f"{x} c{c}\n" for x, c in zip(names, classes)))
        renamed = write(tmp_path / "renamed.txt", "".join(f"{x} z{2 - c}\n" for x, c in zip(names, classes)))
        base = estimate_ab(load_edge_list(edges, labels, seed=1))
        assert estimate_ab(load_edge_list(edges, labels, seed=2)) == pytest.approx(base)
        assert estimate_ab(load_edge_list(edges, renamed, seed=3)) == pytest.approx(base)

    def test_single_community(self):
        with pytest.raises(EstimationError):
            estimate_ab(bundle_with_truth([0, 0, 0], 1))

    def test_singleton_communities(self):
        with pytest.raises(EstimationError):
            estimate_ab(bundle_with_truth([0, 1, 2], 3))


@pytest.mark.unit
class TestSideInformation:

    def test_alpha_zero_is_truth(self):
        bundle = bundle_with_truth(np.arange(30) % 3, 3)
        assert np.array_equal(synthesize_side_info(bundle, 0.0, seed=1), bundle.truth)

    def test_flip_rate(self):
        bundle = bundle_with_truth(np.arange(50000) % 2, 2)
        side = synthesize_side_info(bundle, 0.3, seed=2)
        assert abs(np.mean(side != bundle.truth) - 0.3) < 0.01

    def test_uninformative_at_max_alpha(self):
        truth = np.arange(60000) % 3
        bundle = bundle_with_truth(truth, 3)
        side = synthesize_side_info(bundle, 2 / 3, seed=3)
        for s in range(3):
            given = side[truth == s]
            frequencies = np.bincount(given, minlength=3) / len(given)
            tolerance = 5 * np.sqrt((1 / 3) * (2 / 3) / len(given))
            assert np.all(np.abs(frequencies - 1 / 3) < tolerance)

    def test_alpha_out_of_range(self):
        with pytest.raises(ValueError):
            synthesize_side_info(bundle_with_truth([0, 1], 2), 0.6, seed=0)


@pytest.mark.unit
class TestNamedDatasets:

    def test_unknown_dataset(self):
        with pytest.raises(DatasetError):
            load_named_dataset("no-such-dataset", seed=0)

    def test_missing_files(self, tmp_path):
        with pytest.raises(DatasetError):
            load_named_dataset("cora", seed=0, data_dir=tmp_path)


@pytest.mark.dataset
@pytest.mark.parametrize("name", sorted(configs.get("datasets", {})))
def test_dataset_statistics(name):
    edges_path, labels_path = dataset_paths(name)
    if not edges_path.exists() or not labels_path.exists():
        pytest.skip(f"{name} files not present under {edges_path.parent}")
    expected = configs["datasets"][name]["expected"]
    bundle = load_named_dataset(name, seed=0)
    assert bundle.n == expected["num_vertices"]
    assert bundle.graph.num_edges == expected["num_edges"]
    assert bundle.k == expected["k"]
    a, b = estimate_ab(bundle)
    assert a == pytest.approx(expected["a"], abs=0.01)
    assert b == pytest.approx(expected["b"], abs=0.01)
