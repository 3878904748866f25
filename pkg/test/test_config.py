#!/usr/bin/env python3
"""
Tests for configuration loading and environment placeholders

Usage: pytest test/test_config.py
"""

import pytest
import os
import sys

# Add the parent directory to the path to import the streambp package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from streambp import config
from streambp.config import (
    configs,
    get_experiment_preset,
    get_kernel_defaults,
    get_summary_config,
    get_vote_weight,
    has_unresolved_placeholder,
    replace_env_placeholders,
)


@pytest.mark.unit
class TestPlaceholders:

    def test_nested_replacement(self, monkeypatch):
        monkeypatch.setenv("STREAMBP_TEST_URL", "https://example.org/edges.txt")
        raw = {"edges_url": "${STREAMBP_TEST_URL}", "mirrors": ["${STREAMBP_TEST_URL}", 3], "k": 2}
        resolved = replace_env_placeholders(raw)
        assert resolved == {
            "edges_url": "https://example.org/edges.txt",
            "mirrors": ["https://example.org/edges.txt", 3],
            "k": 2,
        }

    def test_missing_variable_kept(self, monkeypatch):
        monkeypatch.delenv("STREAMBP_TEST_MISSING", raising=False)
        value = replace_env_placeholders("${STREAMBP_TEST_MISSING}")
        assert value == "${STREAMBP_TEST_MISSING}"
        assert has_unresolved_placeholder(value)
        assert not has_unresolved_placeholder("https://example.org")


@pytest.mark.unit
class TestBundledConfig:

    def test_kernel_defaults(self):
        defaults = get_kernel_defaults()
        assert 0 < defaults["eps"] < 0.01
        assert defaults["engine"] in ("auto", "probability", "llr")

    def test_vote_weights(self):
        assert [get_vote_weight(name) for name in ("vote1x", "vote2x", "vote3x")] == [1, 2, 3]
        with pytest.raises(ValueError):
            get_vote_weight("vote9x")

    def test_presets_present(self):
        preset = get_experiment_preset("ks-sweep-k2")
        assert preset["a_plus_b"] == 8.0
        assert preset["lambdas"] == [1.0, 1.5, 2.0, 2.5, 3.0]
        with pytest.raises(ValueError):
            get_experiment_preset("missing")

    def test_dataset_manifest(self):
        assert set(configs["datasets"]) == {"citeseer", "cora", "polblogs"}
        assert configs["datasets"]["polblogs"]["expected"]["k"] == 2

    def test_summary_parameters(self):
        assert get_summary_config("neighbor-mean")["max_range"] == 64
        assert get_summary_config("unknown") == {}

    def test_missing_file_gives_empty_config(self, tmp_path, monkeypatch):
        monkeypatch.setattr(config, "CONFIG_DIR", str(tmp_path))
        assert config.load_json_config("algorithms.json") == {}
        assert config.load_algorithm_config()["voting"]["vote2x"] == 2
