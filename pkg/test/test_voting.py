#!/usr/bin/env python3
"""
Tests for the streaming voting baselines

Usage: pytest test/test_voting.py
"""

import pytest
import os
import sys

# Add the parent directory to the path to import the streambp package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from streambp.bp_kernel import LabelError
from streambp.model import SymmetricParams, sample
from streambp.voting import VotingState


@pytest.mark.unit
class TestVotingState:

    def setup_method(self):
        self.state = VotingState(k=2)
        self.state.insert(0, [])
        self.state.insert(0, [])
        self.state.insert(1, [])

    def test_isolated_vertices_follow_side_labels(self):
        assert self.state.finalize().labels.tolist() == [0, 0, 1]

    def test_tie_goes_to_own_side_label(self):
        # side label 1 and neighbor votes 0, 0, 1 give scores (2, 2)
        self.state.insert(1, [0, 1, 2])
        assert self.state.estimates[3] == 1

    def test_heavier_side_vote(self):
        state = VotingState(k=2, delta=3)
        state.insert(0, [])
        state.insert(0, [])
        state.insert(0, [])
        state.insert(1, [0, 1])
        assert state.estimates[3] == 1
        state.insert(1, [0, 1, 2])
        assert state.estimates[4] == 1
        state.insert(0, [])
        # four neighbor votes for 0 outweigh the side vote of 3
        state.insert(1, [0, 1, 2, 5])
        assert state.estimates[6] == 0

    def test_tie_without_own_label_takes_lowest(self):
        state = VotingState(k=3)
        for side in (0, 1, 1, 0):
            state.insert(side, [])
        # scores (2, 2, 1): side label 2 is not among the winners
        state.insert(2, [0, 1, 2, 3])
        assert state.estimates[4] == 0

    def test_missing_side_label(self):
        self.state.insert(None, [2])
        assert self.state.estimates[3] == 1

    def test_labels_are_never_revised(self):
        instance = sample(SymmetricParams(n=300, k=3, a=4.0, b=1.0, alpha=0.3), 0)
        state = VotingState(k=3)
        seen = {}
        for vertex, earlier in instance.graph.arrivals():
            state.insert(int(instance.tau_tilde[vertex]), earlier, vertex=vertex)
            seen[vertex] = state.estimates[vertex]
            assert all(state.estimates[v] == label for v, label in seen.items())

    def test_from_name_uses_configured_weight(self):
        assert VotingState.from_name("vote1x", 2).delta == 1
        assert VotingState.from_name("vote3x", 2).delta == 3
        assert VotingState.from_name("vote2x", 4).name == "vote2x"

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            VotingState(k=2, delta=0)
        with pytest.raises(LabelError):
            self.state.insert(2, [])
