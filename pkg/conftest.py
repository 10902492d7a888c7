import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from modules.exact_oracle import exact_statistics  # noqa: E402
from modules.graph_model import IsingModel, build_random_tree  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch, tmp_path):
    """Keep a developer's config.txt and ISING_LOG out of the tests"""
    monkeypatch.setenv('ISING_CONFIG', str(tmp_path / 'absent-config.txt'))
    monkeypatch.delenv('ISING_LOG', raising=False)


def random_tree_model(n, seed, coupling_scale=1.0, bias_scale=0.3):
    rng = np.random.default_rng(seed)
    graph = build_random_tree(n, rng_seed=seed)
    couplings = rng.uniform(-coupling_scale, coupling_scale, size=graph.edge_count)
    biases = rng.uniform(-bias_scale, bias_scale, size=n)
    return IsingModel(graph, couplings, biases)


@pytest.fixture
def tree_model():
    return random_tree_model(8, seed=11)


@pytest.fixture
def tree_stats(tree_model):
    return exact_statistics(tree_model)
