"""
Pytest configuration and fixtures for the DMGD simulator tests
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from simulator.graph_topology import build_graph, metropolis_weights
from simulator.markov_sampler import build_explicit_chain, build_random_walk_chain
from simulator.objectives import QuadraticSum


@pytest.fixture
def path3_graph():
    """Path graph 0 - 1 - 2"""
    return build_graph("path", 3)


@pytest.fixture
def path3_mixing(path3_graph):
    """Metropolis weights on the path-3 graph"""
    return metropolis_weights(path3_graph)


@pytest.fixture
def two_state_chain():
    """H = [[0.9, 0.1], [0.2, 0.8]], pi* = (2/3, 1/3), second eigenvalue 0.7"""
    return build_explicit_chain(np.array([[0.9, 0.1], [0.2, 0.8]]))


@pytest.fixture
def lazy_path3_chain():
    """Lazy walk on path-3, pi* = (1/4, 1/2, 1/4)"""
    return build_random_walk_chain(build_graph("path", 3))


@pytest.fixture
def lazy_path4_chain():
    return build_random_walk_chain(build_graph("path", 4))


@pytest.fixture
def cycle3_matrix():
    """Deterministic 3-cycle, period 3"""
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


@pytest.fixture
def small_quadratic():
    """Random quadratic finite sum: m=3 nodes, M=4 components, n=5"""
    return QuadraticSum.random(3, 4, 5, seed=7)


@pytest.fixture
def scalar_quadratic():
    """m=1, M=1, n=1: f(x) = 1/2 (x - 3)^2"""
    Q = np.ones((1, 1, 1, 1))
    b = np.full((1, 1, 1), 3.0)
    c = np.full((1, 1), 4.5)
    return QuadraticSum(Q, b, c)


@pytest.fixture
def linear_objective():
    """m=1, M=1, n=10: f(x) = <a, x> with a = (1, ..., 10) / 10"""
    a = np.arange(1, 11) / 10.0
    return QuadraticSum(np.zeros((1, 1, 10, 10)), -a.reshape(1, 1, 10)), a


@pytest.fixture
def write_config(tmp_path):
    """Write key=value lines to a config file and return its path"""
    def _write(text: str, name: str = "run.cfg") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture
def quick_config_text():
    """A short DMGD run on a ring of 4 nodes"""
    return (
        "# quick run\n"
        "algorithm=dmgd\n"
        "iterations=40\n"
        "topology=ring\n"
        "nodes=4\n"
        "dimension=3\n"
        "chain=lazy_path\n"
        "chain_states=3\n"
        "seed=11\n"
        "cadence=5\n"
    )


# Pytest configuration
def pytest_configure(config):
    """Configure pytest"""
    config.addinivalue_line(
        "markers", "integration: mark test as integration test"
    )
    config.addinivalue_line(
        "markers", "unit: mark test as unit test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
