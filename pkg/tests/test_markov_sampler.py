"""
Tests for finite chains, decay diagnostics and the autoregressive process
"""

import math

import pytest
import numpy as np
from numpy.testing import assert_allclose

from simulator.exceptions import ChainError, ConfigError
from simulator.graph_topology import build_graph
from simulator.markov_sampler import (
    ArChainState,
    ArProcess,
    TrajectoryCursor,
    ar_step,
    build_explicit_chain,
    build_random_walk_chain,
    chain_period,
    deviation_sup,
    empirical_frequencies,
    fit_deviation_constant,
    mixing_index,
    random_ar_matrix,
    random_unit_vector,
    sample_path,
    stationary_distribution,
    step,
    tv_mixing_time,
    validate_chain,
)
from utils.matrix_io import read_trajectory, write_trajectory
from utils.seeding import Purpose, derive_stream


@pytest.mark.unit
class TestValidateChain:
    """Test stochastic, irreducibility and aperiodicity checks"""

    def test_two_state_passes(self):
        report = validate_chain(np.array([[0.9, 0.1], [0.2, 0.8]]))
        assert report.passed

    def test_cycle_is_periodic(self, cycle3_matrix):
        """The 3-cycle is irreducible but has period 3"""
        report = validate_chain(cycle3_matrix)
        assert report.get("irreducibility").passed
        assert report.failures() == ["aperiodicity"]
        assert "period 3" in report.get("aperiodicity").detail
        assert chain_period(cycle3_matrix) == 3

    def test_identity_is_reducible(self):
        report = validate_chain(np.eye(2))
        assert not report.get("irreducibility").passed

    def test_negative_entry(self):
        report = validate_chain(np.array([[1.2, -0.2], [0.5, 0.5]]))
        assert not report.get("stochastic").passed

    def test_bad_row_sum(self):
        report = validate_chain(np.array([[0.5, 0.4], [0.5, 0.5]]))
        assert not report.get("stochastic").passed
        assert report.get("stochastic").violation == pytest.approx(0.1)

    def test_non_square(self):
        with pytest.raises(ChainError) as excinfo:
            validate_chain(np.ones((2, 3)) / 3)
        assert excinfo.value.prop == "shape"

    def test_build_names_failing_property(self, cycle3_matrix):
        """build_explicit_chain raises with the failing property"""
        with pytest.raises(ChainError) as excinfo:
            build_explicit_chain(cycle3_matrix)
        assert excinfo.value.prop == "aperiodicity"


@pytest.mark.unit
class TestStationaryLaw:
    """Test pi* and the spectral fields"""

    def test_two_state(self, two_state_chain):
        assert_allclose(two_state_chain.pi_star, [2 / 3, 1 / 3], atol=1e-12)
        assert two_state_chain.lambda2_abs == pytest.approx(0.7)
        assert two_state_chain.lambda_min == pytest.approx(0.7)
        assert two_state_chain.lambda_hat == pytest.approx(0.85)

    def test_lazy_path3(self, lazy_path3_chain):
        """Degree-proportional stationary law"""
        assert_allclose(lazy_path3_chain.pi_star, [0.25, 0.5, 0.25], atol=1e-12)
        assert_allclose(
            lazy_path3_chain.H,
            [[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]],
        )

    def test_lazy_path4_spectrum(self, lazy_path4_chain):
        """Eigenvalues (1 + cos(pi j / 3)) / 2 = 1, 3/4, 1/4, 0"""
        assert lazy_path4_chain.lambda2_abs == pytest.approx(0.75)
        assert lazy_path4_chain.lambda_min == pytest.approx(0.0, abs=1e-12)
        assert lazy_path4_chain.lambda_hat == pytest.approx(0.875)

    def test_single_state(self):
        chain = build_explicit_chain(np.array([[1.0]]))
        assert_allclose(chain.pi_star, [1.0])
        assert deviation_sup(chain, 5) == 0.0

    def test_stationary_is_fixed_point(self):
        H = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.5, 0.25, 0.25]])
        pi = stationary_distribution(H)
        assert_allclose(pi @ H, pi, atol=1e-12)
        assert pi.sum() == pytest.approx(1.0)

    def test_random_walk_on_disconnected_graph(self):
        import networkx as nx
        g = nx.Graph()
        g.add_edges_from([(0, 1), (2, 3)])
        with pytest.raises(ChainError) as excinfo:
            build_random_walk_chain(g)
        assert excinfo.value.prop == "irreducibility"


@pytest.mark.unit
class TestDeviation:
    """Test the decay of max |Pi* - H^k|"""

    def test_k_one(self, two_state_chain):
        """Largest entry is |2/3 - 0.2| = 7/15"""
        assert deviation_sup(two_state_chain, 1) == pytest.approx(7 / 15, abs=1e-14)

    def test_k_zero(self, two_state_chain):
        """|Pi* - I| peaks at 2/3"""
        assert deviation_sup(two_state_chain, 0) == pytest.approx(2 / 3, abs=1e-14)

    def test_ratio_is_second_eigenvalue(self, two_state_chain):
        for k in range(1, 51):
            ratio = deviation_sup(two_state_chain, k + 1) / deviation_sup(two_state_chain, k)
            assert abs(ratio - 0.7) <= 1e-10

    def test_agrees_with_matrix_power(self, lazy_path4_chain):
        for k in (0, 1, 5, 20):
            direct = np.max(np.abs(
                lazy_path4_chain.stationary_matrix() - np.linalg.matrix_power(lazy_path4_chain.H, k)
            ))
            assert deviation_sup(lazy_path4_chain, k) == pytest.approx(direct, abs=1e-13)

    def test_negative_k(self, two_state_chain):
        with pytest.raises(ValueError):
            deviation_sup(two_state_chain, -1)

    def test_fitted_constant_bounds_tail(self, lazy_path4_chain):
        C = fit_deviation_constant(lazy_path4_chain)
        for k in range(51, 501):
            assert deviation_sup(lazy_path4_chain, k) <= C * lazy_path4_chain.lambda_hat ** k * (1 + 1e-9)

    def test_tv_mixing_time(self, two_state_chain):
        """Row 1 of H^k is at TV distance (2/3) 0.7^k from pi*"""
        expected = math.ceil(math.log(0.25 / (2 / 3)) / math.log(0.7))
        assert tv_mixing_time(two_state_chain, eps=0.25) == expected

    def test_tv_mixing_time_cap(self, two_state_chain):
        assert tv_mixing_time(two_state_chain, eps=1e-12, max_steps=5) is None


@pytest.mark.unit
class TestMixingIndex:
    """Test the mixing-index formula"""

    def test_exact_power_of_two(self):
        """ln(1024 / 1) / ln 2 = 10"""
        assert mixing_index(1024, C_H=0.5, B=1.0, lambda_hat=0.5, K_H=0) == 10

    def test_floor_at_K_H(self):
        assert mixing_index(1024, C_H=0.5, B=1.0, lambda_hat=0.5, K_H=20) == 20

    def test_capped_at_k(self):
        assert mixing_index(5, C_H=0.5, B=1.0, lambda_hat=0.5, K_H=20) == 5

    def test_rounds_up(self):
        """ln 5 / ln 2 = 2.32"""
        assert mixing_index(5, C_H=0.5, B=1.0, lambda_hat=0.5, K_H=0) == 3

    @pytest.mark.parametrize("kwargs", [
        dict(k=0, C_H=1.0, B=1.0, lambda_hat=0.5, K_H=0),
        dict(k=10, C_H=0.0, B=1.0, lambda_hat=0.5, K_H=0),
        dict(k=10, C_H=1.0, B=1.0, lambda_hat=1.0, K_H=0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            mixing_index(**kwargs)


@pytest.mark.unit
class TestTrajectories:
    """Test cursors, bulk paths and trajectory dumps"""

    def test_sample_path_matches_step(self, lazy_path3_chain):
        """Bulk sampling consumes the stream exactly like repeated steps"""
        path = sample_path(lazy_path3_chain, 0, 200, derive_stream(5, Purpose.CHAIN, 0))
        cursor = TrajectoryCursor(state=0, rng=derive_stream(5, Purpose.CHAIN, 0))
        stepped = [step(cursor, lazy_path3_chain) for _ in range(200)]
        assert path.tolist() == stepped
        assert cursor.steps == 200

    def test_transitions_respect_support(self, lazy_path3_chain):
        """The walk never jumps between the two ends"""
        path = sample_path(lazy_path3_chain, 0, 5000, derive_stream(1, Purpose.CHAIN, 0))
        jumps = np.abs(np.diff(np.concatenate(([0], path))))
        assert jumps.max() <= 1

    def test_frequencies(self):
        assert_allclose(empirical_frequencies(np.array([0, 1, 1, 2]), 4), [0.25, 0.5, 0.25, 0.0])

    def test_dump_roundtrip(self, lazy_path3_chain, tmp_path):
        path = sample_path(lazy_path3_chain, 1, 50, derive_stream(2, Purpose.CHAIN, 0))
        written = write_trajectory(tmp_path / "traj.txt", path.tolist())
        assert read_trajectory(written) == path.tolist()


@pytest.mark.unit
class TestArProcess:
    """Test the autoregressive label chain"""

    def test_random_matrix_is_subdiagonal(self):
        A = random_ar_matrix(6, np.random.default_rng(0))
        sub = np.diag(A, -1)
        assert np.all((sub >= 0.8) & (sub <= 0.99))
        assert np.count_nonzero(A) == 5

    def test_unit_vector(self):
        u = random_unit_vector(7, np.random.default_rng(0))
        assert np.linalg.norm(u) == pytest.approx(1.0)

    def test_shift_structure(self):
        """xi1 <- A xi1 + e1 w: coordinate i+1 becomes a_i times coordinate i"""
        rng = np.random.default_rng(3)
        process = ArProcess(A=random_ar_matrix(4, rng), u=random_unit_vector(4, rng))
        state = process.initial_state()
        first = process.transition(state, rng)
        assert_allclose(first.xi1[1:], 0.0)
        second = process.transition(first, rng)
        assert second.xi1[1] == pytest.approx(process.A[1, 0] * first.xi1[0])

    def test_clip(self):
        """Clipped states never leave the ball"""
        rng = np.random.default_rng(4)
        process = ArProcess(A=random_ar_matrix(3, rng), u=random_unit_vector(3, rng), clip_radius=0.5)
        state = process.initial_state()
        for _ in range(200):
            state = process.transition(state, rng)
            assert np.linalg.norm(state.xi1) <= 0.5 + 1e-12

    def test_label_noise_rate(self):
        """About 20% of labels disagree with sign(<u, xi1>)"""
        rng = np.random.default_rng(5)
        process = ArProcess(A=random_ar_matrix(3, rng), u=random_unit_vector(3, rng))
        state = process.initial_state()
        flips = 0
        total = 20000
        for _ in range(total):
            state = process.transition(state, rng)
            clean = 1 if state.u @ state.xi1 > 0 else 0
            flips += int(state.xi2 != clean)
        assert flips / total == pytest.approx(0.2, abs=0.015)

    def test_no_flip(self):
        rng = np.random.default_rng(6)
        A = random_ar_matrix(2, rng)
        u = np.array([1.0, 0.0])
        state = ArChainState(xi1=np.zeros(2), xi2=0, A=A, u=u)
        for _ in range(50):
            state = ar_step(state, rng, flip_prob=0.0)
            assert state.xi2 == int(state.xi1[0] > 0)

    def test_subdiagonal_range_enforced(self):
        A = np.zeros((3, 3))
        A[1, 0] = A[2, 1] = 0.5
        with pytest.raises(ConfigError):
            ArProcess(A=A, u=np.array([1.0, 0.0, 0.0]))

    def test_state_validation(self):
        with pytest.raises(ConfigError, match="subdiagonal"):
            ArChainState(xi1=np.zeros(2), xi2=0, A=np.eye(2), u=np.array([1.0, 0.0]))
        with pytest.raises(ConfigError, match="unit norm"):
            ArChainState(xi1=np.zeros(2), xi2=0, A=np.zeros((2, 2)), u=np.array([2.0, 0.0]))
