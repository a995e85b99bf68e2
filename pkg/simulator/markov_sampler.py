"""
Markov chains for sampling.

Finite-state, time-homogeneous chains are built from a transition matrix H
(or as a lazy random walk on a state graph), validated for irreducibility and
aperiodicity, and analysed through their stationary law π* and the decay of
the deviation Π* - H^k. The continuous-state chain is the autoregressive
label process used by the streaming logistic workload.

Eigenvalues of a general H may be complex. ``lambda2_abs`` is the largest
modulus among the non-unit eigenvalues, ``lambda_min`` the modulus of the
non-unit eigenvalue with the smallest real part, and
``lambda_hat = (max(lambda2_abs, lambda_min) + 1) / 2``.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Any, List, Optional, Tuple, Union

import networkx as nx
import numpy as np
from loguru import logger

from config.settings import (
    AR_SUBDIAGONAL_RANGE,
    LABEL_FLIP_PROBABILITY,
    ROW_SUM_TOLERANCE,
    STRUCTURAL_TOLERANCE,
)

from .exceptions import ChainError, ConfigError
from .graph_topology import CommGraph
from .reports import CheckResult, ValidationReport

# Above this eigenvector condition number the deviation is computed by
# repeated multiplication instead of the eigen-expansion.
_MODE_CONDITION_LIMIT = 1e8


def _positive_digraph(H: np.ndarray) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(H.shape[0]))
    rows, cols = np.nonzero(H > 0)
    g.add_edges_from(zip(rows.tolist(), cols.tolist()))
    return g


def _boolean_power(pattern: np.ndarray, exponent: int) -> np.ndarray:
    """Support of pattern^exponent, by repeated squaring on 0/1 matrices"""
    result = np.eye(pattern.shape[0], dtype=bool)
    base = pattern.astype(bool)
    while exponent > 0:
        if exponent & 1:
            result = (result.astype(np.int64) @ base.astype(np.int64)) > 0
        base = (base.astype(np.int64) @ base.astype(np.int64)) > 0
        exponent >>= 1
    return result


def chain_period(H: np.ndarray) -> int:
    """Period of an irreducible chain: gcd of level differences along BFS edges"""
    g = _positive_digraph(np.asarray(H))
    level = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for node in frontier:
            for succ in g.successors(node):
                if succ not in level:
                    level[succ] = level[node] + 1
                    nxt.append(succ)
        frontier = nxt
    period = 0
    for a, b in g.edges():
        if a in level and b in level:
            period = math.gcd(period, level[a] + 1 - level[b])
    return abs(period) if period else 1


def validate_chain(H: np.ndarray, tol: float = STRUCTURAL_TOLERANCE) -> ValidationReport:
    """
    Report on the stochastic, irreducibility and aperiodicity checks

    Irreducibility is strong connectivity of the positive-entry digraph.
    Aperiodicity of an irreducible chain is entrywise positivity of
    H^((M-1)^2 + 1) (Wielandt's primitivity exponent).
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ChainError(f"Transition matrix must be square, got shape {H.shape}", prop="shape")
    M = H.shape[0]
    report = ValidationReport(subject=f"transition matrix (M={M})")

    negative = float(max(-H.min(), 0.0))
    row_error = float(np.max(np.abs(H.sum(axis=1) - 1.0)))
    stochastic_ok = negative == 0.0 and row_error <= tol
    report.checks.append(CheckResult(
        name="stochastic",
        passed=stochastic_ok,
        violation=max(negative, row_error),
        detail="" if stochastic_ok else f"min entry {H.min():.3g}, row-sum error {row_error:.3g}",
    ))

    digraph = _positive_digraph(H)
    irreducible = nx.is_strongly_connected(digraph)
    components = nx.number_strongly_connected_components(digraph)
    report.checks.append(CheckResult(
        name="irreducibility",
        passed=irreducible,
        violation=float(components - 1),
        detail="" if irreducible else f"{components} communicating classes",
    ))

    if irreducible:
        wielandt = (M - 1) ** 2 + 1
        aperiodic = bool(np.all(_boolean_power(H > 0, wielandt)))
        detail = "" if aperiodic else f"periodic (period {chain_period(H)})"
    else:
        aperiodic = nx.is_aperiodic(digraph)
        detail = "" if aperiodic else "periodic cycle structure"
    report.checks.append(CheckResult(
        name="aperiodicity",
        passed=aperiodic,
        violation=0.0 if aperiodic else 1.0,
        detail=detail,
    ))
    return report


def stationary_distribution(H: np.ndarray) -> np.ndarray:
    """Solve πH = π, Σπ = 1 in the least-squares sense"""
    M = H.shape[0]
    A = np.vstack((H.T - np.eye(M), np.ones((1, M))))
    b = np.zeros(M + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


@dataclass(frozen=True, eq=False)
class FiniteMarkovChain:
    H: np.ndarray
    pi_star: np.ndarray
    eigenvalues: Tuple[complex, ...]
    lambda2_abs: float
    lambda_min: float
    lambda_hat: float
    _cdf_rows: List[List[float]] = field(repr=False)
    _modes: Optional[List[Tuple[complex, np.ndarray]]] = field(repr=False)

    @property
    def M(self) -> int:
        return self.H.shape[0]

    def stationary_matrix(self) -> np.ndarray:
        """Π*: every row equal to π*"""
        return np.tile(self.pi_star, (self.M, 1))

    def transition(self, state: int, rng: np.random.Generator) -> int:
        """Draw the successor of ``state`` with one uniform from ``rng``"""
        row = self._cdf_rows[state]
        return min(bisect_right(row, rng.random()), self.M - 1)

    def initial_state(self) -> int:
        return 0


def _spectral_fields(H: np.ndarray):
    eigenvalues, vectors = np.linalg.eig(H)
    unit = int(np.argmin(np.abs(eigenvalues - 1.0)))
    others = np.delete(eigenvalues, unit)
    if others.size:
        lambda2_abs = float(np.max(np.abs(others)))
        lambda_min = float(abs(others[np.argmin(others.real)]))
    else:
        lambda2_abs = lambda_min = 0.0
    lambda_hat = (max(lambda2_abs, lambda_min) + 1.0) / 2.0

    modes = None
    if others.size and np.linalg.cond(vectors) < _MODE_CONDITION_LIMIT:
        inverse = np.linalg.inv(vectors)
        modes = [
            (complex(eigenvalues[i]), np.outer(vectors[:, i], inverse[i, :]))
            for i in range(len(eigenvalues)) if i != unit
        ]
    order = np.argsort(-np.abs(eigenvalues), kind="stable")
    return tuple(complex(v) for v in eigenvalues[order]), lambda2_abs, lambda_min, lambda_hat, modes


def _make_chain(H: np.ndarray) -> FiniteMarkovChain:
    H = np.array(H, dtype=float)
    H.setflags(write=False)
    eigenvalues, lambda2_abs, lambda_min, lambda_hat, modes = _spectral_fields(H)
    cdf_rows = [np.cumsum(row).tolist() for row in H]
    return FiniteMarkovChain(
        H=H,
        pi_star=stationary_distribution(H),
        eigenvalues=eigenvalues,
        lambda2_abs=lambda2_abs,
        lambda_min=lambda_min,
        lambda_hat=lambda_hat,
        _cdf_rows=cdf_rows,
        _modes=modes,
    )


def build_explicit_chain(H: np.ndarray) -> FiniteMarkovChain:
    """Validate H and return the chain with π* and spectral fields"""
    report = validate_chain(H)
    for check in report.checks:
        if not check.passed:
            message = f"{check.name} check failed"
            if check.detail:
                message += f": {check.detail}"
            raise ChainError(message, prop=check.name)
    chain = _make_chain(np.asarray(H, dtype=float))
    logger.debug(f"chain M={chain.M} lambda2={chain.lambda2_abs:.6g} lambda_hat={chain.lambda_hat:.6g}")
    return chain


def build_random_walk_chain(sample_graph: Union[CommGraph, nx.Graph]) -> FiniteMarkovChain:
    """Lazy random walk: H_ii = 1/2, H_ij = 1/(2 deg_i) for neighbours j"""
    if isinstance(sample_graph, CommGraph):
        adjacency = sample_graph.adjacency.astype(float)
    else:
        if sample_graph.number_of_nodes() == 0 or not nx.is_connected(sample_graph):
            raise ChainError("State graph is not connected; the walk would be reducible", prop="irreducibility")
        nodes = sorted(sample_graph.nodes())
        adjacency = nx.to_numpy_array(sample_graph, nodelist=nodes, weight=None)
        np.fill_diagonal(adjacency, 0.0)

    M = adjacency.shape[0]
    H = np.zeros((M, M))
    for i in range(M):
        degree = adjacency[i].sum()
        if degree == 0:
            H[i, i] = 1.0
            continue
        H[i] = adjacency[i] / (2.0 * degree)
        H[i, i] = 0.5
    return build_explicit_chain(H)


def deviation_sup(chain: FiniteMarkovChain, k: int) -> float:
    """max entrywise |Π* - H^k|"""
    if k < 0:
        raise ValueError(f"Power must be non-negative, got k={k}")
    if chain.M == 1:
        return 0.0
    if chain._modes is not None:
        deviation = sum(value ** k * projector for value, projector in chain._modes)
        return float(np.max(np.abs(deviation.real)))
    deviation = chain.stationary_matrix() - np.linalg.matrix_power(chain.H, k)
    return float(np.max(np.abs(deviation)))


def fit_deviation_constant(chain: FiniteMarkovChain, k_max: int = 50) -> float:
    """max over k in 0..k_max of deviation_sup(k) / lambda_hat^k"""
    return max(deviation_sup(chain, k) / chain.lambda_hat ** k for k in range(k_max + 1))


def tv_mixing_time(chain: FiniteMarkovChain, eps: float = 0.25, max_steps: int = 10000) -> Optional[int]:
    """Smallest k with max_i TV(H^k[i, :], π*) <= eps, or None past ``max_steps``"""
    state = np.eye(chain.M)
    for k in range(max_steps + 1):
        worst = 0.5 * np.max(np.sum(np.abs(state - chain.pi_star), axis=1))
        if worst <= eps:
            return k
        state = state @ chain.H
    logger.warning(f"chain did not mix to TV {eps} within {max_steps} steps")
    return None


def mixing_index(k: int, C_H: float, B: float, lambda_hat: float, K_H: int) -> int:
    """min{ max{ ceil(ln(k/(2 C_H B^2)) / ln(1/lambda_hat)), K_H }, k }"""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if C_H <= 0 or B <= 0:
        raise ValueError(f"C_H and B must be positive, got C_H={C_H}, B={B}")
    if not (0.0 < lambda_hat < 1.0):
        raise ValueError(f"lambda_hat must lie in (0, 1), got {lambda_hat}")
    horizon = math.log(k / (2.0 * C_H * B * B)) / math.log(1.0 / lambda_hat)
    # the 1e-9 slack keeps exact integer ratios such as ln(1024)/ln(2) from rounding up
    return min(max(math.ceil(horizon - 1e-9), K_H), k)


@dataclass
class TrajectoryCursor:
    """Single-owner position on a chain trajectory"""

    state: Any
    rng: np.random.Generator
    steps: int = 0


def step(cursor: TrajectoryCursor, chain) -> Any:
    """Advance ``cursor`` one transition of ``chain`` and return the new state"""
    cursor.state = chain.transition(cursor.state, cursor.rng)
    cursor.steps += 1
    return cursor.state


def sample_path(chain: FiniteMarkovChain, start: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    """
    The ``steps`` states following ``start``; draws the same uniforms, in
    the same order, as ``steps`` calls of :func:`step`
    """
    uniforms = rng.random(steps).tolist()
    rows = chain._cdf_rows
    last = chain.M - 1
    path = np.empty(steps, dtype=np.int64)
    state = int(start)
    for t, u in enumerate(uniforms):
        state = min(bisect_right(rows[state], u), last)
        path[t] = state
    return path


def empirical_frequencies(path: np.ndarray, M: int) -> np.ndarray:
    return np.bincount(np.asarray(path, dtype=np.int64), minlength=M) / max(len(path), 1)


# -- continuous-state autoregressive chain ---------------------------------

@dataclass(frozen=True, eq=False)
class ArChainState:
    """
    One state of the autoregressive label process

    ``xi1`` is the regressor, ``xi2`` the noisy label, ``A`` the subdiagonal
    transition matrix and ``u`` the unit ground-truth direction.
    """

    xi1: np.ndarray
    xi2: int
    A: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        n = self.xi1.shape[0]
        if self.A.shape != (n, n) or self.u.shape != (n,):
            raise ConfigError(f"AR state dimensions disagree: xi1 {self.xi1.shape}, A {self.A.shape}, u {self.u.shape}")
        off_subdiagonal = self.A - np.diag(np.diag(self.A, -1), -1)
        if np.any(off_subdiagonal != 0.0):
            raise ConfigError("AR matrix must be zero outside the subdiagonal")
        if abs(np.linalg.norm(self.u) - 1.0) > ROW_SUM_TOLERANCE:
            raise ConfigError(f"Ground-truth direction must be unit norm, got {np.linalg.norm(self.u)}")


def ar_step(
    state: ArChainState,
    rng,
    clip_radius: Optional[float] = None,
    flip_prob: float = LABEL_FLIP_PROBABILITY,
) -> ArChainState:
    """
    xi1 <- A xi1 + e1 w with w ~ N(0, 1), optionally clipped to a ball;
    the clean label is 1 iff <u, xi1> > 0 and is flipped with ``flip_prob``
    """
    xi1 = state.A @ state.xi1
    xi1[0] += rng.standard_normal()
    if clip_radius is not None:
        norm = np.linalg.norm(xi1)
        if norm > clip_radius:
            xi1 *= clip_radius / norm
    clean = 1 if float(state.u @ xi1) > 0.0 else 0
    label = 1 - clean if rng.random() < flip_prob else clean
    return replace(state, xi1=xi1, xi2=label)


@dataclass(frozen=True, eq=False)
class ArProcess:
    """Per-node autoregressive chain; the continuous counterpart of FiniteMarkovChain"""

    A: np.ndarray
    u: np.ndarray
    clip_radius: Optional[float] = None
    flip_prob: float = LABEL_FLIP_PROBABILITY

    def __post_init__(self):
        low, high = AR_SUBDIAGONAL_RANGE
        sub = np.diag(self.A, -1)
        if sub.size and (sub.min() < low or sub.max() > high):
            raise ConfigError(f"AR subdiagonal entries must lie in [{low}, {high}]")

    @property
    def n(self) -> int:
        return self.u.shape[0]

    def initial_state(self) -> ArChainState:
        return ArChainState(xi1=np.zeros(self.n), xi2=0, A=self.A, u=self.u)

    def transition(self, state: ArChainState, rng) -> ArChainState:
        return ar_step(state, rng, clip_radius=self.clip_radius, flip_prob=self.flip_prob)


def random_ar_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """Subdiagonal matrix with entries drawn from U[0.8, 0.99]"""
    low, high = AR_SUBDIAGONAL_RANGE
    A = np.zeros((n, n))
    if n > 1:
        A[np.arange(1, n), np.arange(n - 1)] = rng.uniform(low, high, size=n - 1)
    return A


def random_unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the unit sphere; Gaussian draw, normalised"""
    while True:
        v = rng.standard_normal(n)
        norm = np.linalg.norm(v)
        if norm > 0.0:
            return v / norm
