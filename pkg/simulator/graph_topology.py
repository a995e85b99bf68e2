"""
Communication graphs and mixing matrices.

A CommGraph is an undirected connected graph over nodes 0..m-1. Its
Metropolis mixing matrix W is symmetric, doubly stochastic, positive on
edges and zero off them, with 1 = λ1 > λ2 >= ... >= λm > -1.
"""

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import FrozenSet, Iterable, Literal, Optional, Tuple, Union

import networkx as nx
import numpy as np
from loguru import logger

from config.settings import ER_MAX_RETRIES, ROW_SUM_TOLERANCE, STRUCTURAL_TOLERANCE
from utils.matrix_io import read_matrix, write_matrix
from utils.seeding import Purpose, derive_int_seed

from .exceptions import GraphError
from .reports import CheckResult, ValidationReport

TopologyKind = Literal["ring", "path", "complete", "star", "erdos_renyi", "custom"]
TOPOLOGY_KINDS = ("ring", "path", "complete", "star", "erdos_renyi")

Edge = Tuple[int, int]


def _normalize_edges(edges: Iterable[Edge]) -> FrozenSet[Edge]:
    normalized = set()
    for i, l in edges:
        i, l = int(i), int(l)
        normalized.add((min(i, l), max(i, l)))
    return frozenset(normalized)


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph; self-weights live only in W"""

    m: int
    edges: FrozenSet[Edge]
    kind: TopologyKind = "custom"
    _adjacency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise GraphError(f"A graph needs at least one node, got m={self.m}")

        edges = _normalize_edges(self.edges)
        object.__setattr__(self, "edges", edges)

        adjacency = np.zeros((self.m, self.m), dtype=bool)
        for i, l in edges:
            if i == l:
                raise GraphError(f"Self-loop ({i},{l}) is not a valid edge")
            if not (0 <= i < self.m and 0 <= l < self.m):
                raise GraphError(f"Edge ({i},{l}) out of range for m={self.m}")
            adjacency[i, l] = adjacency[l, i] = True
        adjacency.setflags(write=False)
        object.__setattr__(self, "_adjacency", adjacency)

        if not nx.is_connected(self.to_networkx()):
            raise GraphError(f"{self.kind} graph on {self.m} nodes is not connected")

    @property
    def adjacency(self) -> np.ndarray:
        return self._adjacency

    @cached_property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(int(d) for d in self._adjacency.sum(axis=1))

    def neighbors(self, node: int) -> list[int]:
        """Neighbors of ``node``, excluding the node itself"""
        return [int(l) for l in np.flatnonzero(self._adjacency[node])]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.m))
        g.add_edges_from(self.edges)
        return g

    @classmethod
    def from_adjacency(cls, matrix: np.ndarray, kind: TopologyKind = "custom") -> "CommGraph":
        """Build from a symmetric 0/1 (or weighted) adjacency; the diagonal is ignored"""
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise GraphError(f"Adjacency must be square, got shape {matrix.shape}")
        rows, cols = np.nonzero(matrix)
        edges = [(int(i), int(l)) for i, l in zip(rows, cols) if i < l]
        return cls(m=matrix.shape[0], edges=frozenset(edges), kind=kind)

    def save(self, path: Union[str, Path]) -> Path:
        """Write the adjacency matrix in the plain-text matrix format"""
        return write_matrix(path, self._adjacency.astype(float))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CommGraph":
        return cls.from_adjacency(read_matrix(path))


def build_graph(
    kind: str,
    m: int,
    seed: int = 0,
    edge_prob: Optional[float] = None,
    max_retries: int = ER_MAX_RETRIES,
) -> CommGraph:
    """
    Build a connected graph of the requested family

    Erdős–Rényi draws are resampled until connected, at most ``max_retries``
    times, from a generator derived from ``seed``.
    """
    if m < 1:
        raise GraphError(f"A graph needs at least one node, got m={m}")

    if kind == "ring":
        g = nx.cycle_graph(m)
    elif kind == "path":
        g = nx.path_graph(m)
    elif kind == "complete":
        g = nx.complete_graph(m)
    elif kind == "star":
        g = nx.star_graph(m - 1)
    elif kind == "erdos_renyi":
        if edge_prob is None or not (0.0 < edge_prob <= 1.0):
            raise GraphError(f"erdos_renyi needs 0 < edge_prob <= 1, got {edge_prob}")
        rng = np.random.default_rng(derive_int_seed(seed, Purpose.GRAPH))
        for attempt in range(1, max_retries + 1):
            g = nx.gnp_random_graph(m, edge_prob, seed=int(rng.integers(2**31 - 1)))
            if nx.is_connected(g):
                logger.debug(f"erdos_renyi(m={m}, p={edge_prob}) connected after {attempt} draw(s)")
                break
        else:
            raise GraphError(
                f"erdos_renyi(m={m}, p={edge_prob}) not connected after {max_retries} draws"
            )
    else:
        raise GraphError(f"Unknown topology '{kind}', expected one of {', '.join(TOPOLOGY_KINDS)}")

    edges = frozenset((min(i, l), max(i, l)) for i, l in g.edges() if i != l)
    return CommGraph(m=m, edges=edges, kind=kind)


def _sorted_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, nonincreasing"""
    return np.sort(np.linalg.eigvalsh(matrix))[::-1]


def _second_magnitude(eigenvalues: np.ndarray) -> float:
    if len(eigenvalues) < 2:
        return 0.0
    return float(max(abs(eigenvalues[1]), abs(eigenvalues[-1])))


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """
    Symmetric doubly stochastic weights over a CommGraph

    ``lambda2`` is max(|λ2|, |λm|), the contraction factor of W - P.
    """

    W: np.ndarray
    eigenvalues: Tuple[float, ...]
    lambda2: float

    @classmethod
    def from_array(cls, W: np.ndarray) -> "MixingMatrix":
        W = np.array(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise GraphError(f"Mixing matrix must be square, got shape {W.shape}")
        W.setflags(write=False)
        eigenvalues = _sorted_eigenvalues(W)
        return cls(W=W, eigenvalues=tuple(float(v) for v in eigenvalues), lambda2=_second_magnitude(eigenvalues))

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.lambda2

    def consensus_projector(self) -> np.ndarray:
        return np.full((self.m, self.m), 1.0 / self.m)

    def save(self, path: Union[str, Path]) -> Path:
        return write_matrix(path, self.W)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MixingMatrix":
        return cls.from_array(read_matrix(path))


def metropolis_weights(g: CommGraph) -> MixingMatrix:
    """w_il = 1/(1 + max(deg_i, deg_l)) on edges, w_ii = 1 - sum of the row"""
    degrees = g.degrees
    W = np.zeros((g.m, g.m))
    for i, l in sorted(g.edges):
        weight = 1.0 / (1.0 + max(degrees[i], degrees[l]))
        W[i, l] = weight
        W[l, i] = weight
    for i in range(g.m):
        W[i, i] = 1.0 - sum(W[i, l] for l in range(g.m) if l != i)
    return MixingMatrix.from_array(W)


def validate_mixing(
    W: Union[MixingMatrix, np.ndarray],
    g: CommGraph,
    tol: float = STRUCTURAL_TOLERANCE,
) -> ValidationReport:
    """
    Check the four mixing-matrix properties against ``g``

    graph: zero weight off the edge set, positive weight on it.
    symmetry: W equals its transpose.
    null_space: W1 = 1 and the eigenvalue 1 has multiplicity one.
    spectral: every eigenvalue lies in (-1, 1].
    """
    matrix = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise GraphError(f"Mixing matrix must be square, got shape {matrix.shape}")
    if matrix.shape[0] != g.m:
        raise GraphError(f"Mixing matrix is {matrix.shape[0]}x{matrix.shape[0]} but graph has {g.m} nodes")

    m = g.m
    report = ValidationReport(subject=f"mixing matrix on {g.kind} graph (m={m})")

    off_diagonal = ~np.eye(m, dtype=bool)
    off_edges = off_diagonal & ~g.adjacency
    outside = float(np.max(np.abs(matrix[off_edges]), initial=0.0))
    on_edges = matrix[g.adjacency]
    deficit = float(np.max(tol - on_edges, initial=0.0)) if on_edges.size else 0.0
    graph_ok = outside <= tol and (on_edges.size == 0 or bool(np.all(on_edges > tol)))
    report.checks.append(CheckResult(
        name="graph",
        passed=graph_ok,
        violation=max(outside, deficit),
        detail="" if graph_ok else f"max off-edge weight {outside:.3g}, min edge weight {on_edges.min(initial=np.inf):.3g}",
    ))

    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    report.checks.append(CheckResult(
        name="symmetry",
        passed=asymmetry <= tol,
        violation=asymmetry,
        detail="" if asymmetry <= tol else f"max |W - W^T| = {asymmetry:.3g}",
    ))

    eigenvalues = _sorted_eigenvalues((matrix + matrix.T) / 2.0)
    row_error = float(np.max(np.abs(matrix.sum(axis=1) - 1.0)))
    unit_multiplicity = int(np.sum(np.abs(eigenvalues - 1.0) <= tol))
    null_ok = row_error <= tol and unit_multiplicity == 1
    report.checks.append(CheckResult(
        name="null_space",
        passed=null_ok,
        violation=max(row_error, float(abs(unit_multiplicity - 1))),
        detail="" if null_ok else f"row-sum error {row_error:.3g}, eigenvalue-1 multiplicity {unit_multiplicity}",
    ))

    top, bottom = float(eigenvalues[0]), float(eigenvalues[-1])
    spectral_ok = top <= 1.0 + tol and bottom > -1.0 + tol
    report.checks.append(CheckResult(
        name="spectral",
        passed=spectral_ok,
        violation=max(top - 1.0, (-1.0 + tol) - bottom, 0.0),
        detail="" if spectral_ok else f"eigenvalue range [{bottom:.6g}, {top:.6g}]",
    ))

    return report


def is_doubly_stochastic(W: MixingMatrix, tol: float = ROW_SUM_TOLERANCE) -> bool:
    ones = np.ones(W.m)
    return bool(np.allclose(W.W @ ones, ones, atol=tol, rtol=0) and np.allclose(ones @ W.W, ones, atol=tol, rtol=0))


def power_deviation(W: Union[MixingMatrix, np.ndarray], k: int) -> float:
    """Spectral norm of W^k - P with P = 11^T/m"""
    if k < 0:
        raise ValueError(f"Power must be non-negative, got k={k}")
    matrix = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    m = matrix.shape[0]
    deviation = np.linalg.matrix_power(matrix, k) - np.full((m, m), 1.0 / m)
    return float(np.linalg.norm(deviation, 2))
