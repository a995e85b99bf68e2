"""
Iteration schemes.

All schemes run in synchronous rounds: every node reads its neighbours'
k-th iterates, then updates. In matrix form

    x^{k+1} = W x^k - γ_k u^k

where row i of u^k is node i's sampled gradient (or two-point estimate) at
its own pre-mixing iterate x^k(i).

- dmgd: one step of the node's chain per round.
- zo_dmgd: as dmgd with the two-point estimate n(f(x+δh) - f(x))/δ·h.
- dsgd_t: a fresh length-T trajectory per node per round from the common
  initial state; only the last state is used and T samples are charged.
- mcgd: a single shared iterate moved by the mean of the nodes' sampled
  gradients.
"""

import time
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from config.run_config import RunConfig
from utils.matrix_io import read_matrix
from utils.seeding import Purpose, node_streams

from .exceptions import ConfigError, NonFiniteError, RunError
from .graph_topology import CommGraph, MixingMatrix, build_graph, metropolis_weights
from .markov_sampler import (
    FiniteMarkovChain,
    TrajectoryCursor,
    build_explicit_chain,
    build_random_walk_chain,
    random_unit_vector,
    step,
)
from .metrics_harness import MetricRow, RunRecord, consensus_error, grad_norm_at_mean
from .objectives import Objective, QuadraticSum, StreamingLogistic

MatrixLike = Union[MixingMatrix, np.ndarray]


@dataclass
class NodeStateMatrix:
    """
    Row i is x^k(i). ``u`` holds the update stack of the round that produced
    this state; ``samples_per_node`` is the cumulative sample charge.
    """

    x: np.ndarray
    k: int = 0
    u: Optional[np.ndarray] = None
    samples_per_node: int = 0

    @classmethod
    def replicate(cls, x0: np.ndarray, m: int) -> "NodeStateMatrix":
        """x(1) = ... = x(m) = x0"""
        return cls(x=np.tile(np.asarray(x0, dtype=float), (m, 1)))

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def mean(self) -> np.ndarray:
        return self.x.mean(axis=0)


@dataclass(frozen=True)
class StepSchedule:
    """
    γ_k = 1/(k+1)^θ with 1/2 < θ < 1, or a constant γ; the optional
    zeroth-order smoothing is δ_k = 1/(k+1)^ρ with θ + ρ > 1
    """

    theta: float = 0.51
    rho: Optional[float] = None
    constant: Optional[float] = None

    def __post_init__(self):
        if self.constant is None:
            if not (0.5 < self.theta < 1.0):
                raise ConfigError(f"theta must satisfy 1/2 < theta < 1, got {self.theta}")
            if self.rho is not None and self.theta + self.rho <= 1.0:
                raise ConfigError(f"theta + rho must exceed 1, got {self.theta + self.rho}")
        elif self.constant <= 0:
            raise ConfigError(f"constant stepsize must be positive, got {self.constant}")
        if self.rho is not None and self.rho <= 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")

    @classmethod
    def from_config(cls, config: RunConfig) -> "StepSchedule":
        rho = config.rho if config.algorithm == "zo_dmgd" else None
        constant = config.constant_gamma if config.stepsize == "constant" else None
        return cls(theta=config.theta, rho=rho, constant=constant)

    def gamma(self, k: int) -> float:
        if self.constant is not None:
            return self.constant
        return 1.0 / (k + 1) ** self.theta

    def gammas(self, K: int) -> np.ndarray:
        """γ_0 .. γ_{K-1}"""
        if self.constant is not None:
            return np.full(K, float(self.constant))
        return 1.0 / np.arange(1, K + 1, dtype=float) ** self.theta

    def step_conditions(self) -> bool:
        """Σ γ_k = ∞ and Σ ln²k γ_k² < ∞, which hold exactly for 1/2 < θ <= 1"""
        return self.constant is None and 0.5 < self.theta <= 1.0

    def delta(self, k: int) -> float:
        if self.rho is None:
            raise ConfigError("schedule has no zeroth-order smoothing exponent rho")
        return 1.0 / (k + 1) ** self.rho


def _matrix(W: MatrixLike) -> np.ndarray:
    return W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)


def _per_node(chains: Any, m: int) -> Sequence[Any]:
    """A single chain is shared by every node"""
    if isinstance(chains, (list, tuple)):
        if len(chains) != m:
            raise ConfigError(f"Expected {m} per-node chains, got {len(chains)}")
        return chains
    return [chains] * m


def _checked(vector: np.ndarray, what: str, iteration: int, node: int) -> np.ndarray:
    if not np.all(np.isfinite(vector)):
        raise NonFiniteError(f"non-finite {what} at node {node}", iteration=iteration, node=node)
    return vector


def _mix_and_update(state: NodeStateMatrix, W: MatrixLike, gamma: float, U: np.ndarray, charge: int) -> NodeStateMatrix:
    matrix = _matrix(W)
    if matrix.shape != (state.m, state.m):
        raise ConfigError(f"Mixing matrix {matrix.shape} does not match {state.m} nodes")
    x_next = matrix @ state.x - gamma * U
    return NodeStateMatrix(x=x_next, k=state.k + 1, u=U, samples_per_node=state.samples_per_node + charge)


def dmgd_step(
    state: NodeStateMatrix,
    W: MatrixLike,
    cursors: Sequence[TrajectoryCursor],
    chains: Any,
    obj: Objective,
    gamma: float,
) -> NodeStateMatrix:
    """x^{k+1}(i) = Σ_l w_il x^k(l) - γ_k ∇f^i_{j_{i,k}}(x^k(i))"""
    chains = _per_node(chains, state.m)
    U = np.empty_like(state.x)
    for i in range(state.m):
        sample = step(cursors[i], chains[i])
        U[i] = _checked(obj.grad_component(i, sample, state.x[i]), "gradient", state.k, i)
    return _mix_and_update(state, W, gamma, U, charge=1)


def zo_estimate(obj: Objective, j: int, sample: Any, x: np.ndarray, delta: float, h: np.ndarray) -> np.ndarray:
    """n (f(x + δh) - f(x)) / δ · h from exactly two function values"""
    if delta <= 0:
        raise ConfigError(f"smoothing delta must be positive, got {delta}")
    h = np.asarray(h, dtype=float)
    if abs(np.linalg.norm(h) - 1.0) > 1e-12:
        raise ConfigError(f"direction must be a unit vector, got norm {np.linalg.norm(h)}")
    n = x.shape[0]
    shifted = obj.value_component(j, sample, x + delta * h)
    base = obj.value_component(j, sample, x)
    return n * (shifted - base) / delta * h


def zo_dmgd_step(
    state: NodeStateMatrix,
    W: MatrixLike,
    cursors: Sequence[TrajectoryCursor],
    chains: Any,
    obj: Objective,
    gamma: float,
    delta: float,
    sphere_rngs: Sequence[np.random.Generator],
) -> NodeStateMatrix:
    """dmgd_step with each node's gradient replaced by its own two-point estimate"""
    if delta <= 0:
        raise ConfigError(f"smoothing delta must be positive, got {delta}")
    chains = _per_node(chains, state.m)
    U = np.empty_like(state.x)
    for i in range(state.m):
        sample = step(cursors[i], chains[i])
        h = random_unit_vector(state.n, sphere_rngs[i])
        U[i] = _checked(zo_estimate(obj, i, sample, state.x[i], delta, h), "estimate", state.k, i)
    return _mix_and_update(state, W, gamma, U, charge=1)


def dsgd_t_step(
    state: NodeStateMatrix,
    W: MatrixLike,
    chains: Any,
    obj: Objective,
    gamma: float,
    T: int,
    rngs: Sequence[np.random.Generator],
    initial_states: Sequence[Any],
) -> NodeStateMatrix:
    """Resample j_0..j_T per node from the initial state and use only j_T"""
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    chains = _per_node(chains, state.m)
    U = np.empty_like(state.x)
    for i in range(state.m):
        sample = initial_states[i]
        for _ in range(T):
            sample = chains[i].transition(sample, rngs[i])
        U[i] = _checked(obj.grad_component(i, sample, state.x[i]), "gradient", state.k, i)
    return _mix_and_update(state, W, gamma, U, charge=T)


def mcgd_step(
    x: np.ndarray,
    cursors: Sequence[TrajectoryCursor],
    chains: Any,
    obj: Objective,
    gamma: float,
    iteration: int = 0,
) -> np.ndarray:
    """x <- x - γ_k (1/m) Σ_i ∇F(x; ξ^k(i)), advancing every node's chain once"""
    m = len(cursors)
    chains = _per_node(chains, m)
    total = np.zeros_like(x, dtype=float)
    for i in range(m):
        sample = step(cursors[i], chains[i])
        total += _checked(obj.grad_component(i, sample, x), "gradient", iteration, i)
    return x - gamma * total / m


# -- workload assembly and the outer loop ------------------------------------

@dataclass
class Workload:
    graph: CommGraph
    mixing: MixingMatrix
    chains: List[Any]
    objective: Objective
    schedule: StepSchedule
    initial_states: List[Any] = field(default_factory=list)


def build_chain(config: RunConfig) -> FiniteMarkovChain:
    M = config.chain_states
    if config.chain == "lazy_path":
        return build_random_walk_chain(build_graph("path", M))
    if config.chain == "lazy_ring":
        return build_random_walk_chain(build_graph("ring", M))
    if config.chain == "lazy_complete":
        return build_random_walk_chain(build_graph("complete", M))
    if config.chain == "uniform":
        return build_explicit_chain(np.full((M, M), 1.0 / M))
    return build_explicit_chain(read_matrix(config.chain_file))


def build_objective(config: RunConfig, chain: Optional[FiniteMarkovChain] = None) -> Objective:
    m, n = config.nodes, config.dimension
    if config.objective == "logistic":
        return StreamingLogistic.build(
            m, n, config.seed,
            clip_radius=config.clip_radius,
            reference_samples=config.reference_samples,
        )
    chain = chain or build_chain(config)
    weights = chain.pi_star if config.weighting == "stationary" else None
    return QuadraticSum.random(m, chain.M, n, config.seed, spread=config.spread, radius=config.radius, weights=weights)


def assemble(config: RunConfig, objective: Optional[Objective] = None) -> Workload:
    graph = build_graph(config.topology, config.nodes, seed=config.seed, edge_prob=config.edge_prob)
    mixing = metropolis_weights(graph)
    schedule = StepSchedule.from_config(config)

    if config.objective == "logistic":
        objective = objective or build_objective(config)
        if not isinstance(objective, StreamingLogistic):
            raise ConfigError("objective=logistic needs a streaming objective")
        chains = list(objective.processes)
        initial_states = [process.initial_state() for process in chains]
    else:
        chain = build_chain(config)
        if config.chain_initial_state >= chain.M:
            raise ConfigError(f"chain_initial_state {config.chain_initial_state} out of range for {chain.M} states")
        objective = objective or build_objective(config, chain)
        chains = [chain] * config.nodes
        initial_states = [config.chain_initial_state] * config.nodes

    if objective.m != config.nodes or objective.n != config.dimension:
        raise ConfigError(f"objective is m={objective.m}, n={objective.n}; config asks for m={config.nodes}, n={config.dimension}")
    return Workload(graph, mixing, chains, objective, schedule, initial_states)


def round_costs(algorithm: str, graph: CommGraph) -> Tuple[int, int]:
    """
    (gradient evaluations, messages sent by the busiest node) in one round

    Decentralized schemes send one vector per neighbor; mcgd gathers all m
    node gradients at one aggregator. zo_dmgd evaluates only f values.
    """
    m, max_degree = graph.m, max(graph.degrees, default=0)
    if algorithm == "mcgd":
        return m, m
    if algorithm == "zo_dmgd":
        return 0, max_degree
    return m, max_degree


def _record_row(
    state: NodeStateMatrix,
    workload: Workload,
    budget: Optional[int],
    wall_start: Optional[float],
) -> MetricRow:
    x_bar = state.mean()
    objective = workload.objective
    return MetricRow(
        k=state.k,
        gamma=workload.schedule.gamma(state.k),
        consensus_error=consensus_error(state.x),
        grad_norm=grad_norm_at_mean(state.x, objective, budget),
        objective_error=objective.objective_error(x_bar, budget if objective.is_streaming else None),
        samples_per_node=state.samples_per_node,
        wall_ms=0.0 if wall_start is None else (time.perf_counter() - wall_start) * 1000.0,
    )


def run(config: RunConfig, objective: Optional[Objective] = None) -> RunRecord:
    """
    Execute ``config.iterations`` synchronous rounds from x(1) = ... = x(m) = x0

    Metric rows are recorded at k = 0, 1, every ``cadence`` rounds and at
    the final round.
    """
    workload = assemble(config, objective)
    objective = workload.objective
    m, n, K = config.nodes, config.dimension, config.iterations
    budget = (config.grad_budget or objective.S) if objective.is_streaming else None

    chain_rngs = node_streams(config.seed, Purpose.CHAIN, m)
    sphere_rngs = node_streams(config.seed, Purpose.SPHERE, m)
    cursors = [TrajectoryCursor(state=s, rng=r) for s, r in zip(workload.initial_states, chain_rngs)]

    record = RunRecord(fingerprint=config.fingerprint(), algorithm=config.algorithm)
    state = NodeStateMatrix.replicate(np.full(n, config.x0), m)
    wall_start = time.perf_counter() if config.wall_clock else None
    logger.info(
        f"run {config.algorithm}"
        + (f"(T={config.T})" if config.algorithm == "dsgd_t" else "")
        + f" m={m} n={n} K={K} lambda2(W)={workload.mixing.lambda2:.4f} config={record.fingerprint[:12]}"
    )
    record.append(_record_row(state, workload, budget, wall_start))

    for k in range(K):
        gamma = workload.schedule.gamma(k)
        try:
            if config.algorithm == "dmgd":
                state = dmgd_step(state, workload.mixing, cursors, workload.chains, objective, gamma)
            elif config.algorithm == "zo_dmgd":
                state = zo_dmgd_step(
                    state, workload.mixing, cursors, workload.chains, objective, gamma,
                    workload.schedule.delta(k), sphere_rngs,
                )
            elif config.algorithm == "dsgd_t":
                state = dsgd_t_step(
                    state, workload.mixing, workload.chains, objective, gamma, config.T,
                    chain_rngs, workload.initial_states,
                )
            else:
                x = mcgd_step(state.x[0], cursors, workload.chains, objective, gamma, iteration=k)
                state = NodeStateMatrix(x=np.tile(x, (m, 1)), k=k + 1, samples_per_node=state.samples_per_node + 1)
            if not np.all(np.isfinite(state.x)):
                raise NonFiniteError("iterate diverged", iteration=k)
        except NonFiniteError as e:
            logger.error(f"{config.algorithm} aborted at iteration {k}: {e}")
            raise RunError(str(e), iteration=k) from e

        if state.k in (1, K) or state.k % config.cadence == 0:
            row = _record_row(state, workload, budget, wall_start)
            record.append(row)
            logger.debug(
                f"k={row.k} consensus={row.consensus_error:.3e} grad={row.grad_norm:.3e} obj_err={row.objective_error:.3e}"
            )

    gradients, messages = round_costs(config.algorithm, workload.graph)
    record.gradient_evaluations = K * gradients
    record.busiest_node_messages = K * messages
    return record
