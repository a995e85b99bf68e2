"""
Optimization problems.

An Objective is a family of component functions f_j^i: node j, component
(or streaming sample) i. The finite-sum objective is
f(x) = (1/m) Σ_j Σ_i w_i f_j^i(x) with uniform weights w_i = 1/M unless a
weighting is given. The streaming objective replaces the inner weighted sum
by the stationary expectation of the node's autoregressive chain, estimated
on a frozen batch.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import minimize
from scipy.special import expit

from config.settings import FD_STEP
from utils.matrix_io import write_batch
from utils.seeding import Purpose, derive_stream

from .exceptions import ConfigError, NonFiniteError
from .markov_sampler import ArProcess, random_ar_matrix, random_unit_vector


class LabeledSample(NamedTuple):
    xi1: np.ndarray
    xi2: int


def _check_finite(x: np.ndarray, what: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} has non-finite entries")
    return x


def _ball_point(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """Uniform point in the n-ball of the given radius"""
    direction = random_unit_vector(n, rng)
    return direction * radius * rng.random() ** (1.0 / n)


class Objective(ABC):
    """Component oracles plus bound metadata (grad_bound B, lipschitz L)"""

    m: int
    n: int
    grad_bound: float
    lipschitz: float
    is_streaming: bool = False

    @abstractmethod
    def value_component(self, j: int, sample: Any, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def grad_component(self, j: int, sample: Any, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def mean_gradient(self, x_bar: np.ndarray, budget: Optional[int] = None) -> np.ndarray:
        """∇f(x̄) = (1/m) Σ_j ∇f_j(x̄)"""

    @abstractmethod
    def value(self, x: np.ndarray, budget: Optional[int] = None) -> float:
        ...

    @abstractmethod
    def random_sample(self, rng: np.random.Generator) -> Tuple[int, Any]:
        """A random (node, component-or-sample) pair for probing"""

    @property
    def reference_point(self) -> Optional[np.ndarray]:
        return None

    @property
    def reference_value(self) -> Optional[float]:
        return None

    def objective_error(self, x: np.ndarray, budget: Optional[int] = None) -> float:
        """f(x) - f(reference), or NaN when no reference is known"""
        if self.reference_value is None:
            return float("nan")
        return float(self.value(x, budget) - self.reference_value)


class QuadraticSum(Objective):
    """
    f_j^i(x) = ½ xᵀQ_j^i x - b_j^iᵀx + c_j^i with PSD Q_j^i

    ``radius`` bounds the domain on which ``grad_bound`` is stated.
    """

    def __init__(
        self,
        Q: np.ndarray,
        b: np.ndarray,
        c: Optional[np.ndarray] = None,
        weights: Optional[np.ndarray] = None,
        radius: float = 10.0,
    ):
        Q = np.asarray(Q, dtype=float)
        b = np.asarray(b, dtype=float)
        if Q.ndim != 4 or b.ndim != 3 or Q.shape[:3] != b.shape or Q.shape[2] != Q.shape[3]:
            raise ConfigError(f"Expected Q of shape (m, M, n, n) and b of shape (m, M, n), got {Q.shape} and {b.shape}")
        self.m, self.M, self.n = b.shape
        if not np.allclose(Q, np.swapaxes(Q, 2, 3)):
            raise ConfigError("Every Q_j^i must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ConfigError("Every Q_j^i must be positive semidefinite")

        self.Q = Q
        self.b = b
        self.c = np.zeros((self.m, self.M)) if c is None else np.asarray(c, dtype=float)
        if weights is None:
            weights = np.full(self.M, 1.0 / self.M)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.M,) or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
            raise ConfigError("Component weights must be a probability vector of length M")
        self.weights = weights
        self.radius = float(radius)

        self._Q_bar = np.einsum("i,jikl->kl", weights, Q) / self.m
        self._b_bar = np.einsum("i,jik->k", weights, b) / self.m
        self._c_bar = float(np.einsum("i,ji->", weights, self.c) / self.m)

        norms = np.linalg.norm(Q, ord=2, axis=(2, 3))
        self.lipschitz = float(norms.max())
        self.grad_bound = float(np.max(norms * self.radius + np.linalg.norm(b, axis=2)))

        self._minimizer = None
        singular_values = np.linalg.svd(self._Q_bar, compute_uv=False)
        if singular_values[-1] > 1e-12 * singular_values[0]:
            self._minimizer = np.linalg.solve(self._Q_bar, self._b_bar)

    @classmethod
    def random(
        cls,
        m: int,
        M: int,
        n: int,
        seed: int,
        spread: float = 0.02,
        radius: float = 10.0,
        weights: Optional[np.ndarray] = None,
    ) -> "QuadraticSum":
        """
        Components ½(x - c_j^i)ᵀQ_j^i(x - c_j^i) with Q = I + 0.1·SSᵀ/n and
        centres scattered by ``spread`` around a common point of norm ~1
        """
        rng = derive_stream(seed, Purpose.WORKLOAD)
        center = rng.standard_normal(n) / np.sqrt(n)
        Q = np.empty((m, M, n, n))
        b = np.empty((m, M, n))
        c = np.empty((m, M))
        for j in range(m):
            for i in range(M):
                S = rng.standard_normal((n, n))
                Q[j, i] = np.eye(n) + 0.1 * (S @ S.T) / n
                target = center + spread * rng.standard_normal(n)
                b[j, i] = Q[j, i] @ target
                c[j, i] = 0.5 * target @ Q[j, i] @ target
        return cls(Q, b, c, weights=weights, radius=radius)

    def with_weights(self, weights: np.ndarray) -> "QuadraticSum":
        return QuadraticSum(self.Q, self.b, self.c, weights=weights, radius=self.radius)

    def value_component(self, j: int, sample: int, x: np.ndarray) -> float:
        x = _check_finite(x)
        Q, b = self.Q[j, sample], self.b[j, sample]
        return float(0.5 * x @ Q @ x - b @ x + self.c[j, sample])

    def grad_component(self, j: int, sample: int, x: np.ndarray) -> np.ndarray:
        x = _check_finite(x)
        if not (0 <= j < self.m and 0 <= sample < self.M):
            raise IndexError(f"Component ({j}, {sample}) out of range for m={self.m}, M={self.M}")
        return self.Q[j, sample] @ x - self.b[j, sample]

    def mean_gradient(self, x_bar: np.ndarray, budget: Optional[int] = None) -> np.ndarray:
        x_bar = _check_finite(x_bar, "x_bar")
        return self._Q_bar @ x_bar - self._b_bar

    def value(self, x: np.ndarray, budget: Optional[int] = None) -> float:
        x = _check_finite(x)
        return float(0.5 * x @ self._Q_bar @ x - self._b_bar @ x + self._c_bar)

    def random_sample(self, rng: np.random.Generator) -> Tuple[int, int]:
        return int(rng.integers(self.m)), int(rng.integers(self.M))

    @property
    def reference_point(self) -> Optional[np.ndarray]:
        return None if self._minimizer is None else self._minimizer.copy()

    @property
    def reference_value(self) -> Optional[float]:
        return None if self._minimizer is None else self.value(self._minimizer)


def logistic_loss(x: np.ndarray, xi1: np.ndarray, xi2: Union[int, np.ndarray]) -> Union[float, np.ndarray]:
    """-ξ² log σ(t) - (1-ξ²) log(1-σ(t)) with t = <x, ξ¹>, written as log(1+eᵗ) - ξ²t"""
    t = xi1 @ x
    return np.logaddexp(0.0, t) - xi2 * t


class StreamingLogistic(Objective):
    """
    Logistic regression on per-node autoregressive label streams

    Expectations are estimated on a frozen batch of ``S`` consecutive chain
    samples per node; the reference x̂ minimises the batch objective.
    """

    is_streaming = True

    def __init__(
        self,
        processes: Sequence[ArProcess],
        batch_xi1: np.ndarray,
        batch_xi2: np.ndarray,
        clip_radius: float,
        solve_reference: bool = True,
    ):
        self.processes = list(processes)
        self.m = len(self.processes)
        self.n = self.processes[0].n
        self.u = self.processes[0].u
        self.batch_xi1 = np.asarray(batch_xi1, dtype=float)
        self.batch_xi2 = np.asarray(batch_xi2, dtype=float)
        if self.batch_xi1.shape[:2] != self.batch_xi2.shape or self.batch_xi1.shape[0] != self.m:
            raise ConfigError(f"Batch shapes {self.batch_xi1.shape} and {self.batch_xi2.shape} disagree with m={self.m}")
        self.S = self.batch_xi1.shape[1]
        self.clip_radius = float(clip_radius)
        # |σ - ξ²| < 1 and ‖ξ¹‖ <= clip radius; σ' <= 1/4
        self.grad_bound = self.clip_radius
        self.lipschitz = self.clip_radius ** 2 / 4.0

        self._reference = None
        self._reference_value = None
        if solve_reference:
            self._solve_reference()

    @classmethod
    def build(
        cls,
        m: int,
        n: int,
        seed: int,
        clip_radius: Optional[float] = None,
        reference_samples: int = 20000,
        burn_in: Optional[int] = None,
        solve_reference: bool = True,
    ) -> "StreamingLogistic":
        """Draw A(i), u from the workload stream and freeze a batch per node"""
        if clip_radius is None:
            clip_radius = 10.0 * np.sqrt(n)
        rng = derive_stream(seed, Purpose.WORKLOAD)
        u = random_unit_vector(n, rng)
        processes = [ArProcess(A=random_ar_matrix(n, rng), u=u, clip_radius=clip_radius) for _ in range(m)]

        burn_in = 10 * n if burn_in is None else burn_in
        xi1 = np.empty((m, reference_samples, n))
        xi2 = np.empty((m, reference_samples))
        for j, process in enumerate(processes):
            data_rng = derive_stream(seed, Purpose.DATA, j)
            state = process.initial_state()
            for _ in range(burn_in):
                state = process.transition(state, data_rng)
            for s in range(reference_samples):
                state = process.transition(state, data_rng)
                xi1[j, s] = state.xi1
                xi2[j, s] = state.xi2
        logger.debug(f"froze {reference_samples} samples per node for m={m}, n={n}")
        return cls(processes, xi1, xi2, clip_radius, solve_reference=solve_reference)

    def _budget(self, budget: Optional[int]) -> int:
        if budget is None:
            raise ConfigError("Streaming objective needs a sample budget")
        if budget < 1:
            raise ConfigError(f"Sample budget must be positive, got {budget}")
        return min(int(budget), self.S)

    def samples_used(self, budget: Optional[int]) -> int:
        """Total samples behind one mean_gradient/value estimate"""
        return self._budget(budget) * self.m

    def value_component(self, j: int, sample: Any, x: np.ndarray) -> float:
        x = _check_finite(x)
        return float(logistic_loss(x, sample.xi1, sample.xi2))

    def grad_component(self, j: int, sample: Any, x: np.ndarray) -> np.ndarray:
        x = _check_finite(x)
        return (expit(sample.xi1 @ x) - sample.xi2) * sample.xi1

    def _batch_gradient(self, x: np.ndarray, count: int) -> np.ndarray:
        X = self.batch_xi1[:, :count]
        residual = expit(X @ x) - self.batch_xi2[:, :count]
        return np.einsum("js,jsk->k", residual, X) / (self.m * count)

    def _batch_value(self, x: np.ndarray, count: int) -> float:
        losses = logistic_loss(x, self.batch_xi1[:, :count], self.batch_xi2[:, :count])
        return float(losses.mean())

    def mean_gradient(self, x_bar: np.ndarray, budget: Optional[int] = None) -> np.ndarray:
        count = self._budget(budget)
        return self._batch_gradient(_check_finite(x_bar, "x_bar"), count)

    def value(self, x: np.ndarray, budget: Optional[int] = None) -> float:
        count = self.S if budget is None else self._budget(budget)
        return self._batch_value(_check_finite(x), count)

    def _solve_reference(self, gtol: float = 1e-10) -> None:
        result = minimize(
            lambda x: self._batch_value(x, self.S),
            np.zeros(self.n),
            jac=lambda x: self._batch_gradient(x, self.S),
            method="L-BFGS-B",
            options={"gtol": gtol, "ftol": 0.0, "maxiter": 10000},
        )
        self._reference = result.x
        self._reference_value = float(result.fun)
        residual = float(np.linalg.norm(self._batch_gradient(result.x, self.S)))
        if residual > 1e-8:
            logger.warning(f"reference solve stopped at gradient norm {residual:.3g}: {result.message}")
        else:
            logger.debug(f"reference solved to gradient norm {residual:.3g} in {result.nit} iterations")

    def random_sample(self, rng: np.random.Generator) -> Tuple[int, LabeledSample]:
        j = int(rng.integers(self.m))
        s = int(rng.integers(self.S))
        return j, LabeledSample(self.batch_xi1[j, s].copy(), int(self.batch_xi2[j, s]))

    @property
    def reference_point(self) -> Optional[np.ndarray]:
        return None if self._reference is None else self._reference.copy()

    @property
    def reference_value(self) -> Optional[float]:
        return self._reference_value

    def export_batch(self, stem: Union[str, Path]) -> Tuple[Path, Path]:
        """Write ``<stem>_xi1.bin`` (m, S, n) and ``<stem>_xi2.bin`` (m, S)"""
        stem = Path(stem)
        return (
            write_batch(stem.with_name(stem.name + "_xi1.bin"), self.batch_xi1),
            write_batch(stem.with_name(stem.name + "_xi2.bin"), self.batch_xi2),
        )


def grad_component(obj: Objective, j: int, sample: Any, x: np.ndarray) -> np.ndarray:
    return obj.grad_component(j, sample, x)


def mean_gradient(obj: Objective, x_bar: np.ndarray, budget: Optional[int] = None) -> np.ndarray:
    return obj.mean_gradient(x_bar, budget)


def estimate_bounds(obj: Objective, draws: int, radius: float, seed: int) -> Tuple[float, float]:
    """
    Measure gradient norms and difference quotients at uniform points of the
    ball of ``radius``; returns (B_hat, L_hat)
    """
    if draws < 2:
        raise ValueError(f"draws must be at least 2, got {draws}")
    rng = derive_stream(seed, Purpose.ESTIMATE)
    B_hat = 0.0
    L_hat = 0.0
    for _ in range(draws):
        j, sample = obj.random_sample(rng)
        x = _ball_point(rng, obj.n, radius)
        y = _ball_point(rng, obj.n, radius)
        gx = obj.grad_component(j, sample, x)
        gy = obj.grad_component(j, sample, y)
        B_hat = max(B_hat, float(np.linalg.norm(gx)), float(np.linalg.norm(gy)))
        distance = float(np.linalg.norm(x - y))
        if distance > 0.0:
            L_hat = max(L_hat, float(np.linalg.norm(gx - gy)) / distance)
    return B_hat, L_hat


def gradient_check(obj: Objective, trials: int = 100, seed: int = 0, radius: float = 1.0, step: float = FD_STEP) -> float:
    """
    Largest central-difference error over random (component, point) pairs,
    relative to max(‖∇‖∞, 1)
    """
    rng = derive_stream(seed, Purpose.ESTIMATE, 1)
    worst = 0.0
    eye = np.eye(obj.n)
    for _ in range(trials):
        j, sample = obj.random_sample(rng)
        x = _ball_point(rng, obj.n, radius)
        analytic = obj.grad_component(j, sample, x)
        numeric = np.array([
            (obj.value_component(j, sample, x + step * e) - obj.value_component(j, sample, x - step * e)) / (2.0 * step)
            for e in eye
        ])
        scale = max(float(np.max(np.abs(analytic))), 1.0)
        worst = max(worst, float(np.max(np.abs(numeric - analytic))) / scale)
    return worst
