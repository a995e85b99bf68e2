"""
Metrics, CSV records and the sample-efficiency comparison experiment.

CSV layout (LF line endings, floats with 17 significant digits):

    # config_sha256=<hex>
    k,gamma,consensus_error,grad_norm,objective_error,samples_per_node,wall_ms
    0,1,0,...
"""

import csv
import math
import statistics
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from tqdm import tqdm

from config.settings import EXPERIMENT_SCALES, LOG_LEVEL

from .objectives import Objective

CSV_COLUMNS = ("k", "gamma", "consensus_error", "grad_norm", "objective_error", "samples_per_node", "wall_ms")
FINGERPRINT_PREFIX = "# config_sha256="

PathLike = Union[str, Path]


@dataclass(frozen=True)
class MetricRow:
    k: int
    gamma: float
    consensus_error: float
    grad_norm: float
    objective_error: float
    samples_per_node: int
    wall_ms: float = 0.0


@dataclass
class RunRecord:
    """Metric rows, strictly increasing in k, plus the config fingerprint"""

    fingerprint: str = ""
    algorithm: str = ""
    rows: List[MetricRow] = field(default_factory=list)
    # totals over the run; not part of the CSV
    gradient_evaluations: int = 0
    busiest_node_messages: int = 0

    def append(self, row: MetricRow) -> None:
        if self.rows:
            last = self.rows[-1]
            if row.k <= last.k:
                raise ValueError(f"rows must be strictly increasing in k: {row.k} after {last.k}")
            if row.samples_per_node < last.samples_per_node:
                raise ValueError("cumulative samples must be nondecreasing")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])

    def final(self) -> MetricRow:
        return self.rows[-1]

    def running_min_grad_norm(self) -> np.ndarray:
        return np.minimum.accumulate(self.column("grad_norm"))


def _rows_of(state: Any) -> np.ndarray:
    return np.asarray(getattr(state, "x", state), dtype=float)


def consensus_error(state: Any) -> float:
    """(1/m) Σ_i ‖x(i) - x̄‖₂"""
    x = _rows_of(state)
    return float(np.mean(np.linalg.norm(x - x.mean(axis=0), axis=1)))


def grad_norm_at_mean(state: Any, obj: Objective, budget: Optional[int] = None) -> float:
    """‖∇f(x̄)‖₂; streaming objectives need ``budget``"""
    x_bar = _rows_of(state).mean(axis=0)
    return float(np.linalg.norm(obj.mean_gradient(x_bar, budget)))


# -- consensus bound ------------------------------------------------------------

class ConsensusBoundTracker:
    """
    Incremental √m·B·Σ_{j<=k} γ_j λ^{k-j}, advanced once per round with γ_k
    """

    def __init__(self, lambda2: float, B: float, m: int):
        self.lambda2 = lambda2
        self.scale = math.sqrt(m) * B
        self.partial = 0.0
        self.k = -1

    def advance(self, gamma: float) -> float:
        self.partial = self.lambda2 * self.partial + gamma
        self.k += 1
        return self.bound

    @property
    def bound(self) -> float:
        return self.scale * self.partial


def consensus_bound_series(record: RunRecord, schedule, lambda2: float, B: float, m: int) -> np.ndarray:
    """The consensus bound evaluated at every recorded k of ``record``"""
    tracker = ConsensusBoundTracker(lambda2, B, m)
    wanted = {row.k for row in record.rows}
    bounds = {}
    last = record.final().k if record.rows else 0
    for k in range(last + 1):
        tracker.advance(schedule.gamma(k))
        if k in wanted:
            bounds[k] = tracker.bound
    return np.array([bounds[row.k] for row in record.rows])


def consensus_constant(theta: float, lambda2: float, horizon: int = 100000) -> float:
    """
    C_W = 2^θ/(1-λ₂) + sup_k (k+1)^{1+θ} λ₂^{k/2}, the sup taken numerically
    over k < horizon
    """
    if lambda2 <= 0.0:
        return 2.0 ** theta / (1.0 - lambda2) + 1.0
    k = np.arange(horizon, dtype=float)
    log_terms = (1.0 + theta) * np.log(k + 1.0) + 0.5 * k * math.log(lambda2)
    return 2.0 ** theta / (1.0 - lambda2) + float(np.exp(log_terms.max()))


# -- CSV ------------------------------------------------------------------------

def _format(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def emit_csv(record: RunRecord, path: PathLike) -> Path:
    """Write header and rows; identical records give identical bytes"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"{FINGERPRINT_PREFIX}{record.fingerprint}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in record.rows:
                writer.writerow([_format(getattr(row, column)) for column in CSV_COLUMNS])
    except OSError as e:
        raise OSError(f"Cannot write metrics to {path}: {e}") from e
    return path


def read_csv(path: PathLike, algorithm: str = "") -> RunRecord:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            first = f.readline().rstrip("\n")
            if not first.startswith(FINGERPRINT_PREFIX):
                raise ValueError(f"{path}: missing '{FINGERPRINT_PREFIX}' line")
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            record = RunRecord(fingerprint=first[len(FINGERPRINT_PREFIX):], algorithm=algorithm)
            for raw in reader:
                record.append(MetricRow(
                    k=int(raw["k"]),
                    gamma=float(raw["gamma"]),
                    consensus_error=float(raw["consensus_error"]),
                    grad_norm=float(raw["grad_norm"]),
                    objective_error=float(raw["objective_error"]),
                    samples_per_node=int(raw["samples_per_node"]),
                    wall_ms=float(raw["wall_ms"]),
                ))
    except OSError as e:
        raise OSError(f"Cannot read metrics from {path}: {e}") from e
    return record


# -- comparison experiment ------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    m: int
    n: int
    algorithm: str
    T: int
    iterations: int
    samples_per_node: int
    gradient_evaluations: int
    busiest_node_messages: int
    median_objective_error: float


SUMMARY_COLUMNS = tuple(f.name for f in fields(SummaryRow))


def experiment_arms(config) -> List[Tuple[str, str, int, int]]:
    """(label, algorithm, T, iterations) for every compared scheme at the shared sample budget"""
    budget = config.sample_budget
    arms = [("dmgd", "dmgd", 1, budget), ("mcgd", "mcgd", 1, budget)]
    for T in config.dsgd_T_values:
        arms.append((f"dsgd_t{T}", "dsgd_t", T, budget // T))
    if config.include_zo:
        arms.append(("zo_dmgd", "zo_dmgd", 1, budget))
    return arms


def _arm_config(config, m: int, n: int, seed: int, algorithm: str, T: int, iterations: int):
    from config.run_config import RunConfig

    values = config.model_dump()
    values.update(
        nodes=m, dimension=n, seed=seed, objective="logistic",
        algorithm=algorithm, T=T, iterations=iterations,
    )
    return RunConfig(**values)


def _run_seed(config, m: int, n: int, seed: int, out_dir: Path) -> Dict[str, RunRecord]:
    from .objectives import StreamingLogistic
    from .optimizers import run

    objective = StreamingLogistic.build(
        m, n, seed, clip_radius=config.clip_radius, reference_samples=config.reference_samples,
    )
    records = {}
    for label, algorithm, T, iterations in experiment_arms(config):
        arm = _arm_config(config, m, n, seed, algorithm, T, iterations)
        record = run(arm, objective=objective)
        emit_csv(record, out_dir / f"m{m}_n{n}" / f"{label}_seed{seed}.csv")
        records[label] = record
    return records


def figure1_experiment(
    config,
    out_dir: PathLike,
    seeds: Optional[Sequence[int]] = None,
    jobs: int = 1,
    scale: Optional[str] = None,
) -> List[SummaryRow]:
    """
    Compare dmgd, mcgd and dsgd_t (T in ``config.dsgd_T_values``) on the
    autoregressive logistic workload, every scheme granted the same number of
    samples per node; writes one CSV per scheme and seed plus summary.csv
    """
    out_dir = Path(out_dir)
    scale = scale or config.scale
    if seeds is None:
        seeds = [config.seed + r for r in range(config.repetitions)]
    settings = EXPERIMENT_SCALES[scale]
    tasks = [(m, n, seed) for m, n in settings for seed in seeds]
    logger.info(f"figure1 scale={scale} settings={settings} seeds={list(seeds)} budget={config.sample_budget}")

    results: Dict[Tuple[int, int, int], Dict[str, RunRecord]] = {}
    quiet = LOG_LEVEL.upper() not in ("TRACE", "DEBUG", "INFO")
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = {pool.submit(_run_seed, config, m, n, seed, out_dir): (m, n, seed) for m, n, seed in tasks}
        for future in tqdm(as_completed(futures), total=len(futures), desc="figure1", disable=quiet):
            results[futures[future]] = future.result()

    summary = []
    for m, n in settings:
        for label, algorithm, T, iterations in experiment_arms(config):
            records = [results[(m, n, seed)][label] for seed in seeds]
            finals = [record.final() for record in records]
            summary.append(SummaryRow(
                m=m, n=n, algorithm=label, T=T, iterations=iterations,
                samples_per_node=finals[0].samples_per_node,
                gradient_evaluations=max(record.gradient_evaluations for record in records),
                busiest_node_messages=max(record.busiest_node_messages for record in records),
                median_objective_error=statistics.median(row.objective_error for row in finals),
            ))
    write_summary(summary, out_dir / "summary.csv")
    return summary


def write_summary(summary: Iterable[SummaryRow], path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            for row in summary:
                writer.writerow([_format(value) for value in asdict(row).values()])
    except OSError as e:
        raise OSError(f"Cannot write summary to {path}: {e}") from e
    return path


def render_summary(summary: Iterable[SummaryRow]) -> str:
    lines = [
        f"{'m':>4} {'n':>4} {'algorithm':<10} {'iters':>7} {'samples':>8} "
        f"{'grads':>9} {'messages':>9} {'median obj err':>16}"
    ]
    for row in summary:
        lines.append(
            f"{row.m:>4} {row.n:>4} {row.algorithm:<10} {row.iterations:>7} "
            f"{row.samples_per_node:>8} {row.gradient_evaluations:>9} {row.busiest_node_messages:>9} "
            f"{row.median_objective_error:>16.6e}"
        )
    return "\n".join(lines)
