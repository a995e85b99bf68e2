"""Run configuration: flat key=value files parsed into a pydantic model"""
import hashlib
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import settings
from .settings import DEFAULT_CADENCE, DSGD_T_VALUES


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    algorithm: Literal["dmgd", "zo_dmgd", "dsgd_t", "mcgd"] = Field(
        "dmgd", description="iteration scheme: dmgd, zo_dmgd, dsgd_t or mcgd")
    T: int = Field(1, ge=1, description="dsgd_t: chain steps per fresh trajectory")
    iterations: int = Field(1000, ge=0, description="number of synchronous rounds K")

    stepsize: Literal["diminishing", "constant"] = Field(
        "diminishing", description="diminishing: gamma_k = 1/(k+1)^theta; constant: gamma_k = constant_gamma")
    theta: float = Field(0.51, description="stepsize exponent, 1/2 < theta < 1")
    rho: float = Field(0.6, gt=0, description="zo_dmgd: smoothing delta_k = 1/(k+1)^rho, theta + rho > 1")
    constant_gamma: float = Field(0.01, gt=0, description="stepsize for stepsize=constant")

    seed: int = Field(0, ge=0, description="base seed for every derived random stream")

    topology: Literal["ring", "path", "complete", "star", "erdos_renyi"] = Field(
        "ring", description="communication graph family")
    nodes: int = Field(5, ge=1, description="number of nodes m")
    edge_prob: Optional[float] = Field(None, description="erdos_renyi edge probability, 0 < p <= 1")

    chain: Literal["lazy_path", "lazy_ring", "lazy_complete", "uniform", "explicit"] = Field(
        "lazy_path", description="finite sampling chain: lazy walk on a state graph, uniform rows, or explicit file")
    chain_states: int = Field(4, ge=1, description="number of chain states M (= components per node)")
    chain_file: Optional[str] = Field(None, description="chain=explicit: transition matrix in the plain-text matrix format")
    chain_initial_state: int = Field(0, ge=0, description="state every trajectory (and every dsgd_t restart) starts from")

    objective: Literal["quadratic", "logistic"] = Field(
        "quadratic", description="quadratic finite sum or streaming AR logistic regression")
    dimension: int = Field(10, ge=1, description="parameter dimension n")
    spread: float = Field(0.02, ge=0, description="quadratic: scatter of component minimisers")
    radius: float = Field(10.0, gt=0, description="quadratic: domain radius for the gradient bound")
    weighting: Literal["uniform", "stationary"] = Field(
        "stationary", description="quadratic: component weights, uniform 1/M or the chain's stationary law")
    clip_radius: Optional[float] = Field(None, description="logistic: clip radius for xi1 (default 10*sqrt(n))")
    reference_samples: int = Field(20000, ge=1, description="logistic: frozen batch size per node for the reference")
    grad_budget: Optional[int] = Field(None, description="logistic: samples per node behind grad_norm (default: whole batch)")
    x0: float = Field(0.0, description="common initial value of every coordinate of every node")

    cadence: int = Field(DEFAULT_CADENCE, ge=1, description="record a metrics row every cadence rounds (plus k=0,1)")
    wall_clock: bool = Field(False, description="fill the wall_ms column (breaks byte reproducibility)")

    scale: Literal["desk", "paper"] = Field("desk", description="figure1: desk (m=5,n=10) or paper (m=10,n=50 and m=20,n=100)")
    repetitions: int = Field(5, ge=1, description="figure1: seeded repetitions (seed, seed+1, ...)")
    sample_budget: int = Field(2000, ge=1, description="figure1: samples per node granted to every algorithm")
    dsgd_T_values: Tuple[int, ...] = Field(DSGD_T_VALUES, description="figure1: comma-separated T values for dsgd_t")
    include_zo: bool = Field(False, description="figure1: also run zo_dmgd")

    @field_validator("edge_prob", "chain_file", "clip_radius", "grad_budget", mode="before")
    @classmethod
    def _none_literal(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    @field_validator("dsgd_T_values", mode="before")
    @classmethod
    def _split_values(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(int(part) for part in value.split(",") if part.strip())
        return value

    @model_validator(mode="after")
    def _cross_checks(self) -> "RunConfig":
        if self.stepsize == "diminishing" and not (0.5 < self.theta < 1.0):
            raise ValueError(f"theta must satisfy 1/2 < theta < 1, got {self.theta}")
        if self.algorithm == "zo_dmgd" and self.stepsize == "diminishing" and self.theta + self.rho <= 1.0:
            raise ValueError(f"zo_dmgd needs theta + rho > 1 so that sum gamma_k delta_k converges, got {self.theta + self.rho}")
        if self.topology == "erdos_renyi" and (self.edge_prob is None or not (0.0 < self.edge_prob <= 1.0)):
            raise ValueError(f"erdos_renyi needs 0 < edge_prob <= 1, got {self.edge_prob}")
        if self.chain == "explicit" and not self.chain_file:
            raise ValueError("chain=explicit needs chain_file")
        if self.chain != "explicit" and self.chain_initial_state >= self.chain_states:
            raise ValueError(f"chain_initial_state {self.chain_initial_state} out of range for {self.chain_states} states")
        if any(T < 1 for T in self.dsgd_T_values):
            raise ValueError("every dsgd_T_values entry must be >= 1")
        if self.grad_budget is not None and self.grad_budget < 1:
            raise ValueError(f"grad_budget must be positive, got {self.grad_budget}")
        return self

    def to_text(self) -> str:
        """Canonical rendering: sorted key=value lines"""
        lines = []
        for key in sorted(type(self).model_fields):
            lines.append(f"{key}={_render(getattr(self, key))}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ConfigFileError(ValueError):
    """Raised for unreadable or malformed config files"""


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse flat key=value lines; '#' starts a comment line"""
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigFileError(f"{source}:{number}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigFileError(f"{source}:{number}: empty key")
        if key in values:
            raise ConfigFileError(f"{source}:{number}: duplicate key '{key}'")
        values[key] = value
    return values


def build_run_config(values: Dict[str, Any], source: str = "<config>") -> RunConfig:
    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = []
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"]) or "config"
            problems.append(f"{location}: {error['msg']}")
        raise ConfigFileError(f"{source}: " + "; ".join(problems)) from e


def load_run_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read a config file and apply overrides (already-typed values win).

    The seed follows settings.resolve_seed: an override, then DMGD_SIM_SEED,
    then the file, then 0.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigFileError(f"Cannot read config {path}: {e}") from e
    values: Dict[str, Any] = dict(parse_config_text(text, str(path)))
    overrides = dict(overrides or {})
    try:
        values["seed"] = settings.resolve_seed(overrides.pop("seed", None), values.get("seed"))
    except ValueError as e:
        raise ConfigFileError(f"{path}: seed must be an integer, got '{values.get('seed')}'") from e
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_run_config(values, str(path))


def describe_keys() -> str:
    """One line per config key with its default and description"""
    lines = []
    for key, info in RunConfig.model_fields.items():
        lines.append(f"  {key} (default {_render(info.default)}): {info.description}")
    return "\n".join(lines)
