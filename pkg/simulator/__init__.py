"""
Decentralized Markov-chain gradient descent simulator
"""

from config.settings import configure_logging

from .exceptions import (
    SimulatorError,
    ConfigError,
    GraphError,
    ChainError,
    NonFiniteError,
    RunError,
)
from .reports import CheckResult, ValidationReport
from .graph_topology import (
    CommGraph,
    MixingMatrix,
    build_graph,
    metropolis_weights,
    validate_mixing,
    power_deviation,
)
from .markov_sampler import (
    FiniteMarkovChain,
    ArProcess,
    build_explicit_chain,
    build_random_walk_chain,
    validate_chain,
    deviation_sup,
    mixing_index,
    tv_mixing_time,
    step,
    sample_path,
)
from .objectives import QuadraticSum, StreamingLogistic, estimate_bounds, gradient_check
from .optimizers import (
    NodeStateMatrix,
    StepSchedule,
    dmgd_step,
    zo_dmgd_step,
    dsgd_t_step,
    mcgd_step,
    run,
)
from .metrics_harness import (
    MetricRow,
    RunRecord,
    consensus_error,
    grad_norm_at_mean,
    emit_csv,
    read_csv,
    figure1_experiment,
)

configure_logging()

__all__ = [
    'SimulatorError',
    'ConfigError',
    'GraphError',
    'ChainError',
    'NonFiniteError',
    'RunError',
    'CheckResult',
    'ValidationReport',
    'CommGraph',
    'MixingMatrix',
    'build_graph',
    'metropolis_weights',
    'validate_mixing',
    'power_deviation',
    'FiniteMarkovChain',
    'ArProcess',
    'build_explicit_chain',
    'build_random_walk_chain',
    'validate_chain',
    'deviation_sup',
    'mixing_index',
    'tv_mixing_time',
    'step',
    'sample_path',
    'QuadraticSum',
    'StreamingLogistic',
    'estimate_bounds',
    'gradient_check',
    'NodeStateMatrix',
    'StepSchedule',
    'dmgd_step',
    'zo_dmgd_step',
    'dsgd_t_step',
    'mcgd_step',
    'run',
    'MetricRow',
    'RunRecord',
    'consensus_error',
    'grad_norm_at_mean',
    'emit_csv',
    'read_csv',
    'figure1_experiment',
]
