"""Exception hierarchy for the simulator"""
from typing import Optional


class SimulatorError(Exception):
    """Base class for every error raised by the simulator"""


class ConfigError(SimulatorError, ValueError):
    """Invalid run configuration or argument"""


class GraphError(SimulatorError, ValueError):
    """Malformed or disconnected graph, or mismatched dimensions"""


class ChainError(SimulatorError, ValueError):
    """Invalid transition matrix; ``prop`` names the failing property"""

    def __init__(self, message: str, prop: Optional[str] = None):
        super().__init__(message)
        self.prop = prop


class NonFiniteError(SimulatorError, ArithmeticError):
    """A gradient, estimate or iterate stopped being finite"""

    def __init__(self, message: str, iteration: Optional[int] = None, node: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration
        self.node = node


class RunError(SimulatorError):
    """A run aborted; ``iteration`` is the failing round"""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
