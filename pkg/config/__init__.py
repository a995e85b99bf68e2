"""
Configuration package for the DMGD simulator
"""

from .settings import *
from .run_config import (
    RunConfig,
    ConfigFileError,
    parse_config_text,
    build_run_config,
    load_run_config,
    describe_keys,
)

__all__ = [
    'RunConfig',
    'ConfigFileError',
    'parse_config_text',
    'build_run_config',
    'load_run_config',
    'describe_keys',
    'LOG_LEVEL',
    'OUTPUT_DIR',
    'MAX_JOBS',
    'resolve_seed',
]
