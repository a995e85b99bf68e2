"""Configuration Settings"""
import os
import sys
from dotenv import load_dotenv
from loguru import logger
from pathlib import Path
from typing import Optional

# Load environment variables
load_dotenv()

# Base paths
BASE_DIR = Path(__file__).parent.parent
OUTPUT_DIR = Path(os.getenv("DMGD_SIM_OUTPUT_DIR", str(BASE_DIR / "output")))

# Seeding
# DMGD_SIM_SEED is a fallback; an explicit --seed flag always wins.
_seed_env = os.getenv("DMGD_SIM_SEED", "").strip()
SEED_FALLBACK = int(_seed_env) if _seed_env else None

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}"

# Parallelism
MAX_JOBS = int(os.getenv("DMGD_SIM_JOBS", "1"))

# Numerical Configuration
STRUCTURAL_TOLERANCE = 1e-10
ROW_SUM_TOLERANCE = 1e-12
ER_MAX_RETRIES = 1000
DEFAULT_CADENCE = 10

# Gradient checking
FD_STEP = 1e-6
FD_RELATIVE_TOLERANCE = 1e-5

# Streaming workload
LABEL_FLIP_PROBABILITY = 0.2
AR_SUBDIAGONAL_RANGE = (0.8, 0.99)

# Figure-1 experiment scales: list of (m, n) settings
EXPERIMENT_SCALES = {
    "desk": [(5, 10)],
    "paper": [(10, 50), (20, 100)],
}
DSGD_T_VALUES = (1, 2, 4, 8, 16)


def resolve_seed(flag_seed=None, config_seed=None):
    """Pick the effective seed: flag, then environment, then config, then 0"""
    if flag_seed is not None:
        return int(flag_seed)
    if SEED_FALLBACK is not None:
        return SEED_FALLBACK
    if config_seed is not None:
        return int(config_seed)
    return 0


def configure_logging(level: Optional[str] = None) -> None:
    """Replace loguru's default sink with one stderr sink at ``level`` (LOG_LEVEL by default)"""
    logger.remove()
    # resolve sys.stderr per record so redirected streams are honoured
    logger.add(
        lambda message: sys.stderr.write(message),
        level=(level or LOG_LEVEL).upper(),
        format=LOG_FORMAT,
        colorize=False,
    )

