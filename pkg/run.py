#!/usr/bin/env python3
"""
Run script for the DMGD simulator
Usage: python run.py <command> [options]; see python run.py --help
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from simulator.cli import main


if __name__ == "__main__":
    sys.exit(main())
