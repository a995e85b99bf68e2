"""
Utilities package for the DMGD simulator
"""

from .seeding import Purpose, derive_stream, node_streams, derive_int_seed
from .matrix_io import (
    write_matrix,
    read_matrix,
    write_trajectory,
    read_trajectory,
    write_batch,
    read_batch,
)

__all__ = [
    'Purpose',
    'derive_stream',
    'node_streams',
    'derive_int_seed',
    'write_matrix',
    'read_matrix',
    'write_trajectory',
    'read_trajectory',
    'write_batch',
    'read_batch',
]
