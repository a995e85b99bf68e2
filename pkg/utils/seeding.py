"""
Seed-derived random streams.

Every random draw in a run comes from a stream identified by
(base seed, purpose, node). The stream is a PCG64 generator seeded with
``SeedSequence(entropy=seed, spawn_key=(purpose, node))``, so a node's
chain never shares state with its sphere draws or with another node, and
results do not depend on the order in which streams are consumed.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    """Stream purposes; the integer value is part of the derivation key"""
    GRAPH = 0
    WORKLOAD = 1
    CHAIN = 2
    SPHERE = 3
    DATA = 4
    ESTIMATE = 5


# Purpose-level streams that are not tied to a node use this node slot.
SHARED_NODE = 2**32 - 1


def derive_stream(seed: int, purpose: Purpose, node: int = SHARED_NODE) -> np.random.Generator:
    """Return the generator for (seed, purpose, node)"""
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(node)))
    return np.random.Generator(np.random.PCG64(sequence))


def node_streams(seed: int, purpose: Purpose, m: int) -> list[np.random.Generator]:
    """One independent stream per node"""
    return [derive_stream(seed, purpose, node) for node in range(m)]


def derive_int_seed(seed: int, purpose: Purpose) -> int:
    """A 32-bit integer seed for libraries that only accept ints (networkx)"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), SHARED_NODE))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
