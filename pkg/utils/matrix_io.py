"""
Plain-text and binary exchange formats.

Matrices are written one row per line, space-separated, 17 significant
digits, LF line endings. Trajectories are one state index per line. Frozen
sample batches are little-endian float64 with a one-line text header.
"""

from pathlib import Path
from typing import Iterable, Union

import numpy as np

PathLike = Union[str, Path]


def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """Write a 2-D array in the plain-text matrix format"""
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, matrix, fmt="%.17g", delimiter=" ", newline="\n")
    except OSError as e:
        raise OSError(f"Cannot write matrix to {path}: {e}") from e
    return path


def read_matrix(path: PathLike) -> np.ndarray:
    """Read a plain-text matrix; a single row or value still yields 2-D"""
    path = Path(path)
    try:
        matrix = np.loadtxt(path, dtype=float, ndmin=2, comments="#")
    except OSError as e:
        raise OSError(f"Cannot read matrix from {path}: {e}") from e
    except ValueError as e:
        raise ValueError(f"Malformed matrix file {path}: {e}") from e
    return matrix


def write_trajectory(path: PathLike, states: Iterable[int]) -> Path:
    """Dump a finite-chain trajectory as one state index per line"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for state in states:
                f.write(f"{int(state)}\n")
    except OSError as e:
        raise OSError(f"Cannot write trajectory to {path}: {e}") from e
    return path


def read_trajectory(path: PathLike) -> list[int]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return [int(line) for line in f if line.strip()]
    except OSError as e:
        raise OSError(f"Cannot read trajectory from {path}: {e}") from e


def write_batch(path: PathLike, array: np.ndarray) -> Path:
    """
    Export an array as a text header line of its dimensions followed by
    little-endian float64 data in C order
    """
    path = Path(path)
    array = np.ascontiguousarray(array, dtype="<f8")
    header = " ".join(str(d) for d in array.shape) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(header.encode("ascii"))
            f.write(array.tobytes(order="C"))
    except OSError as e:
        raise OSError(f"Cannot write batch to {path}: {e}") from e
    return path


def read_batch(path: PathLike) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            header = f.readline().decode("ascii").split()
            payload = f.read()
    except OSError as e:
        raise OSError(f"Cannot read batch from {path}: {e}") from e
    shape = tuple(int(d) for d in header)
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(float)
