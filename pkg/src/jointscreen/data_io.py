"""File formats for dictionaries and observations.

Two interchangeable formats:

* CSV: one line per matrix row, comma-separated decimal values ('.')
  separator, UTF-8.  A vector is stored as a single-column matrix.
* binary: a 16-byte header of two little-endian uint64 (m, n) followed by
  m*n little-endian float64 values in column-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import Dictionary, Observation

_HEADER = struct.Struct("<QQ")
_FLOAT_FMT = "%.17g"


def save_matrix_csv(path, matrix) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(_FLOAT_FMT % v for v in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.array(rows, dtype=float)


def save_matrix_binary(path, matrix) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    m, n = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(m, n))
        fh.write(np.asfortranarray(matrix, dtype="<f8").tobytes(order="F"))


def load_matrix_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    m, n = _HEADER.unpack_from(data)
    expected = _HEADER.size + 8 * m * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {m}x{n}, got {len(data)}")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return flat.reshape((m, n), order="F").astype(float)


def load_matrix(path) -> np.ndarray:
    """Dispatch on extension: '.bin' is binary, anything else is CSV."""
    if str(path).endswith(".bin"):
        return load_matrix_binary(path)
    return load_matrix_csv(path)


def save_dictionary(path, dictionary: Dictionary, binary: bool = False) -> None:
    (save_matrix_binary if binary else save_matrix_csv)(path, dictionary.atoms)


def load_dictionary(path) -> Dictionary:
    return Dictionary(load_matrix(path))


def save_observation(path, observation: Observation, binary: bool = False) -> None:
    col = observation.y.reshape(-1, 1)
    (save_matrix_binary if binary else save_matrix_csv)(path, col)


def load_observation(path) -> Observation:
    mat = load_matrix(path)
    if mat.shape[1] != 1:
        raise ValueError(f"{path}: observation must be a single column, got shape {mat.shape}")
    return Observation(mat[:, 0])
