"""Binary and CSV export of sample batches, matrices, and coefficient tables.

Binary layout (little endian): a 32-byte header

    magic "KNLB" | u32 version | u32 n | u32 d | u32 distribution tag
    | u64 seed | 4 pad bytes

followed by float64 values in row-major order.  Symmetric matrix dumps use
the same header (n = d = order) plus one matrix-tag byte before the data.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .matrices import SymMatrix
from .orthopoly import CoeffTable
from .sampling import DataMatrix

__all__ = [
    "dump_data_matrix",
    "load_data_matrix",
    "dump_sym_matrix",
    "load_sym_matrix",
    "sym_matrix_to_csv",
    "write_coeff_table",
    "read_coeff_table",
]

MAGIC = b"KNLB"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIQ4x")
assert _HEADER.size == 32

_DIST_TAGS = {"gaussian": 0, "sphere": 1, "other": 2}
_DIST_NAMES = {v: k for k, v in _DIST_TAGS.items()}
_MATRIX_TAGS = {"other": 0, "K": 1, "Kbar": 2, "Delta": 3, "G": 4, "M": 5}
_MATRIX_NAMES = {v: k for k, v in _MATRIX_TAGS.items()}
_CSV_LIMIT = 200


def _pack_header(n: int, d: int, distribution: str, seed: int) -> bytes:
    tag = _DIST_TAGS.get(distribution, _DIST_TAGS["other"])
    return _HEADER.pack(MAGIC, VERSION, n, d, tag, seed & (2**64 - 1))


def _unpack_header(blob: bytes) -> dict:
    magic, version, n, d, tag, seed = _HEADER.unpack(blob)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    return {
        "n": n,
        "d": d,
        "distribution": _DIST_NAMES.get(tag, "other"),
        "seed": seed,
    }


def dump_data_matrix(x: DataMatrix, path):
    with open(path, "wb") as fh:
        fh.write(_pack_header(x.n, x.d, x.meta.distribution, x.meta.seed))
        fh.write(np.ascontiguousarray(x.values, dtype="<f8").tobytes())


def load_data_matrix(path) -> tuple[np.ndarray, dict]:
    """Values plus the recoverable header info (covariance is not stored)."""
    blob = Path(path).read_bytes()
    info = _unpack_header(blob[: _HEADER.size])
    count = info["n"] * info["d"]
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size, count=count)
    return values.reshape(info["n"], info["d"]).copy(), info


def dump_sym_matrix(m: SymMatrix, path, seed: int = 0):
    with open(path, "wb") as fh:
        fh.write(_pack_header(m.n, m.n, "other", seed))
        fh.write(bytes([_MATRIX_TAGS.get(m.tag, 0)]))
        fh.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())


def load_sym_matrix(path) -> SymMatrix:
    blob = Path(path).read_bytes()
    info = _unpack_header(blob[: _HEADER.size])
    tag = _MATRIX_NAMES.get(blob[_HEADER.size], "other")
    count = info["n"] * info["d"]
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size + 1, count=count)
    return SymMatrix(values.reshape(info["n"], info["d"]).copy(), tag=tag)


def sym_matrix_to_csv(m: SymMatrix, path):
    """Debug-friendly CSV; refused beyond order 200."""
    if m.n > _CSV_LIMIT:
        raise ValueError(f"CSV export limited to order {_CSV_LIMIT}, got {m.n}")
    np.savetxt(path, m.values, delimiter=",", fmt="%.17g")


def write_coeff_table(table: CoeffTable, path):
    Path(path).write_text(table.to_json() + "\n")


def read_coeff_table(path) -> CoeffTable:
    return CoeffTable.from_json(Path(path).read_text())
