"""Deterministic, seedable generation of every random input.

All randomness flows through (master seed, stream id) pairs.  A substream
seed is derived as two rounds of splitmix64 over the folded inputs, so one
master seed partitions an experiment into reproducible independent streams.
Identical (seed, stream, shape, distribution) always reproduce bit-identical
batches within this build; cross-language runs reproduce the partitioning
scheme but not the bit patterns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "substream_seed",
    "CovarianceSpec",
    "BatchMeta",
    "DataMatrix",
    "PolarPair",
    "sample_gaussian",
    "sample_sphere",
    "resample_like",
    "polar_decompose",
]

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _flatten(parts) -> tuple[int, ...]:
    out = []
    for p in parts:
        if isinstance(p, (tuple, list)):
            out.extend(_flatten(p))
        else:
            out.append(int(p))
    return tuple(out)


def substream_seed(master_seed: int, *stream_parts) -> int:
    """64-bit substream seed: splitmix64 folded over master seed and parts.

    Parts may be ints or (nested) tuples of ints; they are flattened in
    order, so the derivation is a pure function of the integer sequence.
    """
    h = _splitmix64(master_seed & _MASK)
    for part in _flatten(stream_parts):
        h = _splitmix64(h ^ (part & _MASK))
    return h


def _rng(master_seed: int, *stream_parts) -> np.random.Generator:
    return np.random.default_rng(substream_seed(master_seed, *stream_parts))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CovarianceSpec:
    """Diagonal covariance described by its eigenvalue vector.

    Only the spectrum matters anywhere in this package (sampling scales
    coordinates by sqrt(lambda_i); every derived statistic is rotation
    invariant), so the matrix itself is never materialized.
    """

    eigenvalues: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("eigenvalues must be a non-empty vector")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("eigenvalues must be finite and >= 0")
        object.__setattr__(self, "eigenvalues", _frozen(vals.copy()))

    @classmethod
    def identity(cls, d: int) -> "CovarianceSpec":
        return cls(np.ones(d))

    @classmethod
    def power_law(cls, d: int, exponent: float, top: float = 1.0) -> "CovarianceSpec":
        """Spectrum lambda_i = top * i^(-exponent); top is the operator norm."""
        idx = np.arange(1, d + 1, dtype=float)
        return cls(top * idx**-exponent)

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    def tau(self, k: int) -> float:
        """Trace of the k-th power of the covariance."""
        return float(math.fsum(self.eigenvalues**k))

    @property
    def tau1(self) -> float:
        return self.tau(1)

    @property
    def tau2(self) -> float:
        return self.tau(2)

    @property
    def tau4(self) -> float:
        return self.tau(4)

    @property
    def participation_ratio(self) -> float:
        """tau2^2 / tau4: effective dimension of the squared spectrum."""
        t4 = self.tau(4)
        if t4 == 0.0:
            raise ValueError("participation ratio undefined: tau4 = 0")
        return self.tau(2) ** 2 / t4

    @property
    def op_norm(self) -> float:
        return float(np.max(self.eigenvalues))


@dataclass(frozen=True)
class BatchMeta:
    """Provenance of a sampled batch: distribution tag plus seeding."""

    distribution: str  # "gaussian" or "sphere"
    seed: int
    stream: int | tuple
    cov: CovarianceSpec | None = None


@dataclass(frozen=True)
class DataMatrix:
    """An n x d sample batch.  Values are immutable after creation."""

    values: np.ndarray
    meta: BatchMeta

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def sample_gaussian(n: int, cov: CovarianceSpec, seed: int, stream=0) -> DataMatrix:
    """n i.i.d. rows from N(0, Sigma) with the given diagonal spectrum."""
    if n < 1:
        raise ValueError("need n >= 1")
    g = _rng(seed, stream).standard_normal((n, cov.d))
    g *= np.sqrt(cov.eigenvalues)
    return DataMatrix(g, BatchMeta("gaussian", seed, stream, cov))


def sample_sphere(n: int, d: int, seed: int, stream=0) -> DataMatrix:
    """n i.i.d. rows uniform on the radius-sqrt(d) sphere in R^d."""
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    rng = _rng(seed, stream)
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):  # probability zero, but keep the contract total
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    g *= math.sqrt(d) / norms[:, None]
    return DataMatrix(g, BatchMeta("sphere", seed, stream, None))


def resample_like(x: DataMatrix, n: int, seed: int, stream) -> DataMatrix:
    """Fresh batch of n rows from the same distribution as `x`."""
    if x.meta.distribution == "gaussian":
        return sample_gaussian(n, x.meta.cov, seed, stream)
    if x.meta.distribution == "sphere":
        return sample_sphere(n, x.d, seed, stream)
    raise ValueError(f"unknown distribution tag {x.meta.distribution!r}")


@dataclass(frozen=True)
class PolarPair:
    """Row norms and unit directions; radii[i] * directions[i] restores row i."""

    radii: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "radii", _frozen(np.asarray(self.radii, dtype=float)))
        object.__setattr__(
            self, "directions", _frozen(np.asarray(self.directions, dtype=float))
        )


def polar_decompose(x: DataMatrix | np.ndarray) -> PolarPair:
    """Split each row into its Euclidean norm and unit direction."""
    values = x.values if isinstance(x, DataMatrix) else np.asarray(x, dtype=float)
    radii = np.linalg.norm(values, axis=1)
    zero = np.flatnonzero(radii == 0.0)
    if zero.size:
        raise ValueError(f"cannot decompose zero row at index {int(zero[0])}")
    return PolarPair(radii, values / radii[:, None])
