"""Assembly of every dense symmetric matrix the experiments consume.

Empirical kernel matrices, off-diagonal polynomial kernel matrices, their
decoupled copies, correlation matrices (closed form and Monte Carlo), and
the two low-degree approximants: the Taylor/Hermite band construction for
anisotropic Gaussian data and the polar/Gegenbauer construction for
isotropic data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .kernels import KernelFunction
from .orthopoly import (
    GegenbauerBasis,
    hermite_value,
    monomial_gegenbauer_coeffs,
    monomial_hermite_coeffs,
)
from .sampling import CovarianceSpec, DataMatrix, polar_decompose, resample_like

__all__ = [
    "SymMatrix",
    "gram",
    "kernel_matrix",
    "hermite_offdiag_matrix",
    "gegenbauer_offdiag_matrix",
    "decoupled_offdiag_matrix",
    "hermite_entries",
    "profile_entries",
    "gegenbauer_entries",
    "hermite_conditional_mean",
    "hermite_pair_correlation",
    "hermite_correlation_matrix",
    "mc_correlation_matrix",
    "as_fraction",
    "band_degrees",
    "hermite_band_approximant",
    "polar_sphere_approximant",
]

_SYM_TOL = 1e-12
_MC_CHUNK = 20_000  # fixed so chunked Monte Carlo results are reproducible


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix with a tag naming what it stores."""

    values: np.ndarray
    tag: str = "other"

    def __post_init__(self):
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        skew = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        if skew > _SYM_TOL * (1.0 + scale):
            raise ValueError(f"matrix is not symmetric: max skew {skew}")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _rows(x) -> np.ndarray:
    return x.values if isinstance(x, (DataMatrix, SymMatrix)) else np.asarray(x, float)


def gram(x) -> np.ndarray:
    """X X^T, exactly symmetrized."""
    v = _rows(x)
    g = v @ v.T
    return 0.5 * (g + g.T)


def kernel_matrix(x: DataMatrix, f: KernelFunction, tau1: float) -> SymMatrix:
    """K_ij = f(<x_i, x_j> / tau1), diagonal included."""
    if tau1 <= 0:
        raise ValueError("tau1 must be positive")
    return SymMatrix(f(gram(x) / tau1), tag="K")


def hermite_offdiag_matrix(x: DataMatrix, ell: int, tau2: float) -> SymMatrix:
    """He_ell(<x_i, x_j> / sqrt(tau2)) off the diagonal, zero on it."""
    if tau2 <= 0:
        raise ValueError("tau2 must be positive")
    vals = hermite_value(ell, gram(x) / math.sqrt(tau2))
    np.fill_diagonal(vals, 0.0)
    return SymMatrix(vals, tag="Delta")


def _clamped_sphere_gram(g: np.ndarray, d: int) -> np.ndarray:
    slack = d * 1e-8
    worst = float(np.max(np.abs(g)))
    if worst > d + slack:
        raise ValueError(
            f"inner product {worst} exceeds the sphere range [-{d}, {d}]"
        )
    return np.clip(g, -d, d)


def gegenbauer_offdiag_matrix(u: DataMatrix, ell: int) -> SymMatrix:
    """Q_ell(<x_i, x_j>) off the diagonal for rows on the sqrt(d)-sphere.

    Inner products are clamped into [-d, d] within a 1e-8 relative slack;
    anything further out is a domain error, not data.
    """
    d = u.d
    g = _clamped_sphere_gram(gram(u), d)
    vals = GegenbauerBasis(d, ell).table(g)[ell]
    np.fill_diagonal(vals, 0.0)
    return SymMatrix(vals, tag="Delta")


EntryFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def hermite_entries(ell: int, tau2: float) -> EntryFn:
    """Cross-kernel evaluator (A, B) -> He_ell(A B^T / sqrt(tau2))."""
    root = math.sqrt(tau2)

    def entries(a, b):
        return hermite_value(ell, _rows(a) @ _rows(b).T / root)

    return entries


def profile_entries(f: KernelFunction, tau1: float) -> EntryFn:
    def entries(a, b):
        return f(_rows(a) @ _rows(b).T / tau1)

    return entries


def gegenbauer_entries(d: int, ell: int) -> EntryFn:
    basis = GegenbauerBasis(d, ell)

    def entries(a, b):
        return basis.table(_clamped_sphere_gram(_rows(a) @ _rows(b).T, d))[ell]

    return entries


def decoupled_offdiag_matrix(x: DataMatrix, x_tilde: DataMatrix, entry_fn: EntryFn) -> SymMatrix:
    """Symmetrized cross matrix (k(x_i, xt_j) + k(x_j, xt_i)) / 2, zero diagonal.

    `x_tilde` should come from an independent stream; passing the same batch
    reproduces the coupled off-diagonal matrix for symmetric kernels.
    """
    if x.values.shape != x_tilde.values.shape:
        raise ValueError(
            f"shape mismatch: {x.values.shape} vs {x_tilde.values.shape}"
        )
    cross = np.asarray(entry_fn(x.values, x_tilde.values), dtype=float)
    vals = 0.5 * (cross + cross.T)
    np.fill_diagonal(vals, 0.0)
    return SymMatrix(vals, tag="Delta")


def _sigma_gram(x, cov: CovarianceSpec) -> np.ndarray:
    v = _rows(x)
    g = (v * cov.eigenvalues) @ v.T
    return 0.5 * (g + g.T)


def hermite_conditional_mean(x, ell: int, cov: CovarianceSpec):
    """E_z[He_ell(<x, z> / sqrt(tau2))] for z ~ N(0, Sigma), x fixed.

    Zero for odd ell; for even ell the closed form is
    (ell! / (2^(ell/2) (ell/2)!)) * (|Sigma^{1/2} x|^2 / tau2 - 1)^(ell/2).
    Accepts a single vector or a stack of rows.
    """
    v = _rows(x)
    single = v.ndim == 1
    rows = v[None, :] if single else v
    if ell % 2 == 1:
        out = np.zeros(rows.shape[0])
    else:
        half = ell // 2
        coeff = math.factorial(ell) / (2**half * math.factorial(half))
        a = np.einsum("ij,j,ij->i", rows, cov.eigenvalues, rows) / cov.tau2 - 1.0
        out = coeff * a**half
    return float(out[0]) if single else out


def _pair_corr_coeffs(ell: int, ell_hi: int) -> list[float]:
    half_gap = (ell_hi - ell) // 2
    out = []
    for j in range(ell // 2 + 1):
        out.append(
            math.factorial(ell)
            * math.factorial(ell_hi)
            / (
                2 ** (2 * j + half_gap)
                * math.factorial(j)
                * math.factorial(half_gap + j)
                * math.factorial(ell - 2 * j)
            )
        )
    return out


def hermite_pair_correlation(
    x1: np.ndarray, x3: np.ndarray, ell: int, ell_prime: int, cov: CovarianceSpec
) -> float:
    """E_z[He_ell(<x1,z>/sqrt(tau2)) He_ell'(<z,x3>/sqrt(tau2))], z ~ N(0, Sigma).

    The closed form exists when ell' - ell is even; for an odd gap the
    expectation vanishes by parity and 0 is returned.
    """
    if ell < 0 or ell_prime < 0:
        raise ValueError("degrees must be >= 0")
    if (ell_prime - ell) % 2 == 1:
        return 0.0
    if ell > ell_prime:
        x1, x3 = x3, x1
        ell, ell_prime = ell_prime, ell
    lam = cov.eigenvalues
    tau2 = cov.tau2
    a1 = float(np.dot(x1 * lam, x1)) / tau2 - 1.0
    a3 = float(np.dot(x3 * lam, x3)) / tau2 - 1.0
    s = float(np.dot(x1 * lam, x3))
    half_gap = (ell_prime - ell) // 2
    total = 0.0
    for j, coeff in enumerate(_pair_corr_coeffs(ell, ell_prime)):
        total += coeff * a1**j * a3 ** (half_gap + j) * s ** (ell - 2 * j) * tau2 ** (
            2 * j - ell
        )
    return total


def hermite_correlation_matrix(x: DataMatrix, ell: int, cov: CovarianceSpec) -> SymMatrix:
    """Correlation matrix G_ij = E_z[k(x_i,z) k(z,x_j)] for the Hermite kernel.

    Uses the closed form (one finite sum per entry, fully vectorized);
    the diagonal follows the same formula at i = j.
    """
    s = _sigma_gram(x, cov)
    tau2 = cov.tau2
    a = np.diag(s) / tau2 - 1.0
    g = np.zeros_like(s)
    for j, coeff in enumerate(_pair_corr_coeffs(ell, ell)):
        aj = a**j
        g += coeff * tau2 ** (2 * j - ell) * np.outer(aj, aj) * s ** (ell - 2 * j)
    return SymMatrix(g, tag="G")


def mc_correlation_matrix(
    x: DataMatrix,
    entry_fn: EntryFn,
    m: int,
    seed: int,
    stream: int = 7,
) -> tuple[SymMatrix, np.ndarray]:
    """Monte Carlo correlation matrix with per-entry standard errors.

    One shared z-sample set (drawn from the same distribution as `x`)
    serves every entry: cost m*n kernel evaluations instead of m*n^2, at
    the price of correlated errors across entries.  The returned stderr
    matrix is per-entry and ignores that cross-entry correlation.
    """
    if m < 2:
        raise ValueError("need at least 2 Monte Carlo samples")
    n = x.n
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    done = 0
    chunk_idx = 0
    while done < m:
        take = min(_MC_CHUNK, m - done)
        z = resample_like(x, take, seed, (stream, chunk_idx))
        b = np.asarray(entry_fn(x.values, z.values), dtype=float)
        s1 += b @ b.T
        bb = b * b
        s2 += bb @ bb.T
        done += take
        chunk_idx += 1
    mean = s1 / m
    var = np.maximum(s2 / m - mean**2, 0.0)
    stderr = np.sqrt(var / m)
    mean = 0.5 * (mean + mean.T)
    return SymMatrix(mean, tag="G"), 0.5 * (stderr + stderr.T)


def as_fraction(q) -> Fraction:
    """Exact rational from int, Fraction, or a string like '4/3'."""
    if isinstance(q, Fraction):
        return q
    if isinstance(q, int):
        return Fraction(q)
    if isinstance(q, str):
        return Fraction(q)
    if isinstance(q, float):
        # floats arrive from JSON; snap to the decimal literal they printed as
        return Fraction(str(q)).limit_denominator(10**6)
    raise TypeError(f"cannot interpret {q!r} as an exact rational")


def band_degrees(q) -> tuple[int, int, int]:
    """(floor(q), floor(4q/3), floor(2q)) computed in exact arithmetic."""
    qf = as_fraction(q)
    if qf <= 0:
        raise ValueError("q must be positive")
    return (
        math.floor(qf),
        math.floor(4 * qf / 3),
        math.floor(2 * qf),
    )


def hermite_band_approximant(
    x: DataMatrix, f: KernelFunction, q, cov: CovarianceSpec
) -> SymMatrix:
    """Low-degree approximant for f-kernels on N(0, Sigma) data.

    Taylor terms up to degree floor(4q/3) are kept verbatim as Hadamard
    powers of X X^T; degrees up to floor(2q) contribute only their Hermite
    components of degree <= floor(4q/3); the identity shift makes the
    diagonal match f(1).  Hadamard powers and Hermite matrices keep their
    diagonals; only the shift term is diagonal-only.
    """
    _, l43, l2q = band_degrees(q)
    if f.max_order < l2q:
        raise ValueError(
            f"kernel derivative table has order {f.max_order}, need {l2q}"
        )
    tau1, tau2 = cov.tau1, cov.tau2
    g = gram(x)
    n = g.shape[0]

    acc = np.zeros((n, n))
    hadamard = np.ones((n, n))
    for ell in range(l43 + 1):
        if ell > 0:
            hadamard = hadamard * g
        acc += f.taylor_coeff(ell) / tau1**ell * hadamard

    if l2q > l43:
        base = g / math.sqrt(tau2)
        hk = [np.ones((n, n)), base.copy()]
        while len(hk) <= l43:
            k = len(hk) - 1
            hk.append(base * hk[k] - k * hk[k - 1])
        for ell in range(l43 + 1, l2q + 1):
            c = monomial_hermite_coeffs(ell)
            scale = f.taylor_coeff(ell) * tau2 ** (ell / 2.0) / tau1**ell
            for k in range(min(ell, l43) + 1):
                if c[k] != 0.0:
                    acc += scale * c[k] * hk[k]

    shift = f.f_at_1 - sum(f.taylor_coeff(j) for j in range(l43 + 1))
    acc[np.diag_indices(n)] += shift
    return SymMatrix(acc, tag="Kbar")


def polar_sphere_approximant(x: DataMatrix, f: KernelFunction, q) -> SymMatrix:
    """Polar-decomposition approximant for f-kernels on isotropic data.

    Each Taylor degree ell <= floor(2q) becomes a Hadamard power of the
    norm outer product r r^T / d times the degree-<= floor(q) Gegenbauer
    part of the direction monomial, plus the same style of identity shift.
    """
    lq, _, l2q = band_degrees(q)
    if f.max_order < l2q:
        raise ValueError(
            f"kernel derivative table has order {f.max_order}, need {l2q}"
        )
    d = x.d
    polar = polar_decompose(x)
    scaled_dirs = math.sqrt(d) * polar.directions
    s = _clamped_sphere_gram(gram(scaled_dirs), d)
    q_tables = GegenbauerBasis(d, lq).table(s)

    n = x.n
    outer = np.outer(polar.radii, polar.radii) / d
    acc = np.zeros((n, n))
    hadamard = np.ones((n, n))
    for ell in range(l2q + 1):
        if ell > 0:
            hadamard = hadamard * outer
        cj = monomial_gegenbauer_coeffs(d, ell, max_j=min(ell, lq))
        mix = np.zeros((n, n))
        for j, c in enumerate(cj):
            if c != 0.0:
                mix += c * q_tables[j]
        acc += f.taylor_coeff(ell) * d ** (-ell / 2.0) * hadamard * mix

    shift = f.f_at_1 - sum(f.taylor_coeff(j) for j in range(lq + 1))
    acc[np.diag_indices(n)] += shift
    return SymMatrix(acc, tag="Kbar")
