"""Norms and eigen-extremes of dense symmetric matrices.

Two routes to the operator norm: Lanczos with full reorthogonalization for
large instances, and a cyclic Jacobi eigensolver that doubles as the dense
fallback below the size cutoff and as an independent oracle in tests.  The
Jacobi sweep is JIT-compiled when numba is importable and falls back to the
same (slow) Python loop otherwise.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError

__all__ = [
    "op_norm",
    "min_eig",
    "frobenius",
    "offdiag",
    "diag_part",
    "jacobi_eigenvalues",
    "DENSE_CUTOFF",
]

DENSE_CUTOFF = 512
_START_SALTS = (0x5EED, 0xBEEF, 0xFACE)  # fixed Lanczos restart seeds


def _as_array(a) -> np.ndarray:
    values = getattr(a, "values", a)
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def frobenius(a) -> float:
    return float(np.linalg.norm(_as_array(a)))


def offdiag(a) -> np.ndarray:
    out = _as_array(a).copy()
    np.fill_diagonal(out, 0.0)
    return out


def diag_part(a) -> np.ndarray:
    return np.diag(_as_array(a)).copy()


def _py_jacobi_sweeps(a, max_sweeps, tol):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
    return max_sweeps


try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit

    _jacobi_sweeps = njit(cache=True)(_py_jacobi_sweeps)
except ImportError:  # pragma: no cover
    _jacobi_sweeps = _py_jacobi_sweeps


def jacobi_eigenvalues(a, max_sweeps: int = 40) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Returns the spectrum in ascending order.  Sweeps run until the
    off-diagonal Frobenius mass falls below machine-level tolerance.
    """
    work = _as_array(a).copy()
    scale = float(np.linalg.norm(work))
    if scale == 0.0 or work.shape[0] == 1:
        return np.sort(np.diag(work))
    _jacobi_sweeps(work, max_sweeps, 1e-14 * scale)
    leftover = float(np.linalg.norm(offdiag(work)))
    if leftover > 1e-12 * scale:
        raise ConvergenceError(
            f"Jacobi did not converge in {max_sweeps} sweeps",
            residual=leftover,
        )
    return np.sort(np.diag(work))


def _lanczos_extremes(a, rel_tol, seed, max_iter):
    """(theta_min, theta_max) Ritz ends with residual-certified accuracy."""
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    basis = np.empty((max_iter, n))
    alphas = np.empty(max_iter)
    betas = np.empty(max_iter)
    basis[0] = q
    k = 0
    while True:
        w = a @ basis[k]
        alphas[k] = basis[k] @ w
        w -= alphas[k] * basis[k]
        if k > 0:
            w -= betas[k - 1] * basis[k - 1]
        # full reorthogonalization keeps the Ritz residual bounds honest
        w -= basis[: k + 1].T @ (basis[: k + 1] @ w)
        beta = np.linalg.norm(w)
        vals, vecs = eigh_tridiagonal(alphas[: k + 1], betas[:k])
        res_lo = beta * abs(vecs[-1, 0])
        res_hi = beta * abs(vecs[-1, -1])
        spread = max(abs(vals[0]), abs(vals[-1]))
        if spread == 0.0:
            return 0.0, 0.0, 0.0
        if max(res_lo, res_hi) <= rel_tol * spread or beta <= 1e-14 * spread:
            return float(vals[0]), float(vals[-1]), float(max(res_lo, res_hi))
        if k + 1 >= max_iter or k + 1 >= n:
            raise ConvergenceError(
                f"Lanczos stalled after {k + 1} iterations",
                estimate=float(spread),
                residual=float(max(res_lo, res_hi)),
            )
        betas[k] = beta
        basis[k + 1] = w / beta
        k += 1


def _lanczos_abs_max(a, rel_tol, max_iter=None):
    n = a.shape[0]
    cap = min(n, max_iter if max_iter is not None else max(600, 2 * DENSE_CUTOFF))
    best = None
    failure = None
    for salt in _START_SALTS:
        try:
            lo, hi, _ = _lanczos_extremes(a, rel_tol, salt + 7 * n, cap)
        except ConvergenceError as err:
            failure = err
            continue
        cand = max(abs(lo), abs(hi))
        best = cand if best is None else max(best, cand)
    if best is None:
        raise failure
    return best


def op_norm(a, rel_tol: float = 1e-6, method: str = "auto") -> float:
    """Largest absolute eigenvalue of a symmetric matrix.

    `method` picks the route: "dense" (Jacobi), "lanczos", or "auto"
    (dense up to n = 512, Lanczos beyond).  The Lanczos route restarts
    from three fixed seeds and keeps the largest certified value, so the
    result is deterministic for a given matrix.
    """
    arr = _as_array(a)
    n = arr.shape[0]
    if method not in ("auto", "dense", "lanczos"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dense" or (method == "auto" and n <= DENSE_CUTOFF):
        vals = jacobi_eigenvalues(arr)
        return float(max(abs(vals[0]), abs(vals[-1])))
    return float(_lanczos_abs_max(arr, rel_tol))


def min_eig(a, rel_tol: float = 1e-6, method: str = "auto") -> float:
    """Smallest eigenvalue, via Jacobi (dense) or shifted Lanczos.

    The shift uses the Gershgorin upper bound s >= lambda_max, so the
    largest eigenvalue of s*I - A is s - lambda_min and the op_norm
    machinery applies unchanged.  `rel_tol` is relative to the shifted
    spectrum; pass a tight tolerance when tiny eigenvalues matter.
    """
    arr = _as_array(a)
    n = arr.shape[0]
    if method not in ("auto", "dense", "lanczos"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dense" or (method == "auto" and n <= DENSE_CUTOFF):
        return float(jacobi_eigenvalues(arr)[0])
    shift = float(np.max(np.sum(np.abs(arr), axis=1) - np.abs(np.diag(arr)) + np.diag(arr)))
    shifted = -arr.copy()
    shifted[np.diag_indices(n)] += shift
    return shift - _lanczos_abs_max(shifted, rel_tol)
