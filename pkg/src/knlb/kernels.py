"""Analytic inner-product kernel profiles.

A profile is a scalar function f applied to normalized inner products,
carried together with an exact table of derivatives at zero.  The table is
always analytic: numeric differentiation is banned because the low-degree
approximants consume f^(l)(0) directly and noise there corrupts them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

__all__ = [
    "KernelFunction",
    "exp_kernel",
    "poly_kernel",
    "power_kernel",
    "softplus_kernel",
]


@dataclass(frozen=True)
class KernelFunction:
    """Kernel profile f with derivative table at 0 and the value f(1).

    `deriv0[l]` is f^(l)(0) for l = 0..L_max.  `profile` must accept
    ndarray input.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    deriv0: np.ndarray
    f_at_1: float
    name: str = "custom"

    def __post_init__(self):
        table = np.asarray(self.deriv0, dtype=float)
        if table.ndim != 1 or table.size == 0:
            raise ValueError("deriv0 must be a non-empty vector")
        f0 = float(np.asarray(self.profile(np.asarray(0.0))))
        if abs(table[0] - f0) > 1e-10 * (1.0 + abs(f0)):
            raise ValueError(
                f"deriv0[0]={table[0]} disagrees with profile(0)={f0}"
            )
        table.setflags(write=False)
        object.__setattr__(self, "deriv0", table)

    @property
    def max_order(self) -> int:
        return self.deriv0.size - 1

    def __call__(self, t):
        return self.profile(np.asarray(t, dtype=float))

    def taylor_coeff(self, ell: int) -> float:
        """f^(l)(0) / l!"""
        return float(self.deriv0[ell]) / math.factorial(ell)


def exp_kernel(max_order: int = 16) -> KernelFunction:
    """f(t) = exp(t); every derivative at zero is 1."""
    return KernelFunction(np.exp, np.ones(max_order + 1), math.e, name="exp")


def poly_kernel(coeffs, max_order: int | None = None) -> KernelFunction:
    """f(t) = sum_l coeffs[l] t^l, derivative table padded with zeros.

    `max_order` extends the table beyond the polynomial degree so the
    profile can feed approximants that need higher orders (all zero).
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("coeffs must be a non-empty vector")
    order = max(a.size - 1, max_order if max_order is not None else 0)
    table = np.zeros(order + 1)
    for ell in range(a.size):
        table[ell] = a[ell] * math.factorial(ell)

    def profile(t, _a=a):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), _a)

    return KernelFunction(profile, table, float(np.sum(a)), name="poly")


def power_kernel(p: float, max_order: int = 16) -> KernelFunction:
    """f(t) = (1 + t)^p with the falling-factorial derivative table."""
    table = np.empty(max_order + 1)
    acc = 1.0
    for ell in range(max_order + 1):
        table[ell] = acc
        acc *= p - ell

    def profile(t, _p=p):
        return (1.0 + np.asarray(t, dtype=float)) ** _p

    return KernelFunction(profile, table, 2.0**p, name=f"power({p})")


def _softplus_derivs(max_order: int) -> list[Fraction | float]:
    # softplus' = sigmoid; sigmoid^(k) is a polynomial in sigmoid with
    # integer coefficients, evaluated exactly at sigmoid(0) = 1/2.
    table: list[Fraction | float] = [math.log(2.0)]
    poly = {1: Fraction(1)}  # sigmoid as a polynomial in itself
    for _ in range(max_order):
        table.append(sum(c * Fraction(1, 2) ** m for m, c in poly.items()))
        nxt: dict[int, Fraction] = {}
        for m, c in poly.items():
            # d/dt s^m = m s^(m-1) * s(1-s) = m s^m - m s^(m+1)
            nxt[m] = nxt.get(m, Fraction(0)) + m * c
            nxt[m + 1] = nxt.get(m + 1, Fraction(0)) - m * c
        poly = nxt
    return table


def softplus_kernel(max_order: int = 16) -> KernelFunction:
    """f(t) = log(1 + e^t) / log 2, normalized so that f(0) = 1."""
    ln2 = math.log(2.0)
    raw = _softplus_derivs(max_order)
    table = np.array([float(v) / ln2 for v in raw])

    def profile(t):
        return np.logaddexp(0.0, np.asarray(t, dtype=float)) / ln2

    return KernelFunction(profile, table, math.log1p(math.e) / ln2, name="softplus")
