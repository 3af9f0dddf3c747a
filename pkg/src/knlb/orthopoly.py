"""Orthogonal polynomial bases and exact coefficient tables.

Probabilist's Hermite polynomials He_l, Gegenbauer polynomials normalized
for the sphere of radius sqrt(d) (argument range [-d, d], value 1 at d),
spherical-harmonic dimension counts, and the coefficient tables that expand
monomials in either basis.  All coefficients are computed exactly (integer
or rational arithmetic) or by deterministic quadrature; Monte Carlo never
enters a coefficient.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import QuadratureError

__all__ = [
    "hermite_value",
    "HermiteTable",
    "gaussian_moment",
    "monomial_hermite_coeffs",
    "hermite_scaling_coeffs",
    "sph_harm_dim",
    "GegenbauerBasis",
    "monomial_gegenbauer_coeffs",
    "CoeffTable",
    "monomial_hermite_table",
    "hermite_scaling_table",
    "gegenbauer_projection_table",
]

# Counts beyond this cannot round-trip through 64-bit integer formats.
_INT64_MAX = 2**63 - 1


def hermite_value(ell: int, x):
    """Evaluate He_ell(x) via the recurrence He_{l+1} = x He_l - l He_{l-1}.

    `x` may be a scalar or any ndarray; the result matches its shape.
    """
    if ell < 0:
        raise ValueError(f"degree must be >= 0, got {ell}")
    arr = np.asarray(x, dtype=float)
    h_prev = np.ones_like(arr)
    if ell == 0:
        return float(h_prev) if arr.ndim == 0 else h_prev
    h = arr.copy()
    for k in range(1, ell):
        h, h_prev = arr * h - k * h_prev, h
    return float(h) if arr.ndim == 0 else h


@dataclass(frozen=True)
class HermiteTable:
    """Monomial coefficients of He_0 .. He_max_degree as exact integers.

    Row l holds the coefficients of He_l ordered by ascending power, so
    row 0 is (1,), row 1 is (0, 1), and every row is monic.
    """

    max_degree: int
    coeffs: tuple[tuple[int, ...], ...]

    @classmethod
    def build(cls, max_degree: int) -> "HermiteTable":
        if max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        rows = [(1,), (0, 1)]
        for ell in range(1, max_degree):
            nxt = [0] * (ell + 2)
            for m, c in enumerate(rows[ell]):
                nxt[m + 1] += c
            for m, c in enumerate(rows[ell - 1]):
                nxt[m] -= ell * c
            rows.append(tuple(nxt))
        return cls(max_degree, tuple(rows[: max_degree + 1]))

    def row(self, ell: int) -> tuple[int, ...]:
        return self.coeffs[ell]


def gaussian_moment(j: int) -> int:
    """E[z^j] for z ~ N(0,1): (j-1)!! for even j, 0 for odd j."""
    if j < 0:
        raise ValueError("moment order must be >= 0")
    if j % 2 == 1:
        return 0
    return math.prod(range(j - 1, 0, -2))


def monomial_hermite_coeffs(ell: int) -> np.ndarray:
    """Coefficients c_k expanding x^ell = sum_k c_k He_k(x).

    c_k equals E[z^ell He_k(z)] / k! for standard normal z, evaluated
    exactly through the Gaussian moment sequence (no sampling).  Entries
    vanish whenever k > ell or k and ell have different parity.
    """
    if ell < 0:
        raise ValueError(f"degree must be >= 0, got {ell}")
    table = HermiteTable.build(ell)
    out = np.zeros(ell + 1)
    for k in range(ell % 2, ell + 1, 2):
        acc = Fraction(0)
        for m, b in enumerate(table.row(k)):
            if b:
                acc += b * gaussian_moment(ell + m)
        out[k] = float(acc / math.factorial(k))
    return out


def hermite_scaling_coeffs(ell: int, gamma: float) -> dict[int, float]:
    """Expansion of He_ell(gamma * x) back into the He basis.

    Returns {ell - 2k: ell! gamma^(ell-2k) (gamma^2-1)^k / (2^k k! (ell-2k)!)}
    so that He_ell(gamma x) = sum over the map of coeff * He_degree(x).
    """
    if ell < 0:
        raise ValueError(f"degree must be >= 0, got {ell}")
    fact = math.factorial(ell)
    out = {}
    for k in range(ell // 2 + 1):
        deg = ell - 2 * k
        out[deg] = (
            fact
            * gamma**deg
            * (gamma**2 - 1.0) ** k
            / (2**k * math.factorial(k) * math.factorial(deg))
        )
    return out


def sph_harm_dim(d: int, ell: int) -> int:
    """Number of degree-ell spherical harmonics in d variables.

    Uses the closed form (2l + d - 2)/l * binom(l + d - 3, l - 1) for
    l >= 1 (and 1 for l = 0), evaluated in exact integer arithmetic.
    """
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if ell < 0:
        raise ValueError(f"degree must be >= 0, got {ell}")
    if ell == 0:
        return 1
    num = (2 * ell + d - 2) * math.comb(ell + d - 3, ell - 1)
    count, rem = divmod(num, ell)
    if rem:  # cannot happen; the closed form is integral
        raise ArithmeticError(f"non-integral harmonic count for d={d}, l={ell}")
    if count > _INT64_MAX:
        raise OverflowError(f"B({d},{ell}) exceeds the 64-bit integer range")
    return count


@dataclass(frozen=True)
class GegenbauerBasis:
    """Gegenbauer polynomials Q_l for the sphere of radius sqrt(d).

    Normalized so that Q_l(d) = 1 and B(d,l) <Q_k, Q_l> = delta_kl under
    the distribution of <x, y> for independent uniform points on the
    radius-sqrt(d) sphere.  Evaluation runs the recurrence

        Q_{l+1}(t) = ((2l + d - 2) (t/d) Q_l(t) - l Q_{l-1}(t)) / (l + d - 2)

    which is the classical Gegenbauer recurrence for C_l^{(d-2)/2}(t/d)
    divided through by C_l^{(d-2)/2}(1).  Dimension 2 is rejected: the
    weight exponent (d-2)/2 degenerates there and the large-d regime this
    family serves never needs it.
    """

    d: int
    max_degree: int

    def __post_init__(self):
        if self.d < 3:
            raise ValueError(f"dimension must be >= 3, got {self.d}")
        if self.max_degree < 0:
            raise ValueError("max_degree must be >= 0")

    def table(self, t) -> np.ndarray:
        """Stack of Q_0(t) .. Q_max_degree(t); leading axis is the degree."""
        arr = np.asarray(t, dtype=float)
        limit = self.d * (1.0 + 1e-12)
        if np.any(np.abs(arr) > limit):
            worst = float(np.max(np.abs(arr)))
            raise ValueError(
                f"argument {worst} outside [-{self.d}, {self.d}]"
            )
        x = np.clip(arr / self.d, -1.0, 1.0)
        out = np.empty((self.max_degree + 1,) + arr.shape)
        out[0] = 1.0
        if self.max_degree == 0:
            return out
        out[1] = x
        d = self.d
        for ell in range(1, self.max_degree):
            out[ell + 1] = ((2 * ell + d - 2) * x * out[ell] - ell * out[ell - 1]) / (
                ell + d - 2
            )
        return out

    def value(self, ell: int, t):
        """Q_ell(t) for t in [-d, d]; scalar in, scalar out."""
        if not 0 <= ell <= self.max_degree:
            raise ValueError(f"degree {ell} outside table range 0..{self.max_degree}")
        vals = self.table(t)[ell]
        return float(vals) if np.ndim(t) == 0 else vals


def _panel_integrals(fn, panels: int, nodes: int) -> np.ndarray:
    """Composite Gauss-Legendre integrals over [-1, 1] of a stacked integrand.

    `fn(s)` must return an array whose last axis matches `s`; one integral
    per leading entry is returned.
    """
    base_x, base_w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    total = None
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        xs = half * base_x + 0.5 * (a + b)
        part = half * (np.asarray(fn(xs)) @ base_w)
        total = part if total is None else total + part
    return np.atleast_1d(total)


def monomial_gegenbauer_coeffs(
    d: int,
    ell: int,
    max_j: int | None = None,
    rel_tol: float = 1e-8,
) -> np.ndarray:
    """Coefficients c_j = B(d,j) E[<x,e1>^ell Q_j(sqrt(d) <x,e1>)].

    The expectation is over x uniform on the radius-sqrt(d) sphere and is
    evaluated by adaptive composite Gauss-Legendre quadrature against the
    marginal density of <x,e1>/sqrt(d), proportional to (1-s^2)^((d-3)/2)
    on [-1, 1].  Panels are doubled until every active coefficient is
    stable to `rel_tol`.  Entries with j > ell or j + ell odd are exactly
    zero by symmetry and are never integrated.
    """
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if ell < 0:
        raise ValueError(f"degree must be >= 0, got {ell}")
    if max_j is None:
        max_j = ell
    if max_j > ell:
        raise ValueError(f"max_j={max_j} exceeds monomial degree {ell}")

    active = [j for j in range(max_j + 1) if (j + ell) % 2 == 0]
    out = np.zeros(max_j + 1)
    if not active:
        return out

    basis = GegenbauerBasis(d, max_j)
    alpha = 0.5 * (d - 3)
    sqrt_d = math.sqrt(d)

    def integrands(s):
        weight = (1.0 - s**2) ** alpha
        q = basis.table(d * s)
        mono = (sqrt_d * s) ** ell
        rows = [weight] + [mono * q[j] * weight for j in active]
        return np.stack(rows)

    # Start with enough panels to resolve the O(1/sqrt(d)) weight width.
    panels = max(8, int(math.isqrt(d)))
    nodes = 24
    prev = None
    cur = None
    for _ in range(12):
        parts = _panel_integrals(integrands, panels, nodes)
        cur = parts[1:] / parts[0]
        if prev is not None:
            floor = 1e-13 * float(np.max(np.abs(cur)))
            err = np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), floor))
            if err <= rel_tol:
                break
        prev = cur
        panels *= 2
    else:
        achieved = float(np.max(np.abs(cur - prev)))
        raise QuadratureError(
            f"projection quadrature stalled at panels={panels}", achieved=achieved
        )

    for idx, j in enumerate(active):
        out[j] = sph_harm_dim(d, j) * cur[idx]
    return out


@dataclass(frozen=True)
class CoeffTable:
    """A named coefficient table with the parameters that produced it.

    `entries` holds (index..., value) tuples; the JSON form is stable so
    tables can be diffed across implementations.
    """

    kind: str
    params: dict
    entries: tuple[tuple, ...]

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "params": self.params,
            "entries": [list(e) for e in self.entries],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CoeffTable":
        payload = json.loads(text)
        return cls(
            kind=payload["kind"],
            params=payload["params"],
            entries=tuple(tuple(e) for e in payload["entries"]),
        )


def monomial_hermite_table(max_degree: int) -> CoeffTable:
    entries = []
    for ell in range(max_degree + 1):
        coeffs = monomial_hermite_coeffs(ell)
        for k, c in enumerate(coeffs):
            if c != 0.0:
                entries.append((k, ell, c))
    return CoeffTable(
        kind="monomial-to-hermite",
        params={"max_degree": max_degree},
        entries=tuple(entries),
    )


def hermite_scaling_table(ell: int, gamma: float) -> CoeffTable:
    entries = tuple(
        (deg, coeff) for deg, coeff in sorted(hermite_scaling_coeffs(ell, gamma).items())
    )
    return CoeffTable(
        kind="hermite-mult",
        params={"degree": ell, "gamma": gamma},
        entries=entries,
    )


def gegenbauer_projection_table(d: int, ell: int, max_j: int | None = None) -> CoeffTable:
    coeffs = monomial_gegenbauer_coeffs(d, ell, max_j)
    entries = tuple((j, ell, float(c)) for j, c in enumerate(coeffs) if c != 0.0)
    return CoeffTable(
        kind="gegenbauer-projection",
        params={"d": d, "degree": ell, "max_j": len(coeffs) - 1},
        entries=entries,
    )
