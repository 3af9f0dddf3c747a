"""Exact and Monte Carlo identity checks, shared by the CLI and the tests.

Exact checks (recurrences, coefficient reconstructions, eigensolver
agreement) must hold to tight relative tolerances.  Monte Carlo checks
compare closed forms against seeded sampled estimates and pass when every
deviation stays within 5 standard errors.  Each check reports its worst
margin = deviation / allowance, so `margin <= 1` means pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrices import hermite_conditional_mean, hermite_pair_correlation
from .orthopoly import (
    GegenbauerBasis,
    HermiteTable,
    hermite_scaling_coeffs,
    hermite_value,
    monomial_hermite_coeffs,
    sph_harm_dim,
)
from .sampling import CovarianceSpec, sample_gaussian, sample_sphere, substream_seed
from .spectral import jacobi_eigenvalues, op_norm

__all__ = ["CheckResult", "run_identity_checks", "EXACT_CHECKS", "MC_CHECKS"]

_TINY = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float  # worst deviation / allowance; <= 1 passes
    detail: str

    def row(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{status:4s}  {self.name:32s} margin={self.margin:9.3g}  {self.detail}"


def _result(name: str, margin: float, detail: str) -> CheckResult:
    return CheckResult(name, margin <= 1.0, margin, detail)


def check_hermite_recurrence(seed: int) -> CheckResult:
    """Recurrence residuals, cross-checked against exact monomial tables.

    The runtime evaluator and the integer coefficient table reach He_l by
    different arithmetic, so comparing them catches either going wrong.
    """
    rng = np.random.default_rng(substream_seed(seed, 1))
    xs = rng.uniform(-5.0, 5.0, 100)
    table = HermiteTable.build(13)
    by_table = [
        np.polynomial.polynomial.polyval(xs, np.array(table.row(ell), dtype=float))
        for ell in range(14)
    ]
    worst, worst_case = 0.0, ""
    for ell in range(1, 13):
        lhs = hermite_value(ell + 1, xs)
        rhs = xs * hermite_value(ell, xs) - ell * hermite_value(ell - 1, xs)
        margin = float(np.max(np.abs(lhs - rhs) / (1e-9 * (1.0 + np.abs(lhs)))))
        if margin > worst:
            worst, worst_case = margin, f"recurrence at degree {ell}"
        cross = float(
            np.max(np.abs(lhs - by_table[ell + 1]) / (1e-9 * (1.0 + np.abs(lhs))))
        )
        if cross > worst:
            worst, worst_case = cross, f"table cross-check at degree {ell + 1}"
    return _result("hermite-recurrence", worst, worst_case or "all residuals zero")


def check_monomial_reconstruction(seed: int) -> CheckResult:
    rng = np.random.default_rng(substream_seed(seed, 2))
    xs = rng.uniform(-3.0, 3.0, 100)
    worst, worst_ell = 0.0, 0
    for ell in range(11):
        coeffs = monomial_hermite_coeffs(ell)
        recon = sum(c * hermite_value(k, xs) for k, c in enumerate(coeffs) if c)
        margin = np.max(np.abs(xs**ell - recon) / (1e-8 * (1.0 + np.abs(xs) ** ell)))
        if margin > worst:
            worst, worst_ell = float(margin), ell
    return _result("monomial-reconstruction", worst, f"worst at degree {worst_ell}")


def check_hermite_scaling(seed: int) -> CheckResult:
    rng = np.random.default_rng(substream_seed(seed, 3))
    xs = rng.uniform(-2.0, 2.0, 50)
    worst, worst_case = 0.0, ""
    for ell in range(9):
        for gamma in (0.3, 1.0, 2.5):
            lhs = hermite_value(ell, gamma * xs)
            rhs = sum(
                c * hermite_value(deg, xs)
                for deg, c in hermite_scaling_coeffs(ell, gamma).items()
            )
            margin = np.max(np.abs(lhs - rhs) / (1e-9 * (1.0 + np.abs(lhs))))
            if margin > worst:
                worst, worst_case = float(margin), f"l={ell}, gamma={gamma}"
    return _result("hermite-scaling", worst, f"worst at {worst_case}")


def check_spectral_oracle(seed: int, quick: bool = False) -> CheckResult:
    rng = np.random.default_rng(substream_seed(seed, 4))
    count, max_n = (10, 128) if quick else (50, 256)
    worst, worst_n = 0.0, 0
    for _ in range(count):
        n = int(rng.integers(10, max_n + 1))
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        vals = jacobi_eigenvalues(a)
        reference = max(abs(vals[0]), abs(vals[-1]))
        iterative = op_norm(a, rel_tol=1e-9, method="lanczos")
        margin = abs(iterative - reference) / (1e-8 * reference)
        if margin > worst:
            worst, worst_n = float(margin), n
    return _result("spectral-oracle", worst, f"{count} matrices, worst n={worst_n}")


def _chunked_pair_means(evaluate, m: int, chunk: int, labels):
    """Accumulate mean and stderr of several statistics over chunked draws."""
    sums = {lab: 0.0 for lab in labels}
    sq_sums = {lab: 0.0 for lab in labels}
    done = 0
    idx = 0
    while done < m:
        take = min(chunk, m - done)
        batch = evaluate(idx, take)
        for lab in labels:
            vals = batch[lab]
            sums[lab] += float(np.sum(vals))
            sq_sums[lab] += float(np.sum(vals**2))
        done += take
        idx += 1
    out = {}
    for lab in labels:
        mean = sums[lab] / m
        var = max(sq_sums[lab] / m - mean**2, 0.0)
        out[lab] = (mean, math.sqrt(var / m))
    return out


def check_gegenbauer_orthogonality(seed: int, quick: bool = False) -> CheckResult:
    d, deg = 20, 4
    m = 20_000 if quick else 200_000
    basis = GegenbauerBasis(d, deg)
    labels = [(k, ell) for k in range(deg + 1) for ell in range(k, deg + 1)]

    def evaluate(idx, take):
        x = sample_sphere(take, d, substream_seed(seed, 5), (idx, 0)).values
        y = sample_sphere(take, d, substream_seed(seed, 5), (idx, 1)).values
        t = np.einsum("ij,ij->i", x, y)
        q = basis.table(np.clip(t, -d, d))
        return {(k, ell): q[k] * q[ell] for k, ell in labels}

    stats = _chunked_pair_means(evaluate, m, 100_000, labels)
    worst, worst_case = 0.0, ""
    for (k, ell), (mean, se) in stats.items():
        b = sph_harm_dim(d, ell)
        dev = abs(b * mean - (1.0 if k == ell else 0.0))
        margin = dev / (5.0 * b * se + _TINY)
        if margin > worst:
            worst, worst_case = margin, f"(k={k}, l={ell})"
    return _result(
        "gegenbauer-orthogonality", worst, f"d={d}, {m} pairs, worst {worst_case}"
    )


def check_gegenbauer_correlation(seed: int, quick: bool = False) -> CheckResult:
    d, deg = 20, 3
    m = 20_000 if quick else 200_000
    basis = GegenbauerBasis(d, deg)
    anchors = sample_sphere(2, d, substream_seed(seed, 6), 0).values
    x, z = anchors[0], anchors[1]
    t_xz = float(np.clip(np.dot(x, z), -d, d))
    labels = [(k, ell) for k in range(deg + 1) for ell in range(deg + 1)]

    def evaluate(idx, take):
        y = sample_sphere(take, d, substream_seed(seed, 6), (idx, 1)).values
        qx = basis.table(np.clip(y @ x, -d, d))
        qz = basis.table(np.clip(y @ z, -d, d))
        return {(k, ell): qx[k] * qz[ell] for k, ell in labels}

    stats = _chunked_pair_means(evaluate, m, 100_000, labels)
    worst, worst_case = 0.0, ""
    for (k, ell), (mean, se) in stats.items():
        target = basis.value(ell, t_xz) / sph_harm_dim(d, ell) if k == ell else 0.0
        margin = abs(mean - target) / (5.0 * se + _TINY)
        if margin > worst:
            worst, worst_case = margin, f"(k={k}, l={ell})"
    return _result(
        "gegenbauer-correlation", worst, f"d={d}, {m} draws, worst {worst_case}"
    )


def check_hermite_unit_reduction(seed: int, quick: bool = False) -> CheckResult:
    d, deg = 16, 4
    m = 100_000 if quick else 1_000_000
    rng = np.random.default_rng(substream_seed(seed, 7))
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    y = rng.standard_normal(d)
    y /= np.linalg.norm(y)
    dot_xy = float(x @ y)
    cov = CovarianceSpec.identity(d)
    labels = [(k, ell) for k in range(deg + 1) for ell in range(deg + 1)]

    def evaluate(idx, take):
        z = sample_gaussian(take, cov, substream_seed(seed, 7), (idx,)).values
        hu = [hermite_value(k, z @ x) for k in range(deg + 1)]
        hv = [hermite_value(ell, z @ y) for ell in range(deg + 1)]
        return {(k, ell): hu[k] * hv[ell] for k, ell in labels}

    stats = _chunked_pair_means(evaluate, m, 100_000, labels)
    worst, worst_case = 0.0, ""
    for (k, ell), (mean, se) in stats.items():
        target = math.factorial(ell) * dot_xy**ell if k == ell else 0.0
        margin = abs(mean - target) / (5.0 * se + _TINY)
        if margin > worst:
            worst, worst_case = margin, f"(k={k}, l={ell})"
    return _result(
        "hermite-unit-reduction", worst, f"d={d}, {m} draws, worst {worst_case}"
    )


def check_hermite_conditional_mean(seed: int, quick: bool = False) -> CheckResult:
    m = 100_000 if quick else 1_000_000
    worst, worst_case = 0.0, ""
    setups = [
        ("iso", CovarianceSpec.identity(40)),
        ("aniso", CovarianceSpec.power_law(30, 0.5)),
    ]
    for tag_idx, (tag, cov) in enumerate(setups):
        x1 = sample_gaussian(1, cov, substream_seed(seed, 8, tag_idx), 0).values[0]
        root = math.sqrt(cov.tau2)
        labels = list(range(7))

        def evaluate(idx, take, _x1=x1, _cov=cov, _root=root, _t=tag_idx):
            x2 = sample_gaussian(take, _cov, substream_seed(seed, 9, _t), (idx,)).values
            u = x2 @ _x1 / _root
            return {ell: hermite_value(ell, u) for ell in labels}

        stats = _chunked_pair_means(evaluate, m, 100_000, labels)
        for ell, (mean, se) in stats.items():
            target = hermite_conditional_mean(x1, ell, cov)
            margin = abs(mean - target) / (5.0 * se + _TINY)
            if margin > worst:
                worst, worst_case = margin, f"{tag}, l={ell}"
    return _result(
        "hermite-conditional-mean", worst, f"{m} draws, worst {worst_case}"
    )


def check_hermite_conditional_corr(seed: int, quick: bool = False) -> CheckResult:
    m = 100_000 if quick else 1_000_000
    pairs = [(1, 1), (2, 2), (3, 3), (1, 3), (2, 4), (2, 6), (6, 6), (1, 2), (2, 3)]
    worst, worst_case = 0.0, ""
    setups = [
        ("iso", CovarianceSpec.identity(30)),
        ("aniso", CovarianceSpec.power_law(25, 0.5)),
    ]
    for tag_idx, (tag, cov) in enumerate(setups):
        anchors = sample_gaussian(2, cov, substream_seed(seed, 10, tag_idx), 0).values
        x1, x3 = anchors[0], anchors[1]
        root = math.sqrt(cov.tau2)

        def evaluate(idx, take, _cov=cov, _x1=x1, _x3=x3, _root=root, _t=tag_idx):
            z = sample_gaussian(take, _cov, substream_seed(seed, 11, _t), (idx,)).values
            u = z @ _x1 / _root
            v = z @ _x3 / _root
            return {
                (ell, lp): hermite_value(ell, u) * hermite_value(lp, v)
                for ell, lp in pairs
            }

        stats = _chunked_pair_means(evaluate, m, 100_000, pairs)
        for (ell, lp), (mean, se) in stats.items():
            target = hermite_pair_correlation(x1, x3, ell, lp, cov)
            margin = abs(mean - target) / (5.0 * se + _TINY)
            if margin > worst:
                worst, worst_case = margin, f"{tag}, (l={ell}, l'={lp})"
    return _result(
        "hermite-conditional-corr", worst, f"{m} draws, worst {worst_case}"
    )


EXACT_CHECKS = (
    check_hermite_recurrence,
    check_monomial_reconstruction,
    check_hermite_scaling,
    check_spectral_oracle,
)
MC_CHECKS = (
    check_gegenbauer_orthogonality,
    check_gegenbauer_correlation,
    check_hermite_unit_reduction,
    check_hermite_conditional_mean,
    check_hermite_conditional_corr,
)


def run_identity_checks(quick: bool = False, seed: int = 20240613) -> list:
    """Run every suite; `quick` shrinks Monte Carlo sizes tenfold."""
    results = []
    for check in EXACT_CHECKS:
        if check is check_spectral_oracle:
            results.append(check(seed, quick))
        else:
            results.append(check(seed))
    for check in MC_CHECKS:
        results.append(check(seed, quick))
    return results
