"""Monte Carlo evaluation of the operator-norm bound terms.

The upper bound on E||K|| decomposes into four estimable pieces: the
diagonal maximum, a conditional-mean term, a correlation-matrix term, and
a centered-maximum term.  The matching lower bound for conditionally
centered kernels uses the same correlation matrix.  Every term is reported
with its raw value and a standard error; the universal constants hidden by
the theory are never baked in, so reports also expose the observed norms
and the empirical ratios for regression tracking.

Logarithms are natural throughout; the reports record that.
"""
from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelFunction
from .matrices import (
    SymMatrix,
    decoupled_offdiag_matrix,
    gegenbauer_entries,
    hermite_conditional_mean,
    hermite_correlation_matrix,
    hermite_entries,
    mc_correlation_matrix,
    profile_entries,
)
from .orthopoly import GegenbauerBasis, hermite_value, sph_harm_dim
from .sampling import CovarianceSpec, DataMatrix, sample_gaussian, sample_sphere
from .spectral import op_norm

__all__ = [
    "EffectiveDims",
    "effective_dims",
    "GaussianSampler",
    "SphereSampler",
    "HermiteModel",
    "GegenbauerModel",
    "ProfileModel",
    "BoundReport",
    "bound_trial_stats",
    "assemble_bound_report",
    "upper_bound_report",
    "lower_bound_terms",
    "DecouplingResult",
    "decoupling_trial_norms",
    "assemble_decoupling",
    "decoupling_ratio",
]

EffectiveDims = namedtuple("EffectiveDims", "tau1 tau2 tau3 tau4 r")


def effective_dims(cov: CovarianceSpec) -> EffectiveDims:
    """Exact trace powers (tau_1..tau_4) and the ratio r = tau2^2 / tau4."""
    t4 = cov.tau(4)
    if t4 == 0.0:
        raise ValueError("tau4 = 0: effective-dimension ratio undefined")
    return EffectiveDims(cov.tau(1), cov.tau(2), cov.tau(3), t4, cov.tau(2) ** 2 / t4)


class GaussianSampler:
    """Draws N(0, Sigma) batches; streams key independent copies."""

    def __init__(self, cov: CovarianceSpec):
        self.cov = cov
        self.d = cov.d

    def draw(self, n: int, seed: int, stream) -> DataMatrix:
        return sample_gaussian(n, self.cov, seed, stream)

    def describe(self) -> dict:
        return {"distribution": "gaussian", "d": self.d}


class SphereSampler:
    """Draws uniform batches on the radius-sqrt(d) sphere."""

    def __init__(self, d: int):
        self.d = d
        self.cov = None

    def draw(self, n: int, seed: int, stream) -> DataMatrix:
        return sample_sphere(n, self.d, seed, stream)

    def describe(self) -> dict:
        return {"distribution": "sphere", "d": self.d}


class HermiteModel:
    """Degree-ell Hermite kernel of normalized inner products.

    Closed forms exist for both the conditional mean and the correlation
    matrix, so no nested sampling is needed.
    """

    def __init__(self, ell: int, cov: CovarianceSpec):
        self.ell = ell
        self.cov = cov
        self.entries = hermite_entries(ell, cov.tau2)
        self.centered = ell % 2 == 1
        self.name = f"hermite({ell})"
        self.has_closed_forms = True

    def diag_values(self, x: DataMatrix) -> np.ndarray:
        sq = np.einsum("ij,ij->i", x.values, x.values)
        return hermite_value(self.ell, sq / math.sqrt(self.cov.tau2))

    def conditional_mean(self, rows) -> np.ndarray:
        return np.atleast_1d(hermite_conditional_mean(rows, self.ell, self.cov))

    def correlation(self, x: DataMatrix) -> SymMatrix:
        return hermite_correlation_matrix(x, self.ell, self.cov)


class GegenbauerModel:
    """Degree-ell Gegenbauer kernel on the radius-sqrt(d) sphere.

    The correlation matrix is the same Gegenbauer matrix scaled down by
    the harmonic count B(d, ell), diagonal included.
    """

    def __init__(self, ell: int, d: int):
        self.ell = ell
        self.d = d
        self.entries = gegenbauer_entries(d, ell)
        self.centered = ell >= 1
        self.name = f"gegenbauer({ell})"
        self.has_closed_forms = True
        self._basis = GegenbauerBasis(d, ell)

    def diag_values(self, x: DataMatrix) -> np.ndarray:
        sq = np.einsum("ij,ij->i", x.values, x.values)
        return self._basis.table(np.clip(sq, -self.d, self.d))[self.ell]

    def conditional_mean(self, rows) -> np.ndarray:
        rows = np.atleast_2d(rows)
        fill = 1.0 if self.ell == 0 else 0.0
        return np.full(rows.shape[0], fill)

    def correlation(self, x: DataMatrix) -> SymMatrix:
        g = self.entries(x.values, x.values)
        return SymMatrix(g / sph_harm_dim(self.d, self.ell), tag="G")


class ProfileModel:
    """General inner-product kernel f(<x,y>/tau1); no closed forms.

    Conditional means use nested Monte Carlo with O(1/sqrt(inner_samples))
    bias; the correlation matrix uses shared-sample Monte Carlo.
    """

    def __init__(self, f: KernelFunction, cov: CovarianceSpec):
        self.f = f
        self.cov = cov
        self.entries = profile_entries(f, cov.tau1)
        self.centered = False
        self.name = f"profile({f.name})"
        self.has_closed_forms = False

    def diag_values(self, x: DataMatrix) -> np.ndarray:
        sq = np.einsum("ij,ij->i", x.values, x.values)
        return np.asarray(self.f(sq / self.cov.tau1))

    conditional_mean = None
    correlation = None


def _mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size <= 1:
        return (float(arr[0]) if arr.size else math.nan), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _sqrt_delta(scale: float, mean: float, se: float) -> float:
    # stderr of scale * sqrt(mean) by the delta method
    if mean <= 0.0:
        return 0.0
    return scale * se / (2.0 * math.sqrt(mean))


BOUND_STATS = (
    "diag_max",
    "cond_mean_sq",
    "corr_norm",
    "centered_max_sq",
    "lower_corr",
    "lower_diag",
    "full_norm",
    "offdiag_norm",
)


def bound_trial_stats(
    sampler,
    model,
    n: int,
    seed: int,
    trial_key,
    z_samples: int = 2000,
    inner_samples: int = 2000,
    op_tol: float = 1e-6,
) -> dict:
    """One trial's raw statistics for every bound term.

    `trial_key` is an int or tuple prefixing every substream this trial
    touches, so distinct trials (or grid points) never share randomness.
    Closed forms are used for the conditional mean and the correlation
    matrix when the model has them; otherwise fresh substreams feed the
    nested Monte Carlo estimates.
    """
    key = trial_key if isinstance(trial_key, tuple) else (trial_key,)
    x = sampler.draw(n, seed, key + (0,))
    out = {}
    out["diag_max"] = float(np.max(np.abs(model.diag_values(x))))

    if model.conditional_mean is not None:
        h = model.conditional_mean(x.values)
    else:
        z_inner = sampler.draw(inner_samples, seed, key + (3,))
        h = np.asarray(model.entries(x.values, z_inner.values)).mean(axis=1)
    out["cond_mean_sq"] = float(np.mean(h**2))

    if model.correlation is not None:
        g = model.correlation(x)
    else:
        g, _ = mc_correlation_matrix(x, model.entries, z_samples, seed, stream=key + (1,))
    out["corr_norm"] = op_norm(g, op_tol)
    g_diag = np.diag(g.values)
    out["lower_corr"] = math.sqrt(n * out["corr_norm"])
    out["lower_diag"] = math.sqrt(max(float(np.sum(g_diag[1:])), 0.0))

    z0 = sampler.draw(1, seed, key + (2,))
    k_zx = np.asarray(model.entries(x.values, z0.values))[:, 0]
    if model.conditional_mean is not None:
        h_z0 = float(model.conditional_mean(z0.values)[0])
    else:
        x_inner = sampler.draw(inner_samples, seed, key + (4,))
        h_z0 = float(np.mean(model.entries(z0.values, x_inner.values)))
    out["centered_max_sq"] = float(np.max((k_zx - h_z0) ** 2))

    k_full = np.asarray(model.entries(x.values, x.values))
    k_full = 0.5 * (k_full + k_full.T)
    out["full_norm"] = op_norm(k_full, op_tol)
    k_off = k_full.copy()
    np.fill_diagonal(k_off, 0.0)
    out["offdiag_norm"] = op_norm(k_off, op_tol)
    return out


@dataclass
class BoundReport:
    """Raw bound terms with standard errors and the observed norms."""

    n: int
    d: int
    trials: int
    term_diag: float
    term_mean: float
    term_corr: float
    term_max: float
    se_diag: float
    se_mean: float
    se_corr: float
    se_max: float
    lower_corr: float
    lower_diag: float
    se_lower_corr: float
    se_lower_diag: float
    observed_full_norm: float
    observed_offdiag_norm: float
    se_full_norm: float
    se_offdiag_norm: float
    log_base: str = "natural"
    config: dict = field(default_factory=dict)

    @property
    def total_upper(self) -> float:
        return self.term_diag + self.term_mean + self.term_corr + self.term_max

    @property
    def upper_ratio(self) -> float:
        """Observed full norm over the summed upper terms."""
        return self.observed_full_norm / self.total_upper if self.total_upper else math.inf

    @property
    def lower_ratio(self) -> float:
        """Observed off-diagonal norm over the larger lower term."""
        floor = max(self.lower_corr, self.lower_diag)
        return self.observed_offdiag_norm / floor if floor else math.inf

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["total_upper"] = self.total_upper
        out["upper_ratio"] = self.upper_ratio
        out["lower_ratio"] = self.lower_ratio
        return out


def assemble_bound_report(samples: dict, n: int, d: int, config: dict | None = None) -> BoundReport:
    """Aggregate per-trial statistics (as from `bound_trial_stats`) into a report."""
    trials = len(samples["diag_max"])
    log_n = math.log(n)
    m_diag, s_diag = _mean_se(samples["diag_max"])
    m_mean, s_mean = _mean_se(samples["cond_mean_sq"])
    m_corr, s_corr = _mean_se(samples["corr_norm"])
    m_max, s_max = _mean_se(samples["centered_max_sq"])
    m_lc, s_lc = _mean_se(samples["lower_corr"])
    m_ld, s_ld = _mean_se(samples["lower_diag"])
    m_full, s_full = _mean_se(samples["full_norm"])
    m_off, s_off = _mean_se(samples["offdiag_norm"])
    return BoundReport(
        n=n,
        d=d,
        trials=trials,
        term_diag=m_diag,
        term_mean=n * math.sqrt(log_n * m_mean) if m_mean > 0 else 0.0,
        term_corr=math.sqrt(n * log_n * m_corr) if m_corr > 0 else 0.0,
        term_max=log_n * math.sqrt(n * m_max) if m_max > 0 else 0.0,
        se_diag=s_diag,
        se_mean=_sqrt_delta(n * math.sqrt(log_n), m_mean, s_mean),
        se_corr=_sqrt_delta(math.sqrt(n * log_n), m_corr, s_corr),
        se_max=_sqrt_delta(log_n * math.sqrt(n), m_max, s_max),
        lower_corr=m_lc,
        lower_diag=m_ld,
        se_lower_corr=s_lc,
        se_lower_diag=s_ld,
        observed_full_norm=m_full,
        observed_offdiag_norm=m_off,
        se_full_norm=s_full,
        se_offdiag_norm=s_off,
        config=config or {},
    )


def upper_bound_report(
    sampler,
    model,
    n: int,
    trials: int,
    z_samples: int,
    seed: int,
    inner_samples: int = 2000,
    op_tol: float = 1e-6,
) -> BoundReport:
    """Estimate all bound terms over fresh data batches.

    Runs `trials` independent trials and aggregates; see
    `bound_trial_stats` for the per-trial substream layout.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    samples = {name: [] for name in BOUND_STATS}
    for t in range(trials):
        stats = bound_trial_stats(
            sampler, model, n, seed, (t,), z_samples, inner_samples, op_tol
        )
        for name in BOUND_STATS:
            samples[name].append(stats[name])
    config = {
        "sampler": sampler.describe(),
        "kernel": model.name,
        "centered": model.centered,
        "z_samples": z_samples,
        "inner_samples": inner_samples,
        "seed": seed,
        "op_tol": op_tol,
    }
    return assemble_bound_report(samples, n, sampler.d, config)


def lower_bound_terms(g_matrices, op_tol: float = 1e-6) -> dict:
    """Lower-bound statistics over an ensemble of correlation matrices.

    Valid only for conditionally centered kernels (the caller asserts);
    returns mean and stderr of sqrt(n ||G||) and sqrt(sum_{i>1} G_ii).
    """
    lc, ld = [], []
    for g in g_matrices:
        arr = g.values if isinstance(g, SymMatrix) else np.asarray(g, dtype=float)
        n = arr.shape[0]
        lc.append(math.sqrt(n * op_norm(arr, op_tol)))
        ld.append(math.sqrt(max(float(np.sum(np.diag(arr)[1:])), 0.0)))
    m_lc, s_lc = _mean_se(lc)
    m_ld, s_ld = _mean_se(ld)
    return {
        "lower_corr": m_lc,
        "lower_diag": m_ld,
        "se_lower_corr": s_lc,
        "se_lower_diag": s_ld,
        "trials": len(lc),
    }


def decoupling_trial_norms(
    sampler,
    model,
    n: int,
    seed: int,
    trial_key,
    op_tol: float = 1e-6,
    tie_streams: bool = False,
) -> tuple[float, float]:
    """(coupled, decoupled) off-diagonal norms for one paired trial."""
    key = trial_key if isinstance(trial_key, tuple) else (trial_key,)
    x = sampler.draw(n, seed, key + (0,))
    x_t = x if tie_streams else sampler.draw(n, seed, key + (1,))
    k_full = np.asarray(model.entries(x.values, x.values))
    k_full = 0.5 * (k_full + k_full.T)
    np.fill_diagonal(k_full, 0.0)
    coupled = op_norm(k_full, op_tol)
    decoupled = op_norm(decoupled_offdiag_matrix(x, x_t, model.entries), op_tol)
    return coupled, decoupled


@dataclass
class DecouplingResult:
    coupled_norm: float
    decoupled_norm: float
    ratio: float
    se_ratio: float
    se_coupled: float
    se_decoupled: float
    trials: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def assemble_decoupling(coupled, decoupled) -> DecouplingResult:
    """Ratio of means with a paired delta-method standard error."""
    m_c, s_c = _mean_se(coupled)
    m_d, s_d = _mean_se(decoupled)
    ratio = m_c / m_d if m_d else math.inf
    if len(coupled) > 1 and m_c > 0 and m_d > 0:
        cov_cd = float(np.cov(coupled, decoupled, ddof=1)[0, 1]) / len(coupled)
        var_ratio = ratio**2 * (
            (s_c / m_c) ** 2 + (s_d / m_d) ** 2 - 2.0 * cov_cd / (m_c * m_d)
        )
        se_ratio = math.sqrt(max(var_ratio, 0.0))
    else:
        se_ratio = 0.0
    return DecouplingResult(
        coupled_norm=m_c,
        decoupled_norm=m_d,
        ratio=ratio,
        se_ratio=se_ratio,
        se_coupled=s_c,
        se_decoupled=s_d,
        trials=len(coupled),
    )


def decoupling_ratio(
    sampler,
    model,
    n: int,
    trials: int,
    seed: int,
    op_tol: float = 1e-6,
    tie_streams: bool = False,
) -> DecouplingResult:
    """Paired estimate of E||Delta|| / E||Delta~|| over independent copies.

    `tie_streams=True` reuses the same stream for both batches, which must
    reproduce the coupled matrix exactly (a self-check mode, not an
    estimate).
    """
    if trials < 1:
        raise ValueError("need at least 1 trial")
    coupled, decoupled = [], []
    for t in range(trials):
        c, dc = decoupling_trial_norms(sampler, model, n, seed, (t,), op_tol, tie_streams)
        coupled.append(c)
        decoupled.append(dc)
    return assemble_decoupling(coupled, decoupled)
