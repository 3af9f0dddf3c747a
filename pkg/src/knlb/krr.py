"""Kernel ridge regression: estimator, closed-form bias, and targets.

Targets are additive single-index functions of whitened projections with
Hermite coefficient tables, so their squared norms and best low-degree
approximation errors have exact expressions.  The test bias of the ridge
estimator is evaluated in closed form from the moment objects

    M_ij = E_x[k(x, x_i) k(x, x_j)],    V_i = E_x[g*(x) k(x, x_i)],

which are estimated by shared-sample Monte Carlo.  Noise never enters the
bias: the closed form already integrates it out, so epsilon draws exist
only on the prediction demo path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernels import KernelFunction
from .matrices import SymMatrix, kernel_matrix, profile_entries
from .orthopoly import hermite_value
from .sampling import CovarianceSpec, DataMatrix, sample_gaussian, substream_seed
from .spectral import DENSE_CUTOFF, min_eig

__all__ = [
    "TargetFunction",
    "single_index_target",
    "RidgeProblem",
    "make_problem",
    "krr_predict",
    "MomentEstimates",
    "mc_moment_matrices",
    "BiasResult",
    "closed_form_bias",
    "mc_bias",
]


@dataclass(frozen=True)
class TargetFunction:
    """Sum of univariate Hermite series applied to whitened projections.

    g*(x) = sum_k weights[k] * g_k(<x, Sigma^{-1/2} v_k>) where g_k has the
    Hermite coefficient vector hermite_coeffs[k] and v_k is a unit vector.
    """

    weights: np.ndarray
    directions: np.ndarray
    hermite_coeffs: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        coeffs = tuple(np.asarray(c, dtype=float) for c in self.hermite_coeffs)
        if not (w.size == dirs.shape[0] == len(coeffs)):
            raise ValueError("weights, directions, and coefficient tables disagree")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors")
        for arr in (w, dirs) + coeffs:
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "hermite_coeffs", coeffs)

    @property
    def max_degree(self) -> int:
        return max(len(c) - 1 for c in self.hermite_coeffs)

    def evaluate(self, x, cov: CovarianceSpec) -> np.ndarray:
        """Values on rows of x drawn from N(0, Sigma)."""
        rows = x.values if isinstance(x, DataMatrix) else np.atleast_2d(x)
        lam = cov.eigenvalues
        if np.any(lam <= 0):
            raise ValueError("whitening requires strictly positive eigenvalues")
        white = rows / np.sqrt(lam)
        return self.evaluate_white(white)

    def evaluate_white(self, white_rows: np.ndarray) -> np.ndarray:
        """Values when the rows are already standard normal coordinates."""
        proj = white_rows @ self.directions.T
        out = np.zeros(proj.shape[0])
        for k, coeffs in enumerate(self.hermite_coeffs):
            term = np.zeros(proj.shape[0])
            for j, a in enumerate(coeffs):
                if a != 0.0:
                    term += a * hermite_value(j, proj[:, k])
            out += self.weights[k] * term
        return out

    def _degree_gram_terms(self) -> np.ndarray:
        # row j: j! * (c alpha_j)^T (V V^T)^{odot j} (c alpha_j)
        n_terms = len(self.hermite_coeffs)
        j_max = self.max_degree
        alpha = np.zeros((j_max + 1, n_terms))
        for k, coeffs in enumerate(self.hermite_coeffs):
            alpha[: len(coeffs), k] = coeffs
        v_gram = self.directions @ self.directions.T
        out = np.zeros(j_max + 1)
        power = np.ones_like(v_gram)
        for j in range(j_max + 1):
            if j > 0:
                power = power * v_gram
            vec = self.weights * alpha[j]
            out[j] = math.factorial(j) * float(vec @ power @ vec)
        return out

    def squared_norm(self) -> float:
        """||g*||^2 in L2 of the data distribution (exact)."""
        return float(np.sum(self._degree_gram_terms()))

    def tail(self, degree: int) -> float:
        """Best-approximation error inf over polynomials of the given degree.

        Hermite orthogonality makes the optimal degree-D polynomial the
        projection, so the tail is the mass above degree D.
        """
        terms = self._degree_gram_terms()
        if degree >= len(terms) - 1:
            return 0.0
        return float(np.sum(terms[max(degree + 1, 0) :]))


def single_index_target(hermite_coeffs, direction, weight: float = 1.0) -> TargetFunction:
    """One-term target g*(x) = weight * sum_j a_j He_j(<x, Sigma^{-1/2} v>)."""
    return TargetFunction(
        weights=np.array([weight]),
        directions=np.atleast_2d(np.asarray(direction, dtype=float)),
        hermite_coeffs=(np.asarray(hermite_coeffs, dtype=float),),
    )


@dataclass(frozen=True)
class RidgeProblem:
    """Data, labels, and estimator settings for one regression instance."""

    x: DataMatrix
    y: np.ndarray
    noise_sd: float
    lam: float
    kernel: KernelFunction
    cov: CovarianceSpec

    def kernel_matrix(self) -> SymMatrix:
        return kernel_matrix(self.x, self.kernel, self.cov.tau1)


def make_problem(
    target: TargetFunction,
    x: DataMatrix,
    cov: CovarianceSpec,
    kernel: KernelFunction,
    lam: float,
    noise_sd: float = 0.0,
    seed: int = 0,
) -> RidgeProblem:
    """Labels y = g*(x_i) + eps_i with seeded Gaussian noise."""
    if lam < 0 or noise_sd < 0:
        raise ValueError("lam and noise_sd must be >= 0")
    g = target.evaluate(x, cov)
    if noise_sd > 0:
        rng = np.random.default_rng(substream_seed(seed, 17))
        g = g + noise_sd * rng.standard_normal(g.size)
    return RidgeProblem(x=x, y=g, noise_sd=noise_sd, lam=lam, kernel=kernel, cov=cov)


def _regularized_solve(k: SymMatrix, lam: float, rhs: np.ndarray):
    """(K + lam I)^{-1} rhs via Cholesky, with the jitter fallback.

    The smallest eigenvalue of K + lam I is checked first: nonpositive is
    a hard error, a value below 1e-8 triggers a reported +1e-10 jitter
    (never at lam = 0, where 1e-8 is the invertibility floor).
    """
    n = k.n
    shifted = k.values + lam * np.eye(n)
    tol = 1e-10 if n > DENSE_CUTOFF else 1e-6
    smallest = min_eig(shifted, rel_tol=tol)
    if lam == 0.0 and smallest <= 1e-8:
        raise ValueError(f"ridgeless system near singular: min eigenvalue {smallest}")
    if smallest <= 0.0:
        raise ValueError(f"system not positive definite: min eigenvalue {smallest}")
    jitter = 0.0
    if smallest < 1e-8:
        jitter = 1e-10
        shifted = shifted + jitter * np.eye(n)
    factor = cho_factor(shifted, lower=True)
    return cho_solve(factor, rhs), smallest, jitter


def krr_predict(problem: RidgeProblem, x_new) -> np.ndarray:
    """Ridge predictions y^T (K + lam I)^{-1} k_X(x) at new points."""
    k = problem.kernel_matrix()
    w, _, _ = _regularized_solve(k, problem.lam, problem.y)
    entries = profile_entries(problem.kernel, problem.cov.tau1)
    rows = x_new.values if isinstance(x_new, DataMatrix) else np.atleast_2d(x_new)
    return np.asarray(entries(problem.x.values, rows)).T @ w


@dataclass
class MomentEstimates:
    """Shared-sample Monte Carlo estimates of M and V with stderrs."""

    m: SymMatrix
    m_stderr: np.ndarray
    v: list
    v_stderr: list
    samples: int


def mc_moment_matrices(
    x: DataMatrix,
    kernel: KernelFunction,
    targets,
    cov: CovarianceSpec,
    m_samples: int,
    seed: int,
    stream: int = 11,
) -> MomentEstimates:
    """Estimate M and one V per target from a single shared z-sample set.

    The same draws serve the matrix and every target vector, so targets
    sharing a design matrix cost one extra reduction each.  Draws are
    chunked at a fixed size to bound memory; the chunking does not affect
    the values.
    """
    if m_samples < 1000:
        raise ValueError("need at least 1000 Monte Carlo samples")
    if isinstance(targets, TargetFunction):
        targets = [targets]
    entries = profile_entries(kernel, cov.tau1)
    n = x.n
    chunk = 20_000
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    v1 = [np.zeros(n) for _ in targets]
    v2 = [np.zeros(n) for _ in targets]
    sqrt_lam = np.sqrt(cov.eigenvalues)
    done = 0
    idx = 0
    while done < m_samples:
        take = min(chunk, m_samples - done)
        z = sample_gaussian(take, cov, seed, (stream, idx))
        b = np.asarray(entries(x.values, z.values))
        s1 += b @ b.T
        bb = b * b
        s2 += bb @ bb.T
        white = z.values / sqrt_lam
        for t_idx, target in enumerate(targets):
            gz = target.evaluate_white(white)
            v1[t_idx] += b @ gz
            v2[t_idx] += bb @ gz**2
        done += take
        idx += 1
    m_mean = s1 / m_samples
    m_var = np.maximum(s2 / m_samples - m_mean**2, 0.0)
    m_mean = 0.5 * (m_mean + m_mean.T)
    v_mean = [v / m_samples for v in v1]
    v_se = [
        np.sqrt(np.maximum(v2[i] / m_samples - v_mean[i] ** 2, 0.0) / m_samples)
        for i in range(len(targets))
    ]
    return MomentEstimates(
        m=SymMatrix(m_mean, tag="M"),
        m_stderr=np.sqrt(m_var / m_samples),
        v=v_mean,
        v_stderr=v_se,
        samples=m_samples,
    )


@dataclass
class BiasResult:
    """Closed-form bias and its three components."""

    bias: float
    norm_sq: float
    cross_term: float
    quad_term: float
    min_eig: float
    jitter: float
    lam: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def closed_form_bias(
    problem: RidgeProblem,
    target: TargetFunction,
    m: SymMatrix,
    v: np.ndarray,
) -> BiasResult:
    """Test bias ||g*||^2 - 2 g^T S^{-1} V + g^T S^{-1} M S^{-1} g.

    S = K + lam I and g holds the noiseless target values on the training
    points; epsilon is already integrated out.
    """
    k = problem.kernel_matrix()
    g = target.evaluate(problem.x, problem.cov)
    w, smallest, jitter = _regularized_solve(k, problem.lam, g)
    norm_sq = target.squared_norm()
    cross = float(w @ v)
    quad = float(w @ (m.values @ w))
    return BiasResult(
        bias=norm_sq - 2.0 * cross + quad,
        norm_sq=norm_sq,
        cross_term=cross,
        quad_term=quad,
        min_eig=smallest,
        jitter=jitter,
        lam=problem.lam,
    )


def mc_bias(
    problem: RidgeProblem,
    target: TargetFunction,
    test_count: int,
    seed: int,
    stream: int = 13,
) -> tuple[float, float]:
    """Direct Monte Carlo bias on fresh test points, with stderr.

    Uses the noise-free labels (y = g), so the expectation over epsilon is
    exact and only the test-point average is sampled.
    """
    k = problem.kernel_matrix()
    g = target.evaluate(problem.x, problem.cov)
    w, _, _ = _regularized_solve(k, problem.lam, g)
    entries = profile_entries(problem.kernel, problem.cov.tau1)
    z = sample_gaussian(test_count, problem.cov, seed, stream)
    preds = np.asarray(entries(problem.x.values, z.values)).T @ w
    truth = target.evaluate(z, problem.cov)
    sq = (preds - truth) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(test_count))
