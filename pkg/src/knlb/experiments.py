"""Config-driven Monte Carlo campaigns over (n, d) or (q, d) grids.

Each campaign kind draws fresh data per (grid point, trial) unit, records
one or more named statistics with wall time, and summarizes: log-log slope
fits for the scaling kinds, decay ratios for the approximation kinds, term
tables for the bound kinds.  Units are keyed by (point, trial) substreams,
so results are independent of worker scheduling; reduction is by sorted
key.  CSV (records) and JSON (summary) are the output contract; both embed
a schema version.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .errors import ConfigError, KnlbError
from .kernels import KernelFunction, exp_kernel, poly_kernel, power_kernel, softplus_kernel
from .krr import closed_form_bias, make_problem, mc_moment_matrices
from .matrices import (
    as_fraction,
    band_degrees,
    gegenbauer_offdiag_matrix,
    hermite_band_approximant,
    hermite_offdiag_matrix,
    kernel_matrix,
    polar_sphere_approximant,
)
from .sampling import CovarianceSpec, sample_gaussian, sample_sphere, substream_seed
from .spectral import op_norm

__all__ = [
    "SCHEMA_VERSION",
    "KINDS",
    "ScalingRecord",
    "SlopeFit",
    "fit_loglog",
    "ExperimentConfig",
    "RunResult",
    "run",
    "records_to_csv",
    "read_records_csv",
    "write_summary",
]

SCHEMA_VERSION = 1
KINDS = (
    "gegenbauer-scaling",
    "hermite-scaling",
    "approx-decay",
    "bound-terms",
    "decoupling",
    "krr-bias",
)
MAX_GRID_SIZE = 4000
CSV_COLUMNS = ("n", "d", "trial", "statistic", "value", "wall_time")


@dataclass(frozen=True)
class ScalingRecord:
    n: int
    d: int
    trial: int
    statistic: str
    value: float
    wall_time: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr_slope: float
    r2: float
    points: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def fit_loglog(points) -> SlopeFit:
    """OLS of log(value) on log(d) with the residual-based slope stderr."""
    pts = [(float(d), float(v)) for d, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    if any(v <= 0 for _, v in pts):
        raise ValueError("slope fit requires positive values")
    lx = np.log([d for d, _ in pts])
    ly = np.log([v for _, v in pts])
    x_c = lx - lx.mean()
    sxx = float(np.sum(x_c**2))
    if sxx == 0.0:
        raise ValueError("slope fit requires at least two distinct d values")
    slope = float(np.sum(x_c * ly) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    rss = float(np.sum(resid**2))
    tss = float(np.sum((ly - ly.mean()) ** 2))
    dof = len(pts) - 2
    stderr = math.sqrt(rss / dof / sxx) if dof > 0 else 0.0
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss < 1e-24 else 0.0)
    return SlopeFit(slope, intercept, stderr, r2, len(pts))


def _build_covariance(cfg: dict, d: int) -> CovarianceSpec:
    kind = cfg.get("kind", "identity")
    if kind == "identity":
        return CovarianceSpec.identity(d)
    if kind == "power":
        if "exponent" not in cfg:
            raise ConfigError("covariance.exponent", "required for power spectra")
        return CovarianceSpec.power_law(d, float(cfg["exponent"]), float(cfg.get("top", 1.0)))
    if kind == "explicit":
        vals = cfg.get("eigenvalues")
        if not vals:
            raise ConfigError("covariance.eigenvalues", "required for explicit spectra")
        if len(vals) != d:
            raise ConfigError(
                "covariance.eigenvalues", f"length {len(vals)} does not match d={d}"
            )
        return CovarianceSpec(np.asarray(vals, dtype=float))
    raise ConfigError("covariance.kind", f"unknown kind {kind!r}")


_PROFILE_BUILDERS = {
    "exp": lambda cfg: exp_kernel(int(cfg.get("max_order", 16))),
    "poly": lambda cfg: poly_kernel(cfg["coeffs"], int(cfg.get("max_order", 0)) or None),
    "power": lambda cfg: power_kernel(float(cfg["p"]), int(cfg.get("max_order", 16))),
    "softplus": lambda cfg: softplus_kernel(int(cfg.get("max_order", 16))),
}


def _build_profile(cfg: dict) -> KernelFunction:
    kind = cfg.get("kind")
    if kind not in _PROFILE_BUILDERS:
        raise ConfigError("kernel.kind", f"{kind!r} is not a profile kernel")
    try:
        return _PROFILE_BUILDERS[kind](cfg)
    except KeyError as err:
        raise ConfigError(f"kernel.{err.args[0]}", "missing required field") from None


def _build_model(kernel_cfg: dict, cov: CovarianceSpec | None, d: int):
    kind = kernel_cfg.get("kind")
    if kind == "hermite":
        if cov is None:
            raise ConfigError("kernel.kind", "hermite kernels need Gaussian data")
        return bnd.HermiteModel(int(kernel_cfg["ell"]), cov)
    if kind == "gegenbauer":
        return bnd.GegenbauerModel(int(kernel_cfg["ell"]), d)
    if cov is None:
        raise ConfigError("kernel.kind", f"{kind!r} needs Gaussian data")
    return bnd.ProfileModel(_build_profile(kernel_cfg), cov)


def _build_target(cfg: dict, d: int, seed: int):
    terms = cfg.get("terms")
    if not terms:
        raise ConfigError("params.target.terms", "at least one term required")
    weights, dirs, coeffs = [], [], []
    for idx, term in enumerate(terms):
        weights.append(float(term.get("weight", 1.0)))
        coeffs.append(np.asarray(term["hermite"], dtype=float))
        spec = term.get("direction", "e1")
        if isinstance(spec, str) and spec.startswith("e"):
            axis = int(spec[1:]) - 1
            if not 0 <= axis < d:
                raise ConfigError("params.target.direction", f"{spec} outside dimension {d}")
            v = np.zeros(d)
            v[axis] = 1.0
        elif spec == "random" or (isinstance(spec, dict) and spec.get("kind") == "random"):
            rng = np.random.default_rng(substream_seed(seed, 23, idx))
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
        else:
            v = np.asarray(spec, dtype=float)
            if v.size != d:
                raise ConfigError("params.target.direction", f"length {v.size} != d={d}")
            v = v / np.linalg.norm(v)
        dirs.append(v)
    from .krr import TargetFunction

    return TargetFunction(np.asarray(weights), np.vstack(dirs), tuple(coeffs))


@dataclass(frozen=True)
class _Point:
    index: int
    n: int
    d: int
    q: object  # Fraction or None


@dataclass
class ExperimentConfig:
    """Validated campaign description; see `from_dict` for the JSON schema."""

    kind: str
    grid: list
    trials: int
    seed: int
    covariance: dict = field(default_factory=lambda: {"kind": "identity"})
    kernel: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    allow_large: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        schema = data.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError("schema", f"unsupported schema {schema}")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        grid = data.get("grid")
        if not isinstance(grid, list) or not grid:
            raise ConfigError("grid", "must be a non-empty list")
        trials = data.get("trials", 2)
        if not isinstance(trials, int) or trials < 2:
            raise ConfigError("trials", "must be an integer >= 2")
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed", "must be an integer")
        cfg = cls(
            kind=kind,
            grid=grid,
            trials=trials,
            seed=seed,
            covariance=data.get("covariance", {"kind": "identity"}),
            kernel=data.get("kernel", {}),
            params=data.get("params", {}),
            tolerances=data.get("tolerances", {}),
            allow_large=bool(data.get("allow_large", False)),
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "grid": self.grid,
            "trials": self.trials,
            "seed": self.seed,
            "covariance": self.covariance,
            "kernel": self.kernel,
            "params": self.params,
            "tolerances": self.tolerances,
            "allow_large": self.allow_large,
        }

    @property
    def op_tol(self) -> float:
        return float(self.tolerances.get("op_norm", 1e-6))

    def validate(self):
        kernel_kind = self.kernel.get("kind")
        if self.kind == "gegenbauer-scaling" and kernel_kind != "gegenbauer":
            raise ConfigError("kernel.kind", "gegenbauer-scaling needs a gegenbauer kernel")
        if self.kind == "hermite-scaling" and kernel_kind != "hermite":
            raise ConfigError("kernel.kind", "hermite-scaling needs a hermite kernel")
        if kernel_kind in ("hermite", "gegenbauer") and "ell" not in self.kernel:
            raise ConfigError("kernel.ell", "degree required")
        if self.kind == "approx-decay":
            variant = self.params.get("variant")
            if variant not in ("hermite-band", "polar-sphere"):
                raise ConfigError(
                    "params.variant", "must be 'hermite-band' or 'polar-sphere'"
                )
            if variant == "polar-sphere" and self.covariance.get("kind", "identity") != "identity":
                raise ConfigError(
                    "covariance.kind", "polar-sphere approximant needs isotropic data"
                )
            self._require_profile_kernel()
        if self.kind == "krr-bias":
            self._require_profile_kernel()
            if "target" not in self.params:
                raise ConfigError("params.target", "required for krr-bias")
            if "lambda" not in self.params:
                raise ConfigError("params.lambda", "required for krr-bias")
        for idx, point in enumerate(self.grid):
            self.resolve_point(idx)
        if self.kind in ("approx-decay", "krr-bias"):
            for idx in range(len(self.grid)):
                if self._point_q(idx) is None:
                    raise ConfigError(
                        f"grid[{idx}]", "needs 'q' (in the point or params) for this kind"
                    )

    def _require_profile_kernel(self):
        if self.kernel.get("kind") not in _PROFILE_BUILDERS:
            raise ConfigError(
                "kernel.kind", f"must be a profile kernel ({', '.join(_PROFILE_BUILDERS)})"
            )

    def _point_q(self, index: int):
        point = self.grid[index]
        raw = point.get("q", self.params.get("q"))
        return None if raw is None else as_fraction(raw)

    def covariance_for(self, d: int) -> CovarianceSpec:
        return _build_covariance(self.covariance, d)

    def resolve_point(self, index: int) -> _Point:
        point = self.grid[index]
        if not isinstance(point, dict) or "d" not in point:
            raise ConfigError(f"grid[{index}]", "each point needs at least 'd'")
        d = int(point["d"])
        q = self._point_q(index)
        if "n" in point:
            n = int(point["n"])
        elif "q" in point:
            cov = self.covariance_for(d)
            n = max(2, int(round(cov.tau1 ** float(q))))
        else:
            raise ConfigError(f"grid[{index}]", "each point needs 'n' or 'q'")
        if n < 2 or d < 2:
            raise ConfigError(f"grid[{index}]", f"n={n}, d={d} must both be >= 2")
        if not self.allow_large and (n > MAX_GRID_SIZE or d > MAX_GRID_SIZE):
            raise ConfigError(
                f"grid[{index}]",
                f"n={n}, d={d} exceeds the desk-scale guard {MAX_GRID_SIZE}"
                " (set allow_large to override)",
            )
        return _Point(index, n, d, q)


def _trial_stats(cfg: ExperimentConfig, point: _Point, trial: int) -> list:
    """All (statistic, value) pairs for one (point, trial) unit."""
    seed = cfg.seed
    key = (point.index, trial)
    tol = cfg.op_tol
    kind = cfg.kind

    if kind == "gegenbauer-scaling":
        x = sample_sphere(point.n, point.d, seed, key + (0,))
        delta = gegenbauer_offdiag_matrix(x, int(cfg.kernel["ell"]))
        return [("offdiag_norm", op_norm(delta, tol))]

    cov = cfg.covariance_for(point.d)

    if kind == "hermite-scaling":
        x = sample_gaussian(point.n, cov, seed, key + (0,))
        delta = hermite_offdiag_matrix(x, int(cfg.kernel["ell"]), cov.tau2)
        return [("offdiag_norm", op_norm(delta, tol))]

    if kind == "approx-decay":
        f = _build_profile(cfg.kernel)
        x = sample_gaussian(point.n, cov, seed, key + (0,))
        k = kernel_matrix(x, f, cov.tau1)
        if cfg.params["variant"] == "hermite-band":
            k_bar = hermite_band_approximant(x, f, point.q, cov)
        else:
            k_bar = polar_sphere_approximant(x, f, point.q)
        err = op_norm(k.values - k_bar.values, tol)
        return [("approx_err_norm", err)]

    if kind == "bound-terms":
        sampler, model = _sampler_and_model(cfg, cov, point.d)
        stats = bnd.bound_trial_stats(
            sampler,
            model,
            point.n,
            seed,
            key,
            int(cfg.params.get("z_samples", 2000)),
            int(cfg.params.get("inner_samples", 2000)),
            tol,
        )
        return [(name, stats[name]) for name in bnd.BOUND_STATS]

    if kind == "decoupling":
        sampler, model = _sampler_and_model(cfg, cov, point.d)
        coupled, decoupled = bnd.decoupling_trial_norms(
            sampler, model, point.n, seed, key, tol
        )
        return [("coupled_norm", coupled), ("decoupled_norm", decoupled)]

    if kind == "krr-bias":
        f = _build_profile(cfg.kernel)
        target = _build_target(cfg.params["target"], point.d, seed)
        x = sample_gaussian(point.n, cov, seed, key + (0,))
        moments = mc_moment_matrices(
            x,
            f,
            target,
            cov,
            int(cfg.params.get("mv_samples", 100_000)),
            seed,
            stream=key + (11,),
        )
        problem = make_problem(target, x, cov, f, float(cfg.params["lambda"]))
        result = closed_form_bias(problem, target, moments.m, moments.v[0])
        return [
            ("bias", result.bias),
            ("bias_cross", result.cross_term),
            ("bias_quad", result.quad_term),
        ]

    raise ConfigError("kind", f"unhandled kind {kind!r}")


def _sampler_and_model(cfg: ExperimentConfig, cov: CovarianceSpec, d: int):
    if cfg.kernel.get("kind") == "gegenbauer":
        return bnd.SphereSampler(d), _build_model(cfg.kernel, None, d)
    return bnd.GaussianSampler(cov), _build_model(cfg.kernel, cov, d)


def _execute_unit(payload):
    config_dict, point_idx, trial = payload
    cfg = ExperimentConfig.from_dict(config_dict)
    point = cfg.resolve_point(point_idx)
    start = time.perf_counter()
    try:
        stats = _trial_stats(cfg, point, trial)
        return point_idx, trial, stats, time.perf_counter() - start, None
    except (KnlbError, np.linalg.LinAlgError, FloatingPointError, ValueError) as err:
        return point_idx, trial, [], time.perf_counter() - start, str(err)


@dataclass
class RunResult:
    records: list
    summary: dict


def run(config: ExperimentConfig, workers: int = 1, progress=None) -> RunResult:
    """Execute every (grid point, trial) unit and summarize.

    Units are independent and seeded by (point, trial), so any worker count
    produces the same records; reduction sorts by unit key.  Failed units
    are listed in the summary and excluded from statistics, never dropped
    silently.
    """
    config_dict = config.to_dict()
    units = [
        (config_dict, p, t)
        for p in range(len(config.grid))
        for t in range(config.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_execute_unit, units, chunksize=1))
    else:
        raw = []
        for unit in units:
            raw.append(_execute_unit(unit))
            if progress is not None:
                progress(len(raw), len(units))
    raw.sort(key=lambda item: (item[0], item[1]))

    points = [config.resolve_point(i) for i in range(len(config.grid))]
    records = []
    failures = []
    per_point = {p.index: {} for p in points}
    for point_idx, trial, stats, seconds, error in raw:
        point = points[point_idx]
        if error is not None:
            failures.append({"point": point_idx, "trial": trial, "error": error})
            continue
        for name, value in stats:
            records.append(
                ScalingRecord(point.n, point.d, trial, name, float(value), seconds)
            )
            per_point[point_idx].setdefault(name, []).append(float(value))

    summary = _summarize(config, points, per_point, failures)
    return RunResult(records=records, summary=summary)


def _point_entry(point: _Point, values: dict) -> dict:
    entry = {"n": point.n, "d": point.d}
    if point.q is not None:
        entry["q"] = str(point.q)
    entry.update(values)
    return entry


def _mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _summarize(config, points, per_point, failures) -> dict:
    summary = {
        "schema": SCHEMA_VERSION,
        "kind": config.kind,
        "config": config.to_dict(),
        "failures": failures,
        "points": [],
    }
    kind = config.kind

    if kind in ("gegenbauer-scaling", "hermite-scaling", "approx-decay", "krr-bias"):
        primary = {
            "gegenbauer-scaling": "offdiag_norm",
            "hermite-scaling": "offdiag_norm",
            "approx-decay": "approx_err_norm",
            "krr-bias": "bias",
        }[kind]
        means = []
        for point in points:
            vals = per_point[point.index].get(primary, [])
            mean, se = _mean_se(vals)
            entry = _point_entry(
                point, {"mean": mean, "stderr": se, "trials": len(vals)}
            )
            if kind == "hermite-scaling" and config.covariance.get("kind", "identity") == "identity":
                ell = int(config.kernel["ell"])
                entry["lower_envelope"] = point.n * point.d ** (ell // 4 - ell / 2.0)
            if kind == "krr-bias":
                target = _build_target(config.params["target"], point.d, config.seed)
                degree = band_degrees(point.q)[1]
                entry["target_norm_sq"] = target.squared_norm()
                entry["tail_degree"] = degree
                entry["tail"] = target.tail(degree)
            summary["points"].append(entry)
            if not math.isnan(mean):
                means.append((point.d, mean))

        if kind in ("gegenbauer-scaling", "hermite-scaling", "approx-decay"):
            try:
                summary["slope_fit"] = fit_loglog(means).to_dict()
            except ValueError as err:
                summary["slope_fit"] = None
                summary["slope_fit_error"] = str(err)
        if kind == "approx-decay" and len(means) >= 2:
            values = [m for _, m in means]
            summary["decay"] = {
                "first_mean": values[0],
                "last_mean": values[-1],
                "ratio": values[-1] / values[0] if values[0] else math.inf,
                "strictly_decreasing": all(
                    b < a for a, b in zip(values[:-1], values[1:])
                ),
            }
        return summary

    if kind == "bound-terms":
        summary["reports"] = []
        for point in points:
            samples = per_point[point.index]
            if not samples.get("diag_max"):
                summary["points"].append(_point_entry(point, {"trials": 0}))
                continue
            report = bnd.assemble_bound_report(
                samples, point.n, point.d, {"seed": config.seed}
            )
            summary["reports"].append(report.to_dict())
            summary["points"].append(
                _point_entry(point, {"trials": len(samples["diag_max"])})
            )
        return summary

    if kind == "decoupling":
        summary["results"] = []
        for point in points:
            samples = per_point[point.index]
            coupled = samples.get("coupled_norm", [])
            decoupled = samples.get("decoupled_norm", [])
            if coupled and decoupled:
                result = bnd.assemble_decoupling(coupled, decoupled).to_dict()
            else:
                result = None
            summary["results"].append(result)
            summary["points"].append(_point_entry(point, {"trials": len(coupled)}))
        return summary

    raise ConfigError("kind", f"unhandled kind {kind!r}")


def records_to_csv(records, path):
    """Write records with the frozen column order (schema 1)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(
                [rec.n, rec.d, rec.trial, rec.statistic, repr(rec.value), f"{rec.wall_time:.6f}"]
            )


def read_records_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
        for row in reader:
            out.append(
                ScalingRecord(
                    int(row["n"]),
                    int(row["d"]),
                    int(row["trial"]),
                    row["statistic"],
                    float(row["value"]),
                    float(row["wall_time"]),
                )
            )
    return out


def write_summary(summary: dict, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
