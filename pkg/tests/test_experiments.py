import json
import math

import numpy as np
import pytest

from knlb.errors import ConfigError
from knlb.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    fit_loglog,
    read_records_csv,
    records_to_csv,
    run,
    write_summary,
)


def base_config(**overrides):
    data = {
        "schema": 1,
        "kind": "gegenbauer-scaling",
        "seed": 5,
        "trials": 3,
        "grid": [{"n": 20, "d": 20}, {"n": 30, "d": 30}, {"n": 45, "d": 45}],
        "kernel": {"kind": "gegenbauer", "ell": 2},
        "tolerances": {"op_norm": 1e-3},
    }
    data.update(overrides)
    return data


class TestFitLogLog:
    def test_exact_power_law(self):
        points = [(d, d**-0.5) for d in (10, 20, 40, 80)]
        fit = fit_loglog(points)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)

    def test_constant_values(self):
        fit = fit_loglog([(10, 3.0), (20, 3.0), (40, 3.0)])
        assert fit.slope == pytest.approx(0.0, abs=1e-14)

    def test_noisy_synthetic_fixture(self):
        rng = np.random.default_rng(0)
        points = [
            (d, 3.0 * d**-2.0 * (1.0 + 0.01 * rng.standard_normal()))
            for d in (50, 100, 200, 400, 800)
        ]
        fit = fit_loglog(points)
        assert fit.slope == pytest.approx(-2.0, abs=0.05)
        assert fit.stderr_slope >= 0.0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_loglog([(10, 1.0), (20, 0.5)])

    def test_nonpositive_values(self):
        with pytest.raises(ValueError):
            fit_loglog([(10, 1.0), (20, 0.0), (40, 0.1)])


class TestConfigValidation:
    def test_round_trip(self):
        cfg = ExperimentConfig.from_dict(base_config())
        clone = ExperimentConfig.from_dict(cfg.to_dict())
        assert clone.to_dict() == cfg.to_dict()

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            ExperimentConfig.from_dict(base_config(kind="mystery"))

    def test_empty_grid(self):
        with pytest.raises(ConfigError, match="grid"):
            ExperimentConfig.from_dict(base_config(grid=[]))

    def test_trials_floor(self):
        with pytest.raises(ConfigError, match="trials"):
            ExperimentConfig.from_dict(base_config(trials=1))

    def test_kernel_kind_mismatch(self):
        with pytest.raises(ConfigError, match="kernel.kind"):
            ExperimentConfig.from_dict(base_config(kernel={"kind": "hermite", "ell": 2}))

    def test_desk_scale_guard(self):
        cfg = base_config(grid=[{"n": 5000, "d": 100}, {"n": 10, "d": 10}, {"n": 11, "d": 11}])
        with pytest.raises(ConfigError, match="desk-scale"):
            ExperimentConfig.from_dict(cfg)
        cfg["allow_large"] = True
        ExperimentConfig.from_dict(cfg)  # override accepted

    def test_approx_needs_variant_and_q(self):
        cfg = base_config(
            kind="approx-decay",
            kernel={"kind": "exp"},
            grid=[{"n": 10, "d": 10}, {"n": 20, "d": 20}, {"n": 30, "d": 30}],
        )
        with pytest.raises(ConfigError, match="variant"):
            ExperimentConfig.from_dict(cfg)
        cfg["params"] = {"variant": "hermite-band"}
        with pytest.raises(ConfigError, match="q"):
            ExperimentConfig.from_dict(cfg)
        cfg["params"]["q"] = "1"
        ExperimentConfig.from_dict(cfg)

    def test_polar_variant_requires_isotropy(self):
        cfg = base_config(
            kind="approx-decay",
            kernel={"kind": "exp"},
            covariance={"kind": "power", "exponent": 0.5},
            params={"variant": "polar-sphere", "q": "1"},
            grid=[{"q": "1", "d": 10}, {"q": "1", "d": 20}, {"q": "1", "d": 30}],
        )
        with pytest.raises(ConfigError, match="isotropic"):
            ExperimentConfig.from_dict(cfg)

    def test_krr_requires_target_and_lambda(self):
        cfg = base_config(kind="krr-bias", kernel={"kind": "exp"})
        with pytest.raises(ConfigError, match="target"):
            ExperimentConfig.from_dict(cfg)

    def test_q_grid_derives_n_from_tau1(self):
        cfg = ExperimentConfig.from_dict(
            base_config(
                kind="approx-decay",
                kernel={"kind": "exp"},
                covariance={"kind": "power", "exponent": 0.5},
                params={"variant": "hermite-band"},
                grid=[{"q": "1", "d": 100}, {"q": "1", "d": 200}, {"q": "1", "d": 400}],
            )
        )
        point = cfg.resolve_point(0)
        tau1 = sum(i**-0.5 for i in range(1, 101))
        assert point.n == round(tau1)


class TestRun:
    def test_deterministic_records(self):
        cfg = ExperimentConfig.from_dict(base_config())
        a = run(cfg, workers=1)
        b = run(cfg, workers=1)
        assert [
            (r.n, r.d, r.trial, r.statistic, r.value) for r in a.records
        ] == [(r.n, r.d, r.trial, r.statistic, r.value) for r in b.records]

    def test_worker_count_invariance(self):
        cfg = ExperimentConfig.from_dict(base_config(trials=2))
        serial = run(cfg, workers=1)
        parallel = run(cfg, workers=2)
        assert [
            (r.n, r.d, r.trial, r.statistic, r.value) for r in serial.records
        ] == [(r.n, r.d, r.trial, r.statistic, r.value) for r in parallel.records]

    def test_summary_embeds_config_and_reruns_identically(self):
        cfg = ExperimentConfig.from_dict(base_config())
        first = run(cfg, workers=1)
        embedded = ExperimentConfig.from_dict(first.summary["config"])
        second = run(embedded, workers=1)
        assert [
            (r.n, r.d, r.trial, r.statistic, r.value) for r in first.records
        ] == [(r.n, r.d, r.trial, r.statistic, r.value) for r in second.records]

    def test_linear_profile_decay_is_exact_zero(self):
        cfg = ExperimentConfig.from_dict(
            base_config(
                kind="approx-decay",
                kernel={"kind": "poly", "coeffs": [0.0, 1.0], "max_order": 4},
                params={"variant": "hermite-band"},
                grid=[{"q": "1", "d": 20}, {"q": "1", "d": 30}, {"q": "1", "d": 40}],
            )
        )
        result = run(cfg, workers=1)
        for rec in result.records:
            assert rec.value <= 1e-10

    def test_trial_autocorrelation(self):
        trials = 64
        cfg = ExperimentConfig.from_dict(
            base_config(
                trials=trials,
                grid=[{"n": 15, "d": 15}],
                kernel={"kind": "gegenbauer", "ell": 1},
            )
        )
        result = run(cfg, workers=1)
        vals = np.array([r.value for r in result.records])
        assert vals.size == trials
        centered = vals - vals.mean()
        rho = float(
            np.sum(centered[:-1] * centered[1:]) / np.sum(centered**2)
        )
        assert abs(rho) <= 5.0 / math.sqrt(trials)

    def test_failures_recorded_not_dropped(self):
        # ridgeless linear kernel with n > d is singular: every unit at the
        # first point fails, the second point succeeds
        cfg = ExperimentConfig.from_dict(
            {
                "schema": 1,
                "kind": "krr-bias",
                "seed": 3,
                "trials": 2,
                "grid": [{"n": 12, "d": 4, "q": "1"}, {"n": 6, "d": 12, "q": "1"}],
                "kernel": {"kind": "poly", "coeffs": [0.0, 1.0], "max_order": 4},
                "params": {
                    "target": {"terms": [{"direction": "e1", "hermite": [0.0, 1.0]}]},
                    "lambda": 0.0,
                    "mv_samples": 2000,
                },
            }
        )
        result = run(cfg, workers=1)
        assert len(result.summary["failures"]) == 2
        assert all(f["point"] == 0 for f in result.summary["failures"])
        assert result.summary["points"][0]["trials"] == 0
        assert result.summary["points"][1]["trials"] == 2

    def test_bound_terms_summary_has_reports(self):
        cfg = ExperimentConfig.from_dict(
            base_config(
                kind="bound-terms",
                kernel={"kind": "hermite", "ell": 2},
                grid=[{"n": 15, "d": 30}],
                params={"z_samples": 200},
            )
        )
        result = run(cfg, workers=1)
        report = result.summary["reports"][0]
        assert report["n"] == 15 and report["trials"] == 3
        names = {r.statistic for r in result.records}
        assert {"diag_max", "corr_norm", "full_norm", "offdiag_norm"} <= names

    def test_decoupling_summary(self):
        cfg = ExperimentConfig.from_dict(
            base_config(
                kind="decoupling",
                kernel={"kind": "hermite", "ell": 2},
                grid=[{"n": 12, "d": 24}],
                trials=4,
            )
        )
        result = run(cfg, workers=1)
        res = result.summary["results"][0]
        assert res["trials"] == 4
        assert res["ratio"] > 0


class TestCsvRoundTrip:
    def test_records_round_trip(self, tmp_path):
        cfg = ExperimentConfig.from_dict(base_config(trials=2))
        result = run(cfg, workers=1)
        path = tmp_path / "records.csv"
        records_to_csv(result.records, path)
        back = read_records_csv(path)
        assert [(r.n, r.d, r.trial, r.statistic, r.value) for r in back] == [
            (r.n, r.d, r.trial, r.statistic, r.value) for r in result.records
        ]
        header = path.read_text().splitlines()[0]
        assert tuple(header.split(",")) == CSV_COLUMNS

    def test_summary_json(self, tmp_path):
        cfg = ExperimentConfig.from_dict(base_config(trials=2))
        result = run(cfg, workers=1)
        path = tmp_path / "summary.json"
        write_summary(result.summary, path)
        payload = json.loads(path.read_text())
        assert payload["schema"] == 1
        assert payload["config"]["seed"] == 5
