import json

import numpy as np
import pytest

from knlb.cli import main
from knlb.dataio import load_data_matrix, read_coeff_table
from knlb.experiments import read_records_csv


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def scaling_config():
    return {
        "schema": 1,
        "kind": "gegenbauer-scaling",
        "seed": 11,
        "trials": 2,
        "grid": [{"n": 15, "d": 15}, {"n": 25, "d": 25}, {"n": 35, "d": 35}],
        "kernel": {"kind": "gegenbauer", "ell": 2},
        "tolerances": {"op_norm": 1e-3},
    }


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        code = main(["scaling", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)])
        assert code == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code = main(["scaling", "--config", str(path), "--out", str(tmp_path)])
        assert code == 2

    def test_unknown_kind_field_named(self, tmp_path, capsys):
        cfg = scaling_config()
        cfg["kind"] = "nope"
        code = main(["scaling", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path)])
        assert code == 2
        assert "kind" in capsys.readouterr().err

    def test_subcommand_kind_mismatch(self, tmp_path):
        code = main(
            ["approx", "--config", write_config(tmp_path, scaling_config()), "--out", str(tmp_path)]
        )
        assert code == 2

    def test_bad_tol_override(self, tmp_path):
        code = main(
            [
                "scaling",
                "--config",
                write_config(tmp_path, scaling_config()),
                "--out",
                str(tmp_path),
                "--tol",
                "op_norm",
            ]
        )
        assert code == 2


class TestScalingRun:
    def test_writes_records_summary_and_figure(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "scaling",
                "--config",
                write_config(tmp_path, scaling_config()),
                "--out",
                str(out),
                "--workers",
                "1",
            ]
        )
        assert code == 0
        records = read_records_csv(out / "records.csv")
        assert len(records) == 6
        summary = json.loads((out / "summary.json").read_text())
        assert summary["schema"] == 1
        assert summary["slope_fit"] is not None
        assert (out / "gegenbauer-scaling.png").exists()

    def test_no_figures_flag(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "scaling",
                "--config",
                write_config(tmp_path, scaling_config()),
                "--out",
                str(out),
                "--workers",
                "1",
                "--no-figures",
            ]
        )
        assert code == 0
        assert not (out / "gegenbauer-scaling.png").exists()

    def test_seed_flag_determinism(self, tmp_path):
        cfg_path = write_config(tmp_path, scaling_config())
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert (
                main(
                    [
                        "scaling",
                        "--config",
                        cfg_path,
                        "--out",
                        str(out),
                        "--seed",
                        "77",
                        "--workers",
                        "1",
                        "--no-figures",
                    ]
                )
                == 0
            )
            outs.append(out)
        rec_a = read_records_csv(outs[0] / "records.csv")
        rec_b = read_records_csv(outs[1] / "records.csv")
        assert [(r.n, r.d, r.trial, r.statistic, r.value) for r in rec_a] == [
            (r.n, r.d, r.trial, r.statistic, r.value) for r in rec_b
        ]
        assert (outs[0] / "summary.json").read_text() == (
            outs[1] / "summary.json"
        ).read_text()

    def test_seed_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KNLB_SEED", "123")
        cfg = scaling_config()
        del cfg["seed"]
        out = tmp_path / "envout"
        code = main(
            [
                "scaling",
                "--config",
                write_config(tmp_path, cfg),
                "--out",
                str(out),
                "--workers",
                "1",
                "--no-figures",
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["seed"] == 123


class TestCheckIdentities:
    def test_quick_suite_passes(self, capsys):
        assert main(["check-identities", "--quick"]) == 0
        out = capsys.readouterr().out
        assert "pass" in out
        assert "9/9 checks passed" in out


class TestExport:
    def test_coeff_table_export(self, tmp_path):
        out = tmp_path / "table.json"
        code = main(
            [
                "export",
                "coeffs",
                "--kind",
                "monomial-hermite",
                "--degree",
                "4",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        table = read_coeff_table(out)
        assert table.kind == "monomial-to-hermite"

    def test_gegenbauer_projection_needs_dim(self, tmp_path):
        code = main(
            [
                "export",
                "coeffs",
                "--kind",
                "gegenbauer-projection",
                "--degree",
                "2",
                "--out",
                str(tmp_path / "t.json"),
            ]
        )
        assert code == 2

    def test_sample_export_round_trip(self, tmp_path):
        out = tmp_path / "batch.knlb"
        code = main(
            [
                "export",
                "sample",
                "--dist",
                "sphere",
                "--n",
                "12",
                "--d",
                "6",
                "--seed",
                "9",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        values, info = load_data_matrix(out)
        assert values.shape == (12, 6)
        assert info["distribution"] == "sphere"
        assert info["seed"] == 9
        assert np.allclose(np.linalg.norm(values, axis=1), np.sqrt(6.0))

    def test_matrix_export_round_trip(self, tmp_path):
        from knlb.dataio import load_sym_matrix

        out = tmp_path / "delta.knlb"
        code = main(
            [
                "export",
                "matrix",
                "--kind",
                "hermite-delta",
                "--n",
                "10",
                "--d",
                "20",
                "--ell",
                "2",
                "--seed",
                "4",
                "--out",
                str(out),
                "--csv",
            ]
        )
        assert code == 0
        mat = load_sym_matrix(out)
        assert mat.tag == "Delta"
        assert mat.n == 10
        assert np.all(np.diag(mat.values) == 0.0)
        csv_values = np.loadtxt(str(out) + ".csv", delimiter=",")
        assert np.allclose(csv_values, mat.values)


class TestOtherSubcommands:
    def test_bounds_run_with_figure(self, tmp_path):
        cfg = {
            "schema": 1,
            "kind": "bound-terms",
            "seed": 2,
            "trials": 2,
            "grid": [{"n": 10, "d": 20}],
            "kernel": {"kind": "hermite", "ell": 2},
            "params": {"z_samples": 100},
        }
        out = tmp_path / "out"
        code = main(
            ["bounds", "--config", write_config(tmp_path, cfg), "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["reports"][0]["trials"] == 2
        assert (out / "bound-terms.png").exists()

    def test_decouple_run_with_figure(self, tmp_path):
        cfg = {
            "schema": 1,
            "kind": "decoupling",
            "seed": 3,
            "trials": 3,
            "grid": [{"n": 10, "d": 20}],
            "kernel": {"kind": "hermite", "ell": 2},
        }
        out = tmp_path / "out"
        code = main(
            ["decouple", "--config", write_config(tmp_path, cfg), "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["results"][0]["ratio"] > 0
        assert (out / "decoupling.png").exists()

    def test_krr_bias_run_with_figure(self, tmp_path):
        cfg = {
            "schema": 1,
            "kind": "krr-bias",
            "seed": 4,
            "trials": 2,
            "grid": [{"n": 20, "d": 10, "q": "1"}],
            "kernel": {"kind": "exp"},
            "params": {
                "target": {"terms": [{"direction": "e1", "hermite": [0.0, 1.0]}]},
                "lambda": 0.01,
                "mv_samples": 2000,
            },
        }
        out = tmp_path / "out"
        code = main(
            ["krr-bias", "--config", write_config(tmp_path, cfg), "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        point = summary["points"][0]
        assert point["target_norm_sq"] == pytest.approx(1.0)
        assert point["tail_degree"] == 1
        assert (out / "krr-bias.png").exists()

    def test_failed_units_exit_one(self, tmp_path):
        cfg = {
            "schema": 1,
            "kind": "krr-bias",
            "seed": 5,
            "trials": 2,
            "grid": [{"n": 12, "d": 4, "q": "1"}],
            "kernel": {"kind": "poly", "coeffs": [0.0, 1.0], "max_order": 4},
            "params": {
                "target": {"terms": [{"direction": "e1", "hermite": [0.0, 1.0]}]},
                "lambda": 0.0,
                "mv_samples": 2000,
            },
        }
        out = tmp_path / "out"
        code = main(
            [
                "krr-bias",
                "--config",
                write_config(tmp_path, cfg),
                "--out",
                str(out),
                "--no-figures",
            ]
        )
        assert code == 1
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["failures"]) == 2
