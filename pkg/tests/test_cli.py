import json

import numpy as np
import pytest

from rarsel import ScenarioSpec, equicorrelated_block, sample_dataset, save_scenario
from rarsel.cli import main


@pytest.fixture(scope="module")
def csv_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    spec = ScenarioSpec(
        name="clitiny",
        block=equicorrelated_block(4, 0.5),
        sigma=1.0,
        beta_s=np.array([2.0, -1.5]),
        n=80,
        p=12,
    )
    ds = sample_dataset(spec, 99)
    header = ",".join([f"x{j}" for j in range(12)] + ["y"])

    def write(path, rows):
        lines = [header]
        for i in rows:
            lines.append(",".join(f"{v:.10g}" for v in ds.x[i]) + f",{ds.y[i]:.10g}")
        path.write_text("\n".join(lines) + "\n")

    train, test = root / "train.csv", root / "test.csv"
    write(train, range(60))
    write(test, range(60, 80))
    scenario = root / "scenario.toml"
    save_scenario(spec, scenario)
    return {"train": str(train), "test": str(test), "scenario": str(scenario)}


class TestFitCommand:
    def test_json_to_stdout(self, csv_files, capsys):
        rc = main(
            ["fit", "--data", csv_files["train"], "--response", "y",
             "--method", "lasso", "--n-lambda", "12"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["lambdas"]) == 12
        assert payload["nnz"][0] == 0

    def test_csv_export(self, csv_files, tmp_path, capsys):
        out = tmp_path / "path.csv"
        rc = main(
            ["fit", "--data", csv_files["train"], "--response", "y",
             "--method", "rar", "--permutations", "3", "--n-lambda", "10",
             "--emit", "csv", "--out", str(out)]
        )
        assert rc == 0
        assert out.exists()
        assert out.read_text().startswith("lambda_index,lambda,intercept")

    def test_penalty_file_custom_profile(self, csv_files, tmp_path, capsys):
        pf = tmp_path / "penalty.json"
        pf.write_text(json.dumps({"features": {"x0": 0, "x5": "inf"}, "default": 1.0}))
        rc = main(
            ["fit", "--data", csv_files["train"], "--response", "y",
             "--penalty-file", str(pf), "--n-lambda", "8"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        for coefs in payload["coefficients"]:
            assert "x5" not in coefs  # excluded can never enter
        assert "x0" in payload["coefficients"][0]  # unpenalized enters immediately

    def test_mrar_emits_purge_path(self, csv_files, capsys):
        rc = main(
            ["fit", "--data", csv_files["train"], "--response", "y",
             "--method", "mrar", "--permutations", "3", "--n-lambda", "10"]
        )
        assert rc == 0
        json.loads(capsys.readouterr().out)


class TestScreenCommand:
    def test_prints_threshold_and_retention(self, csv_files, capsys):
        rc = main(
            ["screen", "--data", csv_files["train"], "--response", "y",
             "--top", "5", "--permutations", "4", "--seed", "2"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "permutation threshold" in out
        assert "retention set" in out
        assert "x0" in out


class TestEvaluateCommand:
    def test_oracle_metric_on_scenario(self, csv_files, capsys):
        rc = main(
            ["evaluate", "--scenario-file", csv_files["scenario"], "--method", "rar",
             "--permutations", "3", "--metric", "oracle", "--seed", "4",
             "--n-lambda", "15"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["oracle_sign_success"] in (True, False)
        assert payload["model_size"] >= 0

    def test_cv_metric_on_csv(self, csv_files, capsys):
        rc = main(
            ["evaluate", "--data", csv_files["train"], "--response", "y",
             "--method", "lasso", "--metric", "cv", "--folds", "4",
             "--n-lambda", "12"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["selected_lambda"] > 0

    def test_mse_metric_requires_test(self, csv_files, capsys):
        rc = main(
            ["evaluate", "--data", csv_files["train"], "--response", "y",
             "--method", "lasso", "--metric", "mse", "--n-lambda", "10"]
        )
        assert rc == 2

    def test_mse_metric(self, csv_files, capsys):
        rc = main(
            ["evaluate", "--data", csv_files["train"], "--response", "y",
             "--method", "lasso", "--metric", "mse", "--test", csv_files["test"],
             "--n-lambda", "12"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["test_mse"] > 0


class TestDiagnoseCommand:
    def test_boundary_dependency_norm(self, capsys):
        rc = main(["diagnose", "--scenario", "2C", "--n", "100"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "1.000000" in out  # dependency norm exactly at the boundary

    def test_with_retained_and_threshold(self, capsys):
        rc = main(
            ["diagnose", "--scenario", "1A", "--n", "100",
             "--retained", "1,3", "--threshold", "0.5"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "restricted dependency norm" in out
        assert "strong signals R" in out


class TestSimulateCommand:
    def test_requires_profile_choice(self, tmp_path, capsys):
        assert main(["simulate", "--out", str(tmp_path)]) == 2

    def test_config_run_emits_tables_and_figures(self, csv_files, tmp_path, capsys):
        config = tmp_path / "exp.toml"
        config.write_text(
            f'scenarios = ["{csv_files["scenario"]}"]\n'
            "n = [60]\nreplications = 2\nroot_seed = 11\nparallelism = 1\n"
            "[solver]\nn_lambda = 12\n\n"
            '[[methods]]\nname = "lasso"\n\n'
            '[[methods]]\nname = "mrar"\npermutations = 3\n'
        )
        out = tmp_path / "results"
        rc = main(["simulate", "--config", str(config), "--out", str(out)])
        assert rc == 0
        names = {f.name for f in out.iterdir()}
        assert "events.jsonl" in names
        assert any(n.endswith(".csv") for n in names)
        assert any(n.endswith(".md") for n in names)
        assert any(n.endswith(".png") for n in names)
        printed = capsys.readouterr().out
        assert "| Lasso |" in printed


class TestRealdataCommand:
    def test_end_to_end(self, csv_files, tmp_path, capsys):
        out = tmp_path / "real"
        rc = main(
            ["realdata", "--train", csv_files["train"], "--test", csv_files["test"],
             "--response", "y", "--methods", "lasso,rar_3", "--repetitions", "2",
             "--seed", "3", "--out", str(out), "--n-lambda", "10"]
        )
        assert rc == 0
        assert (out / "realdata.csv").exists()
        assert (out / "realdata.json").exists()
        assert (out / "realdata.png").exists()
        payload = json.loads((out / "realdata.json").read_text())
        assert set(payload["stats"]) == {"Lasso", "RAR_3"}


class TestErrorHandling:
    def test_bad_response_column(self, csv_files, capsys):
        rc = main(
            ["screen", "--data", csv_files["train"], "--response", "nope"]
        )
        assert rc == 2
        assert "error:" in capsys.readouterr().err
