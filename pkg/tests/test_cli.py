import json
import subprocess
import sys

import numpy as np
import pytest

import treelasso as tl
import treelasso.io as tio


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "treelasso.cli", *[str(a) for a in args]],
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="module")
def toy_dataset(tmp_path_factory):
    """Planted root effect on the 7-node tree, n = 80."""
    base = tmp_path_factory.mktemp("toy")
    tree = tl.make_binary_tree(3)
    tree_path = base / "tree.csv"
    tio.write_tree_csv(tree, tree_path)
    beta = np.zeros(7)
    beta[0] = 1.0
    X, y = tl.generate_data(tree, beta, 80, sigma=1.0, seed=99)
    data_path = base / "data.csv"
    header = ",".join(list(tree.labels) + ["score"])
    rows = [
        ",".join(tio.fmt(v) for v in list(X[i]) + [y[i]]) for i in range(len(y))
    ]
    data_path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return tree_path, data_path


class TestGenTree:
    def test_binary_tree_file(self, tmp_path):
        out = tmp_path / "tree.csv"
        res = run_cli("gen-tree", "--levels", 3, "--out", out)
        assert res.returncode == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "parent,child,weight"
        assert len(lines) == 7  # 6 edges
        assert tio.read_tree_csv(out).p == 7

    def test_single_level_writes_empty_edge_list(self, tmp_path):
        out = tmp_path / "tree.csv"
        res = run_cli("gen-tree", "--levels", 1, "--out", out)
        assert res.returncode == 0
        assert out.read_text() == "parent,child,weight\n"

    def test_canonicalizes_existing_file(self, tmp_path):
        scrambled = tmp_path / "in.csv"
        scrambled.write_text(
            "parent,child,weight\nmid,leaf,1.0\nroot,mid,2.0\n"
        )
        out = tmp_path / "out.csv"
        res = run_cli("gen-tree", "--edges", scrambled, "--out", out)
        assert res.returncode == 0
        assert out.read_text() == (
            "parent,child,weight\nmid,leaf,1\nroot,mid,2\n"
        )

    def test_malformed_file_exits_2_with_line(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("parent,child,weight\na,b,oops\n")
        out = tmp_path / "out.csv"
        res = run_cli("gen-tree", "--edges", bad, "--out", out)
        assert res.returncode == 2
        assert "line 2" in res.stderr

    def test_levels_and_edges_mutually_exclusive(self, tmp_path):
        res = run_cli("gen-tree", "--out", tmp_path / "t.csv")
        assert res.returncode == 2

    def test_invalid_levels_exit_2(self, tmp_path):
        res = run_cli("gen-tree", "--levels", 0, "--out", tmp_path / "t.csv")
        assert res.returncode == 2


class TestFit:
    def test_planted_root_recovered(self, toy_dataset, tmp_path):
        tree_path, data_path = toy_dataset
        out = tmp_path / "fit"
        res = run_cli(
            "fit", "--data", data_path, "--tree", tree_path,
            "--response", "score", "--penalty", "r1", "--sigma", "1.0",
            "--no-standardize", "--out", out,
        )
        assert res.returncode == 0, res.stderr
        effects = (out / "effects.csv").read_text().splitlines()
        root_row = effects[1].split(",")
        assert root_row[0] == "X1"
        assert root_row[5] == "1"  # gamma_active
        fit_doc = json.loads((out / "fit.json").read_text())
        assert fit_doc["converged"] is True
        assert fit_doc["penalty"] == "r1"
        assert (out / "cp_table.csv").exists()
        assert (out / "effects_total.dot").exists()
        assert (out / "manifest.json").exists()

    def test_sigma_passthrough(self, toy_dataset, tmp_path):
        tree_path, data_path = toy_dataset
        out = tmp_path / "fit"
        res = run_cli(
            "fit", "--data", data_path, "--tree", tree_path,
            "--response", "score", "--penalty", "lasso", "--sigma", "1.0",
            "--out", out,
        )
        assert res.returncode == 0, res.stderr
        assert json.loads((out / "fit.json").read_text())["sigma2"] == 1.0

    def test_absent_response_exits_2(self, toy_dataset, tmp_path):
        tree_path, data_path = toy_dataset
        res = run_cli(
            "fit", "--data", data_path, "--tree", tree_path,
            "--response", "nope", "--out", tmp_path / "x",
        )
        assert res.returncode == 2
        assert "nope" in res.stderr

    def test_compositional_flag(self, toy_dataset, tmp_path):
        tree_path, data_path = toy_dataset
        out = tmp_path / "fit"
        res = run_cli(
            "fit", "--data", data_path, "--tree", tree_path,
            "--response", "score", "--penalty", "r1", "--sigma", "1.0",
            "--compositional", "--out", out,
        )
        assert res.returncode == 0, res.stderr


class TestSimulate:
    def write_config(self, path, **kw):
        doc = {
            "scenarios": ["p7-a"],
            "methods": ["lasso"],
            "reps": 2,
            "seed": 11,
            "n": 50,
            "sigma": 1.0,
        }
        doc.update(kw)
        path.write_text(json.dumps(doc))

    def test_smoke_and_rows(self, tmp_path):
        cfg = tmp_path / "config.json"
        self.write_config(cfg, scenarios=["p7-a", "p7-d"], methods=["R1", "lasso"])
        out = tmp_path / "study"
        res = run_cli("simulate", "--config", cfg, "--out", out)
        assert res.returncode == 0, res.stderr
        lines = (out / "report.csv").read_text().splitlines()
        assert len(lines) == 1 + 4  # header + scenarios x methods

    def test_rerun_byte_identical(self, tmp_path):
        cfg = tmp_path / "config.json"
        self.write_config(cfg)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert run_cli("simulate", "--config", cfg, "--out", out1).returncode == 0
        assert run_cli("simulate", "--config", cfg, "--out", out2).returncode == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_unknown_scenario_exits_2(self, tmp_path):
        cfg = tmp_path / "config.json"
        self.write_config(cfg, scenarios=["p9-q"])
        res = run_cli("simulate", "--config", cfg, "--out", tmp_path / "s")
        assert res.returncode == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "config.json"
        self.write_config(cfg)
        doc = json.loads(cfg.read_text())
        doc["repz"] = 5
        cfg.write_text(json.dumps(doc))
        res = run_cli("simulate", "--config", cfg, "--out", tmp_path / "s")
        assert res.returncode == 2


class TestDiagnoseAndExport:
    def test_diagnose_on_fitted_model(self, toy_dataset, tmp_path):
        tree_path, data_path = toy_dataset
        fit_dir = tmp_path / "fit"
        assert run_cli(
            "fit", "--data", data_path, "--tree", tree_path,
            "--response", "score", "--penalty", "r1", "--sigma", "1.0",
            "--no-standardize", "--out", fit_dir,
        ).returncode == 0
        out = tmp_path / "diag.json"
        res = run_cli(
            "diagnose", "--fit", fit_dir / "fit.json", "--data", data_path,
            "--tree", tree_path, "--response", "score", "--no-standardize",
            "--out", out,
        )
        assert res.returncode == 0, res.stderr
        doc = json.loads(out.read_text())
        assert 0.0 <= doc["value"]
        assert "plug-in" in doc["note"]

    def test_export_dot_from_report(self, toy_dataset, tmp_path):
        tree_path, data_path = toy_dataset
        fit_dir = tmp_path / "fit"
        assert run_cli(
            "fit", "--data", data_path, "--tree", tree_path,
            "--response", "score", "--penalty", "r1", "--sigma", "1.0",
            "--no-standardize", "--out", fit_dir,
        ).returncode == 0
        out = tmp_path / "tree.dot"
        res = run_cli(
            "export-dot", "--tree", tree_path, "--report", fit_dir / "effects.csv",
            "--mode", "total", "--outcome", "score", "--out", out,
        )
        assert res.returncode == 0, res.stderr
        text = out.read_text()
        assert text.startswith("digraph total_effects {")
        assert '"score"' in text
