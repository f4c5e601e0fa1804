import json

import numpy as np
import pytest

import treelasso as tl
import treelasso.io as tio
from treelasso.errors import LabelMismatch, MissingValues, TreeFileError


@pytest.fixture
def weighted_tree():
    return tl.build_tree(
        ["root", "mid", "leaf-a", "leaf-b"],
        [("root", "mid", 0.123456789012345678), ("mid", "leaf-a", -1.5),
         ("root", "leaf-b", 2.0)],
    )


def label_edges(tree):
    return {
        (tree.labels[e.parent], tree.labels[e.child], e.weight) for e in tree.edges
    }


class TestTreeFiles:
    def test_csv_round_trip_byte_identical(self, weighted_tree, tmp_path):
        p1 = tmp_path / "t1.csv"
        p2 = tmp_path / "t2.csv"
        tio.write_tree_csv(weighted_tree, p1)
        again = tio.read_tree_csv(p1)
        tio.write_tree_csv(again, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert set(again.labels) == set(weighted_tree.labels)
        assert label_edges(again) == label_edges(weighted_tree)

    def test_csv_canonicalizes_arbitrary_listing(self, tmp_path):
        # scrambled input reaches the canonical fixed point after one pass
        raw = tmp_path / "raw.csv"
        raw.write_text(
            "parent,child,weight\nmid,leaf,1\nroot,other,3\nroot,mid,2\n"
        )
        s1 = tio.tree_to_csv(tio.read_tree_csv(raw))
        canon = tmp_path / "canon.csv"
        canon.write_text(s1)
        assert tio.tree_to_csv(tio.read_tree_csv(canon)) == s1

    def test_json_round_trip(self, weighted_tree, tmp_path):
        path = tmp_path / "t.json"
        tio.write_tree_json(weighted_tree, path)
        again = tio.read_tree_json(path)
        assert again.labels == weighted_tree.labels
        assert again.edges == weighted_tree.edges

    def test_json_represents_single_node_tree(self, tmp_path):
        t = tl.build_tree(["solo"], [])
        path = tmp_path / "solo.json"
        tio.write_tree_json(t, path)
        again = tio.read_tree_json(path)
        assert again.labels == ("solo",)
        assert again.edges == ()

    def test_weights_survive_exactly(self, weighted_tree, tmp_path):
        path = tmp_path / "t.csv"
        tio.write_tree_csv(weighted_tree, path)
        again = tio.read_tree_csv(path)
        for e1, e2 in zip(weighted_tree.edges, again.edges):
            assert e1.weight == e2.weight  # bit-exact via 17 significant digits

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("parent,child,weight\na,b,1.0\na,c,not-a-number\n")
        with pytest.raises(TreeFileError) as err:
            tio.read_tree_csv(path)
        assert "line 3" in str(err.value)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("from,to,w\na,b,1.0\n")
        with pytest.raises(TreeFileError) as err:
            tio.read_tree_csv(path)
        assert "line 1" in str(err.value)

    def test_read_dispatches_on_extension(self, weighted_tree, tmp_path):
        pc = tmp_path / "t.csv"
        pj = tmp_path / "t.json"
        tio.write_tree_csv(weighted_tree, pc)
        tio.write_tree_json(weighted_tree, pj)
        assert label_edges(tio.read_tree(pc)) == label_edges(tio.read_tree(pj))


class TestFloatFormatting:
    def test_seventeen_digits_round_trip(self):
        rng = np.random.default_rng(0)
        for x in rng.standard_normal(200) * 10.0 ** rng.integers(-8, 8, 200):
            assert float(tio.fmt(x)) == x


class TestDataset:
    def test_load_and_order_columns(self, tmp_path):
        t = tl.build_tree(["b", "a"], [("b", "a", 1.0)])
        path = tmp_path / "d.csv"
        path.write_text("a,y,b\n1.0,5.0,2.0\n3.0,6.0,4.0\n")
        X, y = tio.load_dataset(path, "y", t)
        np.testing.assert_array_equal(X, [[2.0, 1.0], [4.0, 3.0]])  # tree order b, a
        np.testing.assert_array_equal(y, [5.0, 6.0])

    def test_missing_response(self, tmp_path):
        t = tl.build_tree(["a"], [])
        path = tmp_path / "d.csv"
        path.write_text("a\n1.0\n")
        with pytest.raises(LabelMismatch):
            tio.load_dataset(path, "y", t)

    def test_missing_predictor_column(self, tmp_path):
        t = tl.build_tree(["a", "zz"], [("a", "zz", 1.0)])
        path = tmp_path / "d.csv"
        path.write_text("a,y\n1.0,2.0\n")
        with pytest.raises(LabelMismatch) as err:
            tio.load_dataset(path, "y", t)
        assert "zz" in str(err.value)

    def test_missing_values(self, tmp_path):
        t = tl.build_tree(["a"], [])
        path = tmp_path / "d.csv"
        path.write_text("a,y\n1.0,\n")
        with pytest.raises(MissingValues):
            tio.load_dataset(path, "y", t)


class TestEffectReportCsv:
    def test_round_trip(self, tmp_path):
        t = tl.make_binary_tree(3)
        rep = tl.effect_report(t, np.array([1.0, -0.5, 0.0, -0.5, 0.0, 0.0, 0.25]))
        path = tmp_path / "effects.csv"
        tio.write_effect_report_csv(rep, path)
        again = tio.read_effect_report_csv(path, t)
        assert again.rows == rep.rows


class TestDotExport:
    def tree_and_report(self, beta):
        t = tl.make_binary_tree(3)
        return t, tl.effect_report(t, np.asarray(beta, dtype=float))

    def test_zero_effects_only_structural_edges(self):
        t, rep = self.tree_and_report(np.zeros(7))
        dot = tio.export_dot(t, rep, "total")
        assert dot.count("->") == len(t.edges)
        assert "outcome" in dot  # node declared even with no effect edges

    def test_single_positive_effect_max_width_red(self):
        beta = np.zeros(7)
        beta[0] = 1.0
        t, rep = self.tree_and_report(beta)
        dot = tio.export_dot(t, rep, "total")
        assert '"X1" -> "outcome" [color=red, penwidth=5.000]' in dot

    def test_colors_match_signs(self):
        t, rep = self.tree_and_report([0.0, 1.0, -0.25, -0.5, -0.5, 0.0, 0.0])
        dot = tio.export_dot(t, rep, "direct")
        for row in rep.rows:
            if not row.beta_active:
                continue
            color = "red" if row.beta > 0 else "blue"
            matching = [
                ln for ln in dot.splitlines()
                if ln.strip().startswith(f'"{row.label}" -> "outcome"')
            ]
            assert len(matching) == 1
            assert f"color={color}" in matching[0]

    def test_widths_proportional_with_floor(self):
        t, rep = self.tree_and_report([1.0, 0.001, 0, 0, 0, 0, -0.5])
        dot = tio.export_dot(t, rep, "direct")
        assert "penwidth=5.000" in dot   # largest effect
        assert "penwidth=2.500" in dot   # half the largest
        assert "penwidth=0.500" in dot   # floored tiny effect

    def test_deterministic(self):
        t, rep = self.tree_and_report([0.5, 0, 0, -0.1, 0, 0.2, 0])
        assert tio.export_dot(t, rep, "total") == tio.export_dot(t, rep, "total")

    def test_mode_validation(self):
        t, rep = self.tree_and_report(np.zeros(7))
        with pytest.raises(ValueError):
            tio.export_dot(t, rep, "sideways")


class TestStudyCsv:
    def test_columns_and_na(self, tmp_path):
        cfg = tl.ReplicationConfig(n=50, reps=1, seed=1, methods=("lasso",))
        report = tl.run_study(cfg, ["p7-a"])
        path = tmp_path / "report.csv"
        tio.write_study_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == (
            "model,method,beta_sensitivity,beta_specificity,beta_mse,"
            "gamma_sensitivity,gamma_specificity,gamma_mse,replications,failures"
        )
        assert lines[1].startswith("p7-a,lasso,")


class TestManifest:
    def test_digests_inputs_and_outputs(self, tmp_path):
        f1 = tmp_path / "in.txt"
        f1.write_text("hello")
        f2 = tmp_path / "out.txt"
        f2.write_text("world")
        man = tio.build_manifest("fit", seed=3, inputs=[f1], outputs=[f2])
        assert man.inputs[str(f1)] == tio.file_digest(f1)
        assert man.outputs[str(f2)] == tio.file_digest(f2)
        path = tmp_path / "manifest.json"
        tio.write_manifest(man, path)
        doc = json.loads(path.read_text())
        assert doc["command"] == "fit"
        assert doc["tool_version"] == tl.__version__
