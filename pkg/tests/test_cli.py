"""End-to-end command behavior: files, exit codes, stderr format."""

import json

import numpy as np
import pytest

from embalign import (
    AlignmentConfig,
    GapSpec,
    align,
    generate,
    read_manifest,
    read_matrix,
    write_matrix,
)
from embalign.cli import main
from tests.conftest import unit_rows

SMALL_SPEC = [
    "--num-classes", "4", "--dim", "8", "--queries-per-class", "2",
    "--targets-per-class", "6",
]


def read_bytes(path) -> bytes:
    return path.read_bytes()


class TestSynthCommand:
    def test_idempotent_for_fixed_seed(self, tmp_path, capsys):
        for name in ("a", "b"):
            code = main(["synth", "--seed", "42", *SMALL_SPEC,
                         "--output-dir", str(tmp_path / name)])
            assert code == 0
        for nm in ("query.emb", "query.labels", "target.emb", "target.labels",
                   "manifest.txt"):
            assert read_bytes(tmp_path / "a" / nm) == read_bytes(tmp_path / "b" / nm)

    def test_label_file_line_counts(self, tmp_path):
        main(["synth", "--num-classes", "10", "--queries-per-class", "5",
              "--targets-per-class", "2", "--dim", "4",
              "--output-dir", str(tmp_path)])
        lines = (tmp_path / "query.labels").read_text().splitlines()
        assert len(lines) == 50

    def test_manifest_records_spec(self, tmp_path):
        main(["synth", "--seed", "9", *SMALL_SPEC, "--output-dir", str(tmp_path)])
        manifest = read_manifest(tmp_path / "manifest.txt")
        assert manifest["seed"] == "9"
        assert manifest["num_classes"] == "4"
        assert manifest["generator"].startswith("splitmix64")

    def test_invalid_spec_exits_2(self, tmp_path, capsys):
        code = main(["synth", "--num-classes", "1", "--output-dir", str(tmp_path)])
        assert code == 2
        assert capsys.readouterr().err.startswith("validation-error:")


class TestInspectCommand:
    def test_prints_shape(self, tmp_path, capsys, rng):
        path = tmp_path / "m.emb"
        write_matrix(rng.normal(size=(3, 5)).astype(np.float32), path)
        assert main(["inspect", str(path)]) == 0
        out = capsys.readouterr().out
        assert "rows=3" in out and "dim=5" in out

    def test_missing_file_exits_3(self, tmp_path, capsys):
        code = main(["inspect", str(tmp_path / "absent.emb")])
        assert code == 3
        err = capsys.readouterr().err
        assert err.startswith("io-error:")
        assert "absent.emb" in err


class TestFuseCommand:
    def _stacked_views(self, tmp_path, rng, objects=4, views=3, dim=6):
        path = tmp_path / "views.emb"
        write_matrix(rng.normal(size=(objects * views, dim)).astype(np.float32), path)
        return path

    def test_image_only_manifest_says_absent(self, tmp_path, rng):
        views = self._stacked_views(tmp_path, rng)
        out = tmp_path / "desc.emb"
        code = main(["fuse", "--views", str(views), "--views-per-object", "3",
                     "--output", str(out)])
        assert code == 0
        manifest = read_manifest(str(out) + ".manifest")
        assert manifest["text"] == "absent"
        assert manifest["views_per_object"] == "3"
        assert read_matrix(out).shape == (4, 6)

    def test_add_and_concat_output_dims(self, tmp_path, rng):
        views = self._stacked_views(tmp_path, rng)
        text = tmp_path / "text.emb"
        write_matrix(rng.normal(size=(4, 6)).astype(np.float32), text)
        for scheme, dim in (("add", 6), ("concat", 12)):
            out = tmp_path / f"{scheme}.emb"
            code = main(["fuse", "--views", str(views), "--views-per-object", "3",
                         "--text", str(text), "--fusion-scheme", scheme,
                         "--output", str(out)])
            assert code == 0
            assert read_matrix(out).shape == (4, dim)

    def test_deterministic_descriptor_bytes(self, tmp_path, rng):
        views = self._stacked_views(tmp_path, rng)
        outs = []
        for name in ("x.emb", "y.emb"):
            main(["fuse", "--views", str(views), "--views-per-object", "3",
                  "--output", str(tmp_path / name)])
            outs.append(read_bytes(tmp_path / name))
        assert outs[0] == outs[1]

    def test_lambda_flag_and_config_key(self, tmp_path, rng):
        views = self._stacked_views(tmp_path, rng, objects=2, views=2, dim=4)
        text = tmp_path / "text.emb"
        write_matrix(rng.normal(size=(2, 4)).astype(np.float32), text)
        cfg = tmp_path / "fuse.cfg"
        cfg.write_text("lambda=0.7\n")
        outs = {}
        for name, extra in (
            ("flag.emb", ["--lambda", "0.7"]),
            ("conf.emb", ["--config", str(cfg)]),
            ("default.emb", []),
        ):
            main(["fuse", "--views", str(views), "--views-per-object", "2",
                  "--text", str(text), *extra, "--output", str(tmp_path / name)])
            outs[name] = read_bytes(tmp_path / name)
        assert outs["flag.emb"] == outs["conf.emb"]
        assert outs["flag.emb"] != outs["default.emb"]

    def test_per_object_files_mode(self, tmp_path, rng):
        paths = []
        for i in range(3):
            p = tmp_path / f"obj{i}.emb"
            write_matrix(rng.normal(size=(2, 5)).astype(np.float32), p)
            paths.append(str(p))
        out = tmp_path / "desc.emb"
        code = main(["fuse", "--views", *paths, "--output", str(out)])
        assert code == 0
        assert read_matrix(out).shape == (3, 5)
        manifest = read_manifest(str(out) + ".manifest")
        assert manifest["object_order"] == "obj0,obj1,obj2"

    def test_indivisible_stack_exits_2(self, tmp_path, rng, capsys):
        views = self._stacked_views(tmp_path, rng, objects=2, views=3)
        code = main(["fuse", "--views", str(views), "--views-per-object", "4",
                     "--output", str(tmp_path / "desc.emb")])
        assert code == 2
        assert capsys.readouterr().err.startswith("validation-error:")

    def test_degenerate_descriptor_exits_4(self, tmp_path, capsys):
        # relu of an all-negative pooled view is the zero vector, which the
        # default post-normalization cannot rescale
        views = tmp_path / "views.emb"
        write_matrix(np.full((2, 4), -1.0, dtype=np.float32), views)
        code = main(["fuse", "--views", str(views), "--views-per-object", "2",
                     "--activation", "relu", "--output", str(tmp_path / "d.emb")])
        assert code == 4
        err = capsys.readouterr().err
        assert err.startswith("degeneracy-error:")
        assert "object000000" in err


class TestAlignCommand:
    def _instance(self, tmp_path):
        spec = GapSpec(seed=3, num_classes=3, dim=8, queries_per_class=2,
                       targets_per_class=5)
        queries, targets = generate(spec)
        qp, tp = tmp_path / "q.emb", tmp_path / "t.emb"
        write_matrix(queries.embeddings, qp)
        write_matrix(targets.embeddings, tp)
        return qp, tp, queries, targets

    def test_log_has_one_line_per_iteration(self, tmp_path):
        qp, tp, _, _ = self._instance(tmp_path)
        out = tmp_path / "aligned.emb"
        code = main(["align", "--query", str(qp), "--target", str(tp),
                     "--iterations", "25", "--output", str(out)])
        assert code == 0
        lines = (tmp_path / "aligned.emb.log.csv").read_text().strip().split("\n")
        assert lines[0] == "iter,eta,grad_norm,objective"
        assert len(lines) == 26
        etas = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(b <= a for a, b in zip(etas, etas[1:]))

    def test_single_iteration_matches_library(self, tmp_path):
        qp, tp, queries, targets = self._instance(tmp_path)
        out = tmp_path / "aligned.emb"
        code = main(["align", "--query", str(qp), "--target", str(tp),
                     "--iterations", "1", "--output", str(out)])
        assert code == 0
        expected = align(
            queries.embeddings, targets.embeddings, AlignmentConfig(iterations=1)
        ).astype(np.float32)
        assert np.array_equal(read_matrix(out), expected)

    def test_dim_mismatch_exits_2_with_both_dims(self, tmp_path, rng, capsys):
        qp, tp = tmp_path / "q.emb", tmp_path / "t.emb"
        write_matrix(unit_rows(rng, 2, 4).astype(np.float32), qp)
        write_matrix(unit_rows(rng, 3, 6).astype(np.float32), tp)
        code = main(["align", "--query", str(qp), "--target", str(tp),
                     "--output", str(tmp_path / "o.emb")])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("validation-error:")
        assert "4" in err and "6" in err

    def test_config_file_overridden_by_flags(self, tmp_path):
        qp, tp, _, _ = self._instance(tmp_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("iterations=5\nalpha=0.9\n")
        out = tmp_path / "aligned.emb"
        code = main(["align", "--config", str(cfg), "--iterations", "3",
                     "--query", str(qp), "--target", str(tp),
                     "--output", str(out)])
        assert code == 0
        lines = (tmp_path / "aligned.emb.log.csv").read_text().strip().split("\n")
        assert len(lines) == 4  # header + 3 iterations: flag wins over config


class TestEvalCommand:
    def test_perfect_toy_instance(self, tmp_path, rng, capsys):
        x = unit_rows(rng, 4, 6).astype(np.float32)
        for name, mat in (("q.emb", x[:2]), ("t.emb", x[:2])):
            write_matrix(mat, tmp_path / name)
        (tmp_path / "q.labels").write_text("a\nb\n")
        (tmp_path / "t.labels").write_text("a\nb\n")
        code = main(["eval", "--query", str(tmp_path / "q.emb"),
                     "--target", str(tmp_path / "t.emb"),
                     "--query-labels", str(tmp_path / "q.labels"),
                     "--target-labels", str(tmp_path / "t.labels"),
                     "--metrics-json", str(tmp_path / "m.json"),
                     "--pr-csv", str(tmp_path / "pr.csv")])
        assert code == 0
        assert "mAP 100.00 NDCG 100.00 ANMRR 0.00" in capsys.readouterr().out
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["map"] == 100.0
        pr = (tmp_path / "pr.csv").read_text().strip().split("\n")
        assert pr[0] == "recall,precision"
        assert len(pr) == 101

    def test_no_query_has_relevant_targets_exits_2(self, tmp_path, rng, capsys):
        write_matrix(unit_rows(rng, 2, 4).astype(np.float32), tmp_path / "q.emb")
        write_matrix(unit_rows(rng, 2, 4).astype(np.float32), tmp_path / "t.emb")
        (tmp_path / "q.labels").write_text("x\ny\n")
        (tmp_path / "t.labels").write_text("a\nb\n")
        code = main(["eval", "--query", str(tmp_path / "q.emb"),
                     "--target", str(tmp_path / "t.emb"),
                     "--query-labels", str(tmp_path / "q.labels"),
                     "--target-labels", str(tmp_path / "t.labels"),
                     "--metrics-json", str(tmp_path / "m.json"),
                     "--pr-csv", str(tmp_path / "pr.csv")])
        assert code == 2
        assert capsys.readouterr().err.startswith("validation-error:")

    def test_missing_label_file_exits_3(self, tmp_path, rng, capsys):
        write_matrix(unit_rows(rng, 2, 4).astype(np.float32), tmp_path / "q.emb")
        write_matrix(unit_rows(rng, 2, 4).astype(np.float32), tmp_path / "t.emb")
        (tmp_path / "t.labels").write_text("a\nb\n")
        code = main(["eval", "--query", str(tmp_path / "q.emb"),
                     "--target", str(tmp_path / "t.emb"),
                     "--query-labels", str(tmp_path / "missing.labels"),
                     "--target-labels", str(tmp_path / "t.labels"),
                     "--metrics-json", str(tmp_path / "m.json"),
                     "--pr-csv", str(tmp_path / "pr.csv")])
        assert code == 3
        err = capsys.readouterr().err
        assert err.startswith("io-error:")
        assert "missing.labels" in err


class TestPipelineCommand:
    CONFIG = (
        "seed=5\nnum_classes=6\ndim=16\nqueries_per_class=3\n"
        "targets_per_class=15\ncluster_spread=0.25\nshift_magnitude=0.6\n"
        "shift_mode=global\niterations=300\n"
    )

    def test_alignment_improves_synthetic_instance(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(self.CONFIG)
        code = main(["pipeline", "--config", str(cfg),
                     "--output-dir", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "before" in out and "after" in out and "mAP delta:" in out
        before = json.loads((tmp_path / "out" / "metrics_before.json").read_text())
        after = json.loads((tmp_path / "out" / "metrics_after.json").read_text())
        assert after["map"] > before["map"]
        for name in ("query.emb", "target.emb", "aligned.emb", "align_log.csv",
                     "pr_before.csv", "pr_after.csv", "manifest.txt"):
            assert (tmp_path / "out" / name).exists()

    def test_no_align_keeps_metrics_equal(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(self.CONFIG)
        code = main(["pipeline", "--config", str(cfg), "--no-align",
                     "--output-dir", str(tmp_path / "out")])
        assert code == 0
        before = (tmp_path / "out" / "metrics_before.json").read_text()
        after = (tmp_path / "out" / "metrics_after.json").read_text()
        assert before == after

    def test_fixed_point_config_is_identity(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            self.CONFIG.replace("iterations=300", "iterations=50")
            + "alpha=1.0\ntau_t=0.5\ntau_i=0.5\nupdate_rule=exact_kl\n"
        )
        code = main(["pipeline", "--config", str(cfg),
                     "--output-dir", str(tmp_path / "out")])
        assert code == 0
        before = json.loads((tmp_path / "out" / "metrics_before.json").read_text())
        after = json.loads((tmp_path / "out" / "metrics_after.json").read_text())
        assert after["map"] == pytest.approx(before["map"], abs=1e-6)
        assert after["anmrr"] == pytest.approx(before["anmrr"], abs=1e-6)

    def test_load_mode_requires_all_paths(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("query=somewhere.emb\n")
        code = main(["pipeline", "--config", str(cfg),
                     "--output-dir", str(tmp_path / "out")])
        assert code == 2
        assert "query_labels" in capsys.readouterr().err


class TestHelpDefaults:
    def test_align_help_lists_published_defaults(self, capsys):
        with pytest.raises(SystemExit):
            main(["align", "--help"])
        text = capsys.readouterr().out
        for token in ("0.6", "0.03", "10", "2000"):
            assert token in text

    def test_every_subcommand_has_help(self, capsys):
        for cmd in ("fuse", "align", "eval", "synth", "pipeline", "inspect"):
            with pytest.raises(SystemExit) as exc:
                main([cmd, "--help"])
            assert exc.value.code == 0
            assert capsys.readouterr().out
