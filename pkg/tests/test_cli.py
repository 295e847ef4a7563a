"""End-to-end command-line runs against the synthetic demo bundle."""

import json

import numpy as np
import pytest

from sailor.cli import main

FAST_SETS = ["--set", "max_epochs=8", "--set", "patience=8",
             "--set", "hidden_gnn=8", "--set", "hidden_aug=8",
             "--set", "batch=64"]


def run(argv):
    return main(argv)


@pytest.fixture(scope="session")
def bundle(demo_bundle_dir):
    return str(demo_bundle_dir)


@pytest.fixture(scope="session")
def train_dir(tmp_path_factory, bundle):
    out = tmp_path_factory.mktemp("cli") / "run"
    code = main(["train", "--bundle", bundle, "--out", str(out),
                 "--seed", "3", *FAST_SETS])
    assert code == 0
    return out


class TestDemoBundle:
    def test_writes_all_files(self, tmp_path):
        out = tmp_path / "demo"
        assert run(["demo-bundle", "--out", str(out), "--nodes", "80",
                    "--classes", "3", "--seed", "1"]) == 0
        for name in ("edges.tsv", "features.tsv", "labels.tsv", "meta.tsv",
                     "masks.tsv"):
            assert (out / name).exists(), name


class TestAnalyze:
    def test_artifacts_and_stats(self, tmp_path, bundle, capsys):
        out = tmp_path / "analysis"
        assert run(["analyze", "--bundle", bundle, "--out", str(out)]) == 0
        expected = {"manifest.json", "summary.tsv", "degree_histogram.tsv",
                    "heterophily.tsv", "homophily_cdf_all.tsv",
                    "homophily_cdf_head.tsv", "homophily_cdf_tail.tsv",
                    "degree_histogram.png", "homophily_cdf.png"}
        assert expected <= {p.name for p in out.iterdir()}
        # figures are non-empty PNGs
        for name in ("degree_histogram.png", "homophily_cdf.png"):
            blob = (out / name).read_bytes()
            assert blob[:8] == b"\x89PNG\r\n\x1a\n"
        stdout = capsys.readouterr().out
        assert "nodes=120" in stdout
        assert "degree_threshold=" in stdout

    def test_summary_row_matches_graph(self, tmp_path, bundle, demo_graph):
        out = tmp_path / "analysis"
        run(["analyze", "--bundle", bundle, "--out", str(out)])
        header, row = (out / "summary.tsv").read_text().splitlines()
        vals = dict(zip(header.split("\t"), row.split("\t")))
        assert int(vals["n_nodes"]) == demo_graph.n_nodes
        assert int(vals["n_edges"]) == demo_graph.n_edges
        assert int(vals["n_classes"]) == demo_graph.n_classes

    def test_perfectly_homophilous_toy(self, tmp_path):
        import sys
        sys.path.insert(0, str(__file__ and __import__("pathlib").Path(__file__).parent))
        from helpers import graph_from_edges
        from sailor.bundles import write_bundle
        g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)],
                             [0, 0, 0, 0], n_classes=1)
        b = write_bundle(g, tmp_path / "toy")
        out = tmp_path / "toyrep"
        assert run(["analyze", "--bundle", str(b), "--out", str(out)]) == 0
        rows = (out / "heterophily.tsv").read_text().splitlines()[1:]
        for line in rows:
            assert line.split("\t")[2] == "0"


class TestTrain:
    def test_artifacts(self, train_dir):
        for name in ("manifest.json", "epochs.jsonl", "checkpoint.bin",
                     "checkpoint.bin.json", "metrics.json", "added_edges.tsv",
                     "training_curves.png"):
            assert (train_dir / name).exists(), name

    def test_manifest_written_first_and_complete(self, train_dir):
        manifest = json.loads((train_dir / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seeds"] == [3]
        assert manifest["config"]["max_epochs"] == 8
        assert "tool_version" in manifest

    def test_metrics_contents(self, train_dir):
        metrics = json.loads((train_dir / "metrics.json").read_text())
        assert 0.0 <= metrics["test_accuracy"] <= 1.0
        assert metrics["epochs_run"] == 8
        assert metrics["best_epoch"] >= 1

    def test_epoch_log_lines(self, train_dir):
        lines = (train_dir / "epochs.jsonl").read_text().splitlines()
        assert len(lines) == 8
        first = json.loads(lines[0])
        assert first["epoch"] == 1
        assert first["added_edge_count"] >= 0

    def test_manifest_survives_bad_bundle(self, tmp_path):
        out = tmp_path / "broken"
        code = run(["train", "--bundle", str(tmp_path / "missing"),
                    "--out", str(out), *FAST_SETS])
        assert code == 1
        assert (out / "manifest.json").exists()

    def test_metrics_byte_identical_across_runs(self, tmp_path, bundle,
                                                train_dir):
        out = tmp_path / "again"
        assert run(["train", "--bundle", bundle, "--out", str(out),
                    "--seed", "3", *FAST_SETS]) == 0
        assert (out / "metrics.json").read_bytes() == \
               (train_dir / "metrics.json").read_bytes()

    def test_ablation_zeroes_logged_loss(self, tmp_path, bundle):
        out = tmp_path / "abl"
        assert run(["train", "--bundle", bundle, "--out", str(out),
                    "--seed", "3", "--ablation", "no-aug-loss",
                    *FAST_SETS, "--set", "max_epochs=2", "--set",
                    "patience=2"]) == 0
        for line in (out / "epochs.jsonl").read_text().splitlines():
            assert json.loads(line)["l_aug"] == 0.0

    def test_multi_seed_summary(self, tmp_path, bundle):
        out = tmp_path / "multi"
        assert run(["train", "--bundle", bundle, "--out", str(out),
                    "--seeds", "1", "2", *FAST_SETS,
                    "--set", "max_epochs=3", "--set", "patience=3"]) == 0
        assert (out / "seed_1" / "metrics.json").exists()
        assert (out / "seed_2" / "metrics.json").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_seeds"] == 2
        accs = [summary["per_seed"][s]["test_accuracy"] for s in ("1", "2")]
        assert summary["mean_test_accuracy"] == pytest.approx(np.mean(accs))

    def test_unknown_config_key_fails(self, tmp_path, bundle):
        out = tmp_path / "bad"
        assert run(["train", "--bundle", bundle, "--out", str(out),
                    "--set", "max_epohcs=5"]) == 1

    def test_divergence_exit_code(self, tmp_path, bundle):
        out = tmp_path / "div"
        with np.errstate(divide="ignore"):
            code = run(["train", "--bundle", bundle, "--out", str(out),
                        "--seed", "3", *FAST_SETS, "--set", "lr_a=1e12",
                        "--set", "max_epochs=6", "--set", "patience=6"])
        assert code == 2

    def test_unsatisfiable_drop_fraction_is_a_clean_error(self, tmp_path,
                                                          bundle, capsys):
        # the demo graph cannot forge at 0.8 without isolating a head node;
        # the CLI should report that, not dump a traceback
        out = tmp_path / "forge"
        code = run(["train", "--bundle", bundle, "--out", str(out),
                    "--seed", "3", *FAST_SETS, "--set", "delta_drop=0.8"])
        assert code == 1
        assert "forge quotas" in capsys.readouterr().err

    def test_public_split(self, tmp_path, bundle):
        out = tmp_path / "public"
        assert run(["train", "--bundle", bundle, "--out", str(out),
                    "--seed", "3", "--split", "public", *FAST_SETS,
                    "--set", "max_epochs=3", "--set", "patience=3"]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert "tail_accuracy" in metrics

    def test_config_file_plus_override(self, tmp_path, bundle):
        conf = tmp_path / "run.conf"
        conf.write_text("max_epochs=3\npatience=3\nhidden_gnn=8\n"
                        "hidden_aug=8\nbatch=64\nseed=5\n")
        out = tmp_path / "cfg"
        assert run(["train", "--bundle", bundle, "--out", str(out),
                    "--config", str(conf), "--set", "seed=6"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 6
        assert manifest["config"]["max_epochs"] == 3


class TestEval:
    def test_matches_training_metrics(self, tmp_path, bundle, train_dir,
                                      capsys):
        out = tmp_path / "eval"
        assert run(["eval", "--bundle", bundle, "--checkpoint",
                    str(train_dir / "checkpoint.bin"), "--out", str(out)]) == 0
        train_metrics = json.loads((train_dir / "metrics.json").read_text())
        eval_metrics = json.loads((out / "metrics.json").read_text())
        for key in ("test_accuracy", "test_weighted_f1", "n_test",
                    "added_edges"):
            assert eval_metrics[key] == train_metrics[key]
        assert "test_accuracy" in capsys.readouterr().out

    def test_predictions_cover_every_node(self, tmp_path, bundle, train_dir,
                                          demo_graph):
        out = tmp_path / "eval2"
        run(["eval", "--bundle", bundle, "--checkpoint",
             str(train_dir / "checkpoint.bin"), "--out", str(out)])
        lines = (out / "predictions.tsv").read_text().splitlines()
        assert len(lines) == demo_graph.n_nodes + 1
        header = lines[0].split("\t")
        assert header[:2] == ["node", "predicted"]
        assert len(header) == 2 + demo_graph.n_classes

    def test_wrong_graph_rejected(self, tmp_path, train_dir):
        other = tmp_path / "other"
        run(["demo-bundle", "--out", str(other), "--nodes", "60",
             "--classes", "3", "--seed", "9"])
        out = tmp_path / "eval3"
        assert run(["eval", "--bundle", str(other), "--checkpoint",
                    str(train_dir / "checkpoint.bin"),
                    "--out", str(out)]) == 1

    def test_corrupt_checkpoint_rejected(self, tmp_path, bundle):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"garbage" * 10)
        out = tmp_path / "eval4"
        assert run(["eval", "--bundle", bundle, "--checkpoint", str(bad),
                    "--out", str(out)]) == 1


class TestAugmentReport:
    def test_artifacts_and_counts(self, tmp_path, bundle, train_dir, capsys):
        out = tmp_path / "augrep"
        assert run(["augment-report", "--bundle", bundle, "--checkpoint",
                    str(train_dir / "checkpoint.bin"), "--out", str(out)]) == 0
        for name in ("manifest.json", "homophily_cdf_compare.tsv",
                     "total_heterophily_compare.tsv", "added_edges.tsv",
                     "homophily_cdf_compare.png"):
            assert (out / name).exists(), name
        # the added-edge list matches training's record
        ours = (out / "added_edges.tsv").read_text().splitlines()[1:]
        theirs = (train_dir / "added_edges.tsv").read_text().splitlines()[1:]
        assert [l.split("\t")[:2] for l in ours] == \
               [l.split("\t")[:2] for l in theirs]

    def test_rejects_baseline_checkpoint(self, tmp_path, bundle):
        run_dir = tmp_path / "gcnrun"
        assert run(["train", "--bundle", bundle, "--out", str(run_dir),
                    "--seed", "1", *FAST_SETS, "--set", "model=gcn",
                    "--set", "max_epochs=2", "--set", "patience=2"]) == 0
        out = tmp_path / "augrep2"
        assert run(["augment-report", "--bundle", bundle, "--checkpoint",
                    str(run_dir / "checkpoint.bin"), "--out", str(out)]) == 1


class TestSweep:
    def test_values_grid(self, tmp_path, bundle):
        out = tmp_path / "sweep"
        assert run(["sweep", "--bundle", bundle, "--out", str(out),
                    "--param", "alpha", "--values", "0.5,1.0",
                    "--seeds", "1", *FAST_SETS,
                    "--set", "max_epochs=2", "--set", "patience=2"]) == 0
        lines = (out / "sweep.tsv").read_text().splitlines()
        assert len(lines) == 3  # header + 2 rows
        assert (out / "sweep.png").exists()

    def test_log_grid(self, tmp_path, bundle):
        out = tmp_path / "sweeplog"
        assert run(["sweep", "--bundle", bundle, "--out", str(out),
                    "--param", "lr_g", "--log-grid", "0.01", "1", "3",
                    "--seeds", "1", *FAST_SETS,
                    "--set", "max_epochs=2", "--set", "patience=2"]) == 0
        lines = (out / "sweep.tsv").read_text().splitlines()
        values = [float(l.split("\t")[0]) for l in lines[1:]]
        assert values == pytest.approx([0.01, 0.1, 1.0], rel=1e-9)

    def test_requires_exactly_one_grid(self, tmp_path, bundle):
        out = tmp_path / "sweepbad"
        assert run(["sweep", "--bundle", bundle, "--out", str(out),
                    "--param", "alpha", "--seeds", "1"]) == 1
        assert run(["sweep", "--bundle", bundle, "--out", str(out),
                    "--param", "alpha", "--values", "1.0",
                    "--log-grid", "0.1", "1", "2", "--seeds", "1"]) == 1

    def test_unsweepable_param(self, tmp_path, bundle):
        out = tmp_path / "sweepbad2"
        assert run(["sweep", "--bundle", bundle, "--out", str(out),
                    "--param", "seed", "--values", "1", "--seeds", "1"]) == 1


class TestParsing:
    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_required_flag(self, capsys):
        assert main(["analyze", "--out", "/tmp/x"]) == 1
