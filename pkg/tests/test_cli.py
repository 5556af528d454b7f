import json
from pathlib import Path

import numpy as np
import pytest

from hypalign import datasets
from hypalign.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pair")
    code = run_cli("synth", "--n", 60, "--communities", 2, "--p-in", 0.25,
                   "--p-out", 0.02, "--eta", 0.8, "--seed", 4, "--out", out)
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = run_cli("train", synth_dir / "source.edges", synth_dir / "target.edges",
                   synth_dir / "anchors_train.txt", "--out", out,
                   "--dim", 2, "--walks-per-node", 3, "--walk-length", 8,
                   "--window", 2, "--k-negative", 3, "--outer-iters", 2,
                   "--sgd-epochs-per-outer", 1, "--warmup-epochs", 1,
                   "--em-iters-per-outer", 2, "--c-source", 2, "--c-target", 2,
                   "--seed", 1)
    assert code == 0
    return out


def test_delta_zachary(capsys):
    code = run_cli("delta", datasets.zachary_edge_path())
    out = capsys.readouterr().out
    assert code == 0
    assert "delta 1.0" in out
    assert "quadruples 46376" in out


def test_delta_tree_zero(capsys, tmp_path):
    path = tmp_path / "tree.edges"
    edges = [f"t{(i - 1) // 2} t{i}" for i in range(1, 63)]
    path.write_text("\n".join(edges))
    code = run_cli("delta", path)
    assert code == 0
    assert "delta 0.0" in capsys.readouterr().out


def test_delta_sampled_mode(capsys, tmp_path):
    path = tmp_path / "path.edges"
    path.write_text("\n".join(f"v{i} v{i+1}" for i in range(300)))
    code = run_cli("delta", path, "--mode", "sampled", "--samples", 5000,
                   "--seed", 2)
    assert code == 0
    assert "delta 0.0" in capsys.readouterr().out


def test_delta_exact_over_cap_errors(tmp_path, capsys):
    path = tmp_path / "big.edges"
    path.write_text("\n".join(f"v{i} v{i+1}" for i in range(400)))
    code = run_cli("delta", path, "--mode", "exact")
    assert code == 2
    assert "sampled" in capsys.readouterr().err


def test_synth_outputs(synth_dir):
    for name in ("source.edges", "target.edges", "source.labels", "target.labels",
                 "anchors_train.txt", "anchors_test.txt", "report.txt",
                 "report.json"):
        assert (synth_dir / name).exists()
    report = json.loads((synth_dir / "report.json").read_text())
    assert report["command"] == "synth"
    assert "version" in report


def test_train_outputs(trained_dir):
    assert (trained_dir / "model.ckpt").exists()
    assert (trained_dir / "train_log.txt").exists()
    assert (trained_dir / "figures" / "objective.png").exists()
    report = json.loads((trained_dir / "report.json").read_text())
    assert report["config"]["dim"] == 2


def test_align_outputs(synth_dir, trained_dir, tmp_path, capsys):
    out = tmp_path / "eval"
    code = run_cli("align", trained_dir / "model.ckpt",
                   "--test-anchors", synth_dir / "anchors_test.txt",
                   "--source-labels", synth_dir / "source.labels",
                   "--target-labels", synth_dir / "target.labels",
                   "--k", "1,5", "--dump-ranked", "--out", out)
    assert code == 0
    assert (out / "metrics.csv").exists()
    assert (out / "ranked.csv").exists()
    assert (out / "figures" / "metrics.png").exists()
    report = json.loads((out / "report.json").read_text())
    assert set(report["precision_at_k"]) == {"1", "5"}
    header = (out / "ranked.csv").read_text().splitlines()[0]
    assert header == "query,rank,candidate,distance"


def test_align_deterministic_reports(synth_dir, trained_dir, tmp_path):
    outs = []
    for sub in ("e1", "e2"):
        out = tmp_path / sub
        code = run_cli("align", trained_dir / "model.ckpt",
                       "--test-anchors", synth_dir / "anchors_test.txt",
                       "--out", out)
        assert code == 0
        outs.append(json.loads((out / "report.json").read_text()))
    assert outs[0]["precision_at_k"] == outs[1]["precision_at_k"]
    assert outs[0]["map_at_k"] == outs[1]["map_at_k"]


def test_align_missing_model(tmp_path, capsys):
    code = run_cli("align", tmp_path / "nope.ckpt",
                   "--test-anchors", tmp_path / "x.txt", "--out", tmp_path / "o")
    assert code == 2
    assert "nope.ckpt" in capsys.readouterr().err


def test_emit_plot(synth_dir, trained_dir, tmp_path):
    out = tmp_path / "plot"
    code = run_cli("emit-plot", trained_dir / "model.ckpt", "--network", "s",
                   "--graph", synth_dir / "source.edges", "--out", out)
    assert code == 0
    csv = (out / "embedding_s.csv").read_text().splitlines()
    n_nodes = len((synth_dir / "source.labels").read_text().splitlines())
    assert len(csv) == n_nodes + 1
    assert csv[0] == "token,community,degree,x0,x1"
    assert (out / "figures" / "disk_s.png").exists()


def test_usage_error_exit_code():
    assert_exit_one = False
    try:
        main(["delta"])  # missing positional
    except SystemExit as exc:
        assert_exit_one = exc.code == 1
    assert assert_exit_one


def test_config_file_with_flag_override(synth_dir, tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("dim=4\nouter_iters=1\nwalks_per_node=2\nwalk_length=6\n"
                   "window=2\nk_negative=2\nwarmup_epochs=1\n"
                   "em_iters_per_outer=2\nsgd_epochs_per_outer=1\n"
                   "c_source=2\nc_target=2\nseed=9\n")
    out = tmp_path / "run"
    code = run_cli("train", synth_dir / "source.edges", synth_dir / "target.edges",
                   synth_dir / "anchors_train.txt", "--config", cfg,
                   "--dim", 3, "--out", out)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["dim"] == 3          # flag wins
    assert report["config"]["outer_iters"] == 1  # file value honored


def test_checkpoint_round_trip_metrics(synth_dir, trained_dir, tmp_path):
    # align from the checkpoint twice: loading cannot change any metric
    from hypalign.model import load_checkpoint, save_checkpoint
    model = load_checkpoint(trained_dir / "model.ckpt")
    resaved = tmp_path / "resaved.ckpt"
    save_checkpoint(model, resaved)
    assert Path(resaved).read_bytes() == (trained_dir / "model.ckpt").read_bytes()
