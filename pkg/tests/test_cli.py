"""Command-line harness: run directories, CSV emission, and verification."""

import json

import numpy as np
import pytest

from metasense.agents import build_policy, build_sensing_net, save_model
from metasense.baselines import SinrTable, tiny_config
from metasense.cli import (
    METRICS_HEADER,
    SWEEP_HEADER,
    main,
    read_metrics_csv,
    write_metrics_csv,
)
from metasense.mdp_env import build_environment


@pytest.fixture(scope="module")
def tiny_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.json"
    path.write_text(json.dumps(tiny_config(0).to_dict()))
    return str(path)


@pytest.fixture(scope="module")
def tiny_model_files(tmp_path_factory):
    """Two small untrained model checkpoints standing in for plain/anti-jam."""
    cfg = tiny_config(0)
    env = build_environment(cfg)
    out = tmp_path_factory.mktemp("models")
    paths = []
    for name, seed in (("plain.json", 50), ("antijam.json", 51)):
        policy = build_policy(env, np.random.default_rng(seed))
        sensing = build_sensing_net(cfg, np.random.default_rng(seed + 100))
        path = out / name
        save_model(path, policy, sensing, cfg, "p1")
        paths.append(str(path))
    return paths


def run_cli(*argv) -> int:
    return main(list(argv))


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------

def test_version_flag_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as info:
        run_cli("--version")
    assert info.value.code == 0
    assert "metasense" in capsys.readouterr().out


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        run_cli("frobnicate")
    assert info.value.code == 2


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_a_complete_run_directory(tmp_path, tiny_config_file):
    out = tmp_path / "run"
    code = run_cli(
        "train", "--config", tiny_config_file, "--out", str(out),
        "--mode", "p1", "--epochs", "5",
    )
    assert code == 0
    records = read_metrics_csv(out / "metrics.csv")
    assert [r.epoch for r in records] == [1, 2, 3, 4, 5]
    assert (out / "model_final.json").is_file()
    assert (out / "control_final.json").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "metasense.manifest"
    assert manifest["mode"] == "p1"
    listed = {entry["path"] for entry in manifest["files"]}
    assert "metrics.csv" in listed
    assert "model_final.json" in listed
    # wall times are zeroed by default so reruns stay byte-identical
    assert all(r.wall_ms == 0 for r in records)


def test_train_reruns_are_byte_identical(tmp_path, tiny_config_file):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run_cli(
            "train", "--config", tiny_config_file, "--out", str(out),
            "--epochs", "4",
        ) == 0
        outs.append(out)
    assert (outs[0] / "metrics.csv").read_bytes() == (outs[1] / "metrics.csv").read_bytes()
    assert (outs[0] / "model_final.json").read_bytes() == (
        outs[1] / "model_final.json"
    ).read_bytes()


def test_train_zero_epochs_emits_one_row(tmp_path, tiny_config_file):
    out = tmp_path / "run0"
    assert run_cli(
        "train", "--config", tiny_config_file, "--out", str(out), "--epochs", "0"
    ) == 0
    text = (out / "metrics.csv").read_text()
    lines = [ln for ln in text.split("\n") if ln]
    assert lines[0] == METRICS_HEADER
    assert len(lines) == 2
    assert lines[1].startswith("0,")


def test_train_rejects_an_unknown_mode(tmp_path, tiny_config_file):
    with pytest.raises(SystemExit) as info:
        run_cli(
            "train", "--config", tiny_config_file,
            "--out", str(tmp_path / "x"), "--mode", "p3",
        )
    assert info.value.code == 2


def test_train_rejects_unknown_config_keys(tmp_path, capsys):
    doc = tiny_config(0).to_dict()
    doc["warp_factor"] = 9
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code = run_cli("train", "--config", str(bad), "--out", str(tmp_path / "y"))
    assert code == 2
    assert "error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_writes_paired_rows_for_both_models(tmp_path, tiny_model_files, capsys):
    out = tmp_path / "sweep.csv"
    code = run_cli(
        "sweep",
        "--checkpoint", tiny_model_files[0],
        "--checkpoint", tiny_model_files[1],
        "--jam-powers", "0,100",
        "--trials", "10",
        "--seed", "0",
        "--out", str(out),
    )
    assert code == 0
    lines = [ln for ln in out.read_text().split("\n") if ln]
    assert lines[0] == SWEEP_HEADER
    assert len(lines) == 5  # two models x two powers
    models = [ln.split(",")[1] for ln in lines[1:]]
    assert models == ["plain", "plain", "antijam", "antijam"]
    for ln in lines[1:]:
        acc = float(ln.split(",")[2])
        assert 0.0 <= acc <= 1.0
    assert "monotone" in capsys.readouterr().out


def test_sweep_needs_exactly_two_checkpoints(tmp_path, tiny_model_files, capsys):
    code = run_cli(
        "sweep", "--checkpoint", tiny_model_files[0],
        "--out", str(tmp_path / "s.csv"),
    )
    assert code == 2
    assert "two" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------

def test_baseline_conventional_methods_only(tmp_path):
    out = tmp_path / "table.csv"
    code = run_cli(
        "baseline", "--methods", "none,zero_forcing",
        "--jam-powers", "100,300", "--trials", "50", "--out", str(out),
    )
    assert code == 0
    table = SinrTable.from_csv(out.read_text())
    assert len(table.rows) == 4
    assert {r.method for r in table.rows} == {"none", "zero_forcing"}
    assert all(r.n_trials == 50 for r in table.rows)


def test_baseline_proposed_rows_from_a_checkpoint(tmp_path, tiny_model_files):
    out = tmp_path / "proposed.csv"
    code = run_cli(
        "baseline", "--methods", "proposed", "--checkpoint", tiny_model_files[0],
        "--jam-powers", "0,100", "--trials", "10", "--out", str(out),
    )
    assert code == 0
    table = SinrTable.from_csv(out.read_text())
    assert [r.method for r in table.rows] == ["proposed", "proposed"]


def test_baseline_proposed_requires_a_checkpoint(tmp_path, capsys):
    code = run_cli(
        "baseline", "--methods", "proposed", "--out", str(tmp_path / "t.csv")
    )
    assert code == 2
    assert "checkpoint" in capsys.readouterr().err


def test_baseline_rejects_unknown_methods(tmp_path, capsys):
    code = run_cli(
        "baseline", "--methods", "mmse", "--out", str(tmp_path / "t.csv")
    )
    assert code == 2
    assert "mmse" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# oracle and gradcheck
# ---------------------------------------------------------------------------

def test_oracle_smoke_run_reports_scores(tmp_path, capsys):
    report = tmp_path / "oracle.json"
    code = run_cli(
        "oracle", "--seeds", "0", "--max-epochs", "25", "--check-every", "25",
        "--pretrain-epochs", "40", "--target", "-999", "--out", str(report),
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "seed 0" in out
    assert "tolerances" in out
    doc = json.loads(report.read_text())
    assert doc["results"][0]["seed"] == 0
    assert doc["results"][0]["best_reward"] >= doc["results"][0]["policy_reward"]


def test_oracle_rejects_a_corrupt_checkpoint(tmp_path, capsys):
    bad = tmp_path / "model.json"
    bad.write_text("{ not json")
    code = run_cli("oracle", "--checkpoint", str(bad))
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_gradcheck_passes_at_default_tolerance(tiny_config_file, capsys):
    code = run_cli(
        "gradcheck", "--config", tiny_config_file, "--n-archs", "6", "--seed", "0"
    )
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 6
    assert "all pass" in out


def test_gradcheck_fails_at_an_impossible_tolerance(tiny_config_file, capsys):
    code = run_cli(
        "gradcheck", "--config", tiny_config_file, "--n-archs", "3",
        "--tol", "1e-18",
    )
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def test_plot_renders_a_vector_figure(tmp_path, tiny_config_file):
    run_dir = tmp_path / "run"
    assert run_cli(
        "train", "--config", tiny_config_file, "--out", str(run_dir),
        "--epochs", "3",
    ) == 0
    fig = tmp_path / "metrics.svg"
    assert run_cli(
        "plot", "--metrics", str(run_dir / "metrics.csv"), "--out", str(fig)
    ) == 0
    text = fig.read_text()
    assert "<svg" in text


def test_plot_rejects_an_empty_metrics_file(tmp_path, capsys):
    empty = tmp_path / "metrics.csv"
    write_metrics_csv(empty, [])
    code = run_cli("plot", "--metrics", str(empty), "--out", str(tmp_path / "f.svg"))
    assert code == 2
    assert "no rows" in capsys.readouterr().err


def test_metrics_reader_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="metrics"):
        read_metrics_csv(path)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_accepts_then_catches_tampering(tmp_path, tiny_config_file, capsys):
    run_dir = tmp_path / "run"
    assert run_cli(
        "train", "--config", tiny_config_file, "--out", str(run_dir),
        "--epochs", "2",
    ) == 0
    assert run_cli("verify", "--run", str(run_dir)) == 0
    assert "ok" in capsys.readouterr().out

    metrics = run_dir / "metrics.csv"
    metrics.write_text(metrics.read_text() + "tampered\n")
    assert run_cli("verify", "--run", str(run_dir)) == 1
    assert "checksum mismatch" in capsys.readouterr().err

    metrics.unlink()
    assert run_cli("verify", "--run", str(run_dir)) == 1
    assert "missing file" in capsys.readouterr().err


def test_verify_needs_a_manifest(tmp_path, capsys):
    empty = tmp_path / "not_a_run"
    empty.mkdir()
    assert run_cli("verify", "--run", str(empty)) == 2
    assert "manifest" in capsys.readouterr().err
