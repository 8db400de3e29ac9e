import json

import numpy.testing as npt
import pandas as pd
import pytest

from app.engine.data import build_sequence, parse_trace, split
from app.engine.evaluation import evaluate
from app.main import main
from app.utils.checkpoint import load_checkpoint
from app.utils.config import EFFECTIVE_CONFIG, build_run_config, render_config
from app.utils.errors import DivergenceError

SMALL_WORLD = ["--depth", "2", "--fanout", "2", "--duration", "36000", "--tick", "600",
               "--set", "sim.profile_period_s=7200"]
QUICK_TRAIN = ["--window", "600", "--epochs", "3", "--set", "model.gcn_hidden=4",
               "--set", "model.gru_hidden=4", "--set", "model.mlp_layers=4,1"]
FIT_TRAIN = ["--window", "600", "--epochs", "150", "--set", "train.learning_rate=0.01",
             "--set", "model.gcn_hidden=8", "--set", "model.gru_hidden=8", "--set", "model.mlp_layers=8,1"]
# SMALL_WORLD: profundidad 2 con el tiempo base por defecto
WORLD_DEPTH = 2
BASE_MS = 10.0


@pytest.fixture
def world(tmp_path):
    out = tmp_path / "world"
    assert main(["simulate", "--out", str(out), "--seed", "3", *SMALL_WORLD]) == 0
    return out


def trace_args(world):
    return ["--metrics", str(world / "metrics.csv"), "--calls", str(world / "calls.csv")]


@pytest.fixture
def trained(world, tmp_path):
    out = tmp_path / "model"
    assert main(["train", *trace_args(world), "--out", str(out), *QUICK_TRAIN]) == 0
    return out


@pytest.fixture
def fitted(world, tmp_path):
    out = tmp_path / "fitted"
    assert main(["train", *trace_args(world), "--out", str(out), *FIT_TRAIN]) == 0
    return out


def predict(checkpoint_dir, metrics, calls, out):
    assert main(["predict", "--checkpoint", str(checkpoint_dir / "checkpoint.json"), "--metrics", str(metrics),
                 "--calls", str(calls), "--out", str(out)]) == 0
    return pd.read_csv(out / "predictions.csv")


def test_simulate_single_service(tmp_path):
    out = tmp_path / "a" / "b"
    assert main(["simulate", "--depth", "1", "--duration", "60", "--tick", "10", "--out", str(out)]) == 0
    metrics = pd.read_csv(out / "metrics.csv")
    assert len(metrics) == 6
    assert set(metrics["service_id"]) == {"svc-0-0"}
    assert (out / "calls.csv").read_text().splitlines() == ["timestamp,caller_id,callee_id,count"]
    assert (out / EFFECTIVE_CONFIG).exists()


def test_simulate_from_sim_config_file(tmp_path):
    sim_file = tmp_path / "sim.cfg"
    sim_file.write_text("depth = 2\nfanout = 3\nduration_s = 120\ntick_s = 60\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "--sim-config", str(sim_file), "--out", str(out)]) == 0
    assert len(pd.read_csv(out / "metrics.csv")) == 2 * 4


def test_sim_config_file_values_reach_the_run(tmp_path):
    sim_file = tmp_path / "sim.cfg"
    sim_file.write_text("depth = 1\nduration_s = 60\ntick_s = 10\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "--sim-config", str(sim_file), "--out", str(out)]) == 0
    assert len(pd.read_csv(out / "metrics.csv")) == 6
    echoed = (out / EFFECTIVE_CONFIG).read_text(encoding="utf-8").splitlines()
    assert {"sim.depth = 1", "sim.duration_s = 60", "sim.tick_s = 10"} <= set(echoed)


def test_flags_override_sim_config_file(tmp_path):
    sim_file = tmp_path / "sim.cfg"
    sim_file.write_text("depth = 1\nduration_s = 60\ntick_s = 10\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "--sim-config", str(sim_file), "--depth", "2", "--out", str(out)]) == 0
    metrics = pd.read_csv(out / "metrics.csv")
    assert len(metrics) == 6 * 3


def test_sim_config_file_unknown_key(tmp_path, capsys):
    sim_file = tmp_path / "sim.cfg"
    sim_file.write_text("depth = 2\nwidth = 4\n", encoding="utf-8")
    assert main(["simulate", "--sim-config", str(sim_file), "--out", str(tmp_path / "out")]) == 1
    assert "width" in capsys.readouterr().err


def test_unknown_key_exits_with_usage_error(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path), "--set", "model.bogus=3"])
    assert code == 1
    assert "model.bogus" in capsys.readouterr().err


def test_malformed_set_pair(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "nonsense"]) == 1
    assert "KEY=VALUE" in capsys.readouterr().err


def test_missing_trace_exits_with_data_error(tmp_path, capsys):
    code = main(["train", "--metrics", str(tmp_path / "none.csv"), "--calls", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path)])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_divergence_exit_code(world, tmp_path, monkeypatch):
    def diverge(*args, **kwargs):
        raise DivergenceError("training loss became nan at epoch 1", epoch=1)

    monkeypatch.setattr("app.commands.train.train_loop", diverge)
    assert main(["train", *trace_args(world), "--out", str(tmp_path / "x"), *QUICK_TRAIN]) == 3


def test_unknown_sweep_kind():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "bogus"])
    assert info.value.code == 1


def test_train_writes_outputs(trained):
    history = pd.read_csv(trained / "history.csv")
    assert list(history.columns) == ["epoch", "train_loss", "val_loss", "seconds"]
    assert list(history["epoch"]) == [1, 2, 3]
    assert history["seconds"].isna().all()
    checkpoint = load_checkpoint(trained / "checkpoint.json")
    assert (checkpoint.window_len_s, checkpoint.horizon_steps) == (600, 1)
    assert checkpoint.config.gcn_hidden == 4


def test_train_rerun_is_byte_identical(world, trained, tmp_path):
    again = tmp_path / "again"
    assert main(["train", *trace_args(world), "--out", str(again), *QUICK_TRAIN]) == 0
    assert (again / "history.csv").read_bytes() == (trained / "history.csv").read_bytes()
    assert (again / "checkpoint.json").read_bytes() == (trained / "checkpoint.json").read_bytes()


def test_predict_is_deterministic(world, trained, tmp_path):
    outputs = []
    for name in ("p1", "p2"):
        out = tmp_path / name
        assert main(["predict", "--checkpoint", str(trained / "checkpoint.json"), *trace_args(world),
                     "--out", str(out)]) == 0
        outputs.append((out / "predictions.csv").read_bytes())
    assert outputs[0] == outputs[1]
    frame = pd.read_csv(tmp_path / "p1" / "predictions.csv")
    assert list(frame.columns) == ["window", "service_id", "predicted_response_time_ms"]
    assert len(frame) == 60 * 3
    assert frame["window"].min() == 1
    assert frame["window"].max() == 60


def test_predict_rejects_other_horizon(world, trained, tmp_path, capsys):
    code = main(["predict", "--checkpoint", str(trained / "checkpoint.json"), *trace_args(world),
                 "--horizon", "2", "--out", str(tmp_path / "p")])
    assert code == 1
    assert "horizon" in capsys.readouterr().err


def test_predictions_stay_in_physical_range(world, fitted, tmp_path):
    frame = predict(fitted, world / "metrics.csv", world / "calls.csv", tmp_path / "p")
    predicted = frame["predicted_response_time_ms"]
    assert predicted.between(0.5 * BASE_MS, WORLD_DEPTH * BASE_MS * 20).all()


def test_absent_service_gets_no_prediction(world, fitted, tmp_path):
    metrics = pd.read_csv(world / "metrics.csv")
    gap = (metrics["timestamp"] == 6000) & (metrics["service_id"] == "svc-1-1")
    assert gap.sum() == 1
    holed = tmp_path / "holed.csv"
    metrics[~gap].to_csv(holed, index=False)

    frame = predict(fitted, holed, world / "calls.csv", tmp_path / "p")
    assert len(frame) == 60 * 3 - 1
    at_target = frame[frame["window"] == 11]
    assert set(at_target["service_id"]) == {"svc-0-0", "svc-1-0"}
    assert "svc-1-1" in set(frame[frame["window"] == 12]["service_id"])


def test_eval_matches_library_evaluate(world, trained, tmp_path):
    out = tmp_path / "eval"
    assert main(["eval", "--checkpoint", str(trained / "checkpoint.json"), *trace_args(world),
                 "--out", str(out)]) == 0
    document = json.loads((out / "metrics.json").read_text())

    checkpoint = load_checkpoint(trained / "checkpoint.json")
    seq = build_sequence(parse_trace(world / "metrics.csv", world / "calls.csv"), 600, 1)
    _, _, test_seq = split(seq, 0.6, 0.2, checkpoint.stats)
    expected = evaluate(checkpoint.params, checkpoint.config, test_seq)
    npt.assert_allclose([document["mae"], document["rmse"], document["r2"]],
                        [expected.mae, expected.rmse, expected.r2], rtol=1e-12)
    assert document["n"] == expected.n
    assert set(document["persistence"]) == {"mae", "rmse", "r2", "n"}


def test_window_sweep_writes_rows(tmp_path):
    world = tmp_path / "minute"
    assert main(["simulate", "--out", str(world), "--depth", "2", "--duration", "36000", "--tick", "60",
                 "--set", "sim.profile_period_s=7200"]) == 0
    out = tmp_path / "sweep"
    assert main(["sweep", "window", *trace_args(world), "--windows", "5,10,30", "--out", str(out),
                 "--set", "train.epochs=2", "--set", "model.gcn_hidden=4", "--set", "model.gru_hidden=4",
                 "--set", "model.mlp_layers=4,1"]) == 0
    lines = (out / "sweep_window.csv").read_text().splitlines()
    assert lines[0] == "window_min,mae,rmse,r2"
    assert [line.split(",")[0] for line in lines[1:]] == ["5", "10", "30"]
    report = json.loads((out / "report_window.json").read_text())
    assert report["kind"] == "window"
    assert report["published_reference"]["label"] == "paper-reported, not reproduced"
    assert report["config"]["sweep_windows_min"] == "5,10,30"


def test_effective_config_reproduces_run(world):
    path = world / EFFECTIVE_CONFIG
    config = build_run_config(path, environ={})
    assert config.seed == 3
    assert config.sim.depth == 2
    assert render_config(config) == path.read_text(encoding="utf-8")
