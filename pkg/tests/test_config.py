import logging

import pytest

from app.schemas.run import RunConfig
from app.utils.config import (
    EFFECTIVE_CONFIG, build_run_config, echo_config, env_values, flatten, nest, read_kv_file,
    render_config,
)
from app.utils.errors import ConfigError
from app.utils.log import setup_logging


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_read_kv_file_skips_comments_and_blanks(tmp_path):
    path = write(tmp_path / "run.cfg", "# comentario\n\nseed = 4\nmodel.mlp_layers = 8, 1\n")
    assert read_kv_file(path) == {"seed": "4", "model.mlp_layers": "8, 1"}


def test_read_kv_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        read_kv_file(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError, match=":2:"):
        read_kv_file(write(tmp_path / "bad.cfg", "seed = 1\njust words\n"))
    with pytest.raises(ConfigError, match="duplicate key 'seed'"):
        read_kv_file(write(tmp_path / "dup.cfg", "seed = 1\nseed = 2\n"))


def test_nest_dotted_keys():
    assert nest({"seed": "1", "model.gcn_layers": "3", "train.epochs": "5"}) == {
        "seed": "1", "model": {"gcn_layers": "3"}, "train": {"epochs": "5"}}


@pytest.mark.parametrize("key", ["optimizer.lr", "model.", "model.a.b"])
def test_nest_rejects_unknown_sections(key):
    with pytest.raises(ConfigError, match="unknown config key"):
        nest({key: "1"})


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="unknown config key 'model.bogus'"):
        build_run_config(overrides={"model.bogus": "1"}, environ={})


def test_invalid_value_is_named():
    with pytest.raises(ConfigError, match="invalid value for 'train.learning_rate'"):
        build_run_config(overrides={"train.learning_rate": "-1"}, environ={})


def test_fractions_must_leave_a_test_split():
    with pytest.raises(ConfigError):
        build_run_config(overrides={"train_fraction": "0.7", "val_fraction": "0.3"}, environ={})


def test_env_values_only_known_variables():
    assert env_values({"CASCADECAST_SEED": "9", "HOME": "/root", "CASCADECAST_OUT_DIR": ""}) == {"seed": "9"}


def test_precedence_env_file_flags(tmp_path):
    environ = {"CASCADECAST_SEED": "9", "CASCADECAST_OUT_DIR": "from-env"}
    assert build_run_config(environ=environ).seed == 9
    path = write(tmp_path / "run.cfg", "seed = 5\n")
    config = build_run_config(path, environ=environ)
    assert (config.seed, config.out_dir) == (5, "from-env")
    assert build_run_config(path, {"seed": 2, "out_dir": None}, environ=environ).seed == 2


def test_seed_propagates_to_every_section():
    config = build_run_config(overrides={"seed": 13, "model.seed": "1"}, environ={})
    assert config.model.seed == config.train.seed == config.sim.seed == 13


def test_flatten_formats_values():
    flat = flatten(RunConfig(sim={"load_profile": [(0.0, 100.0), (600.0, 250.0)]}))
    assert flat["model.mlp_layers"] == "32,16,1"
    assert flat["sim.load_profile"] == "0.0:100.0, 600.0:250.0"
    assert flat["train.record_timing"] == "false"
    assert flat["sweep_windows_min"] == "5,10,30,60"


def test_effective_config_round_trip(tmp_path):
    config = build_run_config(overrides={
        "seed": 3, "model.mlp_layers": "16,1", "train.grad_clip_norm": "none",
        "sim.load_profile": "0:100, 3600:4000", "sim.base_service_time_ms": "5,15",
    }, environ={})
    path = echo_config(config, tmp_path / "nested" / "out")
    assert path.name == EFFECTIVE_CONFIG
    reloaded = build_run_config(path, environ={})
    assert reloaded == config
    assert render_config(reloaded) == path.read_text(encoding="utf-8")


def test_rendered_keys_are_sorted():
    lines = render_config(RunConfig()).splitlines()
    keys = [line.split(" = ")[0] for line in lines]
    assert keys == sorted(keys)


def test_log_level_from_environment(monkeypatch):
    monkeypatch.setenv("CASCADECAST_LOG_LEVEL", "warning")
    setup_logging()
    assert logging.getLogger().level == logging.WARNING
    setup_logging("debug")
    assert logging.getLogger().level == logging.DEBUG
