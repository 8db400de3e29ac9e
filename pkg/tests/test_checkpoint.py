import json

import numpy as np
import numpy.testing as npt
import pytest

from app.engine.data import FeatureStats
from app.engine.model import init_params
from app.utils.checkpoint import load_checkpoint, save_checkpoint
from app.utils.errors import CheckpointError


@pytest.fixture
def stats():
    return FeatureStats(mean=np.array([0.3, 0.4, 25.0, 310.0]), std=np.array([0.1, 0.05, 7.5, 90.0]))


@pytest.fixture
def saved(tmp_path, tiny_config, stats, rng):
    params = init_params(tiny_config)
    for name in params:
        params.tensors[name] = params[name] + rng.normal(scale=1e-3, size=params[name].shape)
    path = save_checkpoint(params, tiny_config, stats, tmp_path / "checkpoint.json", 600, 2)
    return params, path


def test_save_load_save_is_byte_identical(saved, tmp_path):
    _, path = saved
    loaded = load_checkpoint(path)
    again = save_checkpoint(loaded.params, loaded.config, loaded.stats, tmp_path / "again.json",
                            loaded.window_len_s, loaded.horizon_steps)
    assert again.read_bytes() == path.read_bytes()


def test_load_restores_everything(saved, tiny_config, stats):
    params, path = saved
    loaded = load_checkpoint(path)
    assert loaded.config == tiny_config
    assert (loaded.window_len_s, loaded.horizon_steps) == (600, 2)
    npt.assert_array_equal(loaded.stats.mean, stats.mean)
    npt.assert_array_equal(loaded.stats.std, stats.std)
    assert loaded.params.names == params.names
    for name in params:
        npt.assert_array_equal(loaded.params[name], params[name])


def test_truncated_file(saved):
    _, path = saved
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "nope.json")


def test_shape_mismatch_names_the_tensor(saved):
    _, path = saved
    document = json.loads(path.read_text())
    for entry in document["tensors"]:
        if entry["name"] == "gru.U_h":
            entry["shape"] = [3, 4]
            entry["values"] = [row + [0.0] for row in entry["values"]]
    path.write_text(json.dumps(document))
    with pytest.raises(CheckpointError, match="gru.U_h"):
        load_checkpoint(path)


def test_values_disagree_with_declared_shape(saved):
    _, path = saved
    document = json.loads(path.read_text())
    document["tensors"][0]["values"] = document["tensors"][0]["values"][:-1]
    path.write_text(json.dumps(document))
    with pytest.raises(CheckpointError, match="gcn.0.W"):
        load_checkpoint(path)


def test_missing_and_unexpected_tensors(saved):
    _, path = saved
    document = json.loads(path.read_text())
    removed = [t for t in document["tensors"] if t["name"] != "mlp.1.b"]
    path.write_text(json.dumps(dict(document, tensors=removed)))
    with pytest.raises(CheckpointError, match="mlp.1.b"):
        load_checkpoint(path)
    extra = document["tensors"] + [{"name": "gcn.9.W", "shape": [1, 1], "values": [[0.0]]}]
    path.write_text(json.dumps(dict(document, tensors=extra)))
    with pytest.raises(CheckpointError, match="gcn.9.W"):
        load_checkpoint(path)


def test_missing_config_field(saved):
    _, path = saved
    document = json.loads(path.read_text())
    del document["feature_stats"]
    path.write_text(json.dumps(document))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
