"""Fixtures compartidas: grafos pequeños, configuraciones mínimas y una traza corta."""
import numpy as np
import pytest

from app.engine.data import SnapshotSequence
from app.engine.graph import GraphSnapshot
from app.engine.simgen import gen_topology, simulate
from app.schemas.model import ModelConfig
from app.schemas.sim import SimConfig
from app.schemas.train import TrainConfig


def make_sequence(features, masks=None, edges=None, horizon_steps=1, window_len_s=60,
                  warmup_steps=0, start_index=0):
    """SnapshotSequence ya alineada a partir de un arreglo T × N × d."""
    features = np.asarray(features, dtype=np.float64)
    T, N, _ = features.shape
    masks = np.ones((T, N)) if masks is None else np.asarray(masks, dtype=np.float64)
    vocabulary = tuple(f"svc-{i}" for i in range(N))
    snapshots = []
    for t in range(T):
        window_edges = edges[t] if isinstance(edges, list) else (edges or ())
        kept = tuple((a, b, float(w)) for a, b, w in window_edges if masks[t, a] and masks[t, b])
        snapshots.append(GraphSnapshot(
            window_index=start_index + t,
            window_start=(start_index + t) * window_len_s,
            node_ids=vocabulary,
            edges=kept,
            features=features[t] * masks[t][:, None],
        ))
    return SnapshotSequence(
        snapshots=tuple(snapshots),
        vocabulary=vocabulary,
        presence_masks=masks,
        window_len_s=window_len_s,
        horizon_steps=horizon_steps,
        warmup_steps=warmup_steps,
    )


def random_sequence(rng, T=3, N=3, d=4, horizon_steps=1, absent_prob=0.0):
    features = rng.normal(size=(T, N, d))
    masks = (rng.random((T, N)) >= absent_prob).astype(float)
    edges = []
    for _ in range(T):
        window = [(a, b, float(rng.uniform(0.5, 3.0)))
                  for a in range(N) for b in range(N) if a != b and rng.random() < 0.5]
        edges.append(window)
    return make_sequence(features, masks, edges, horizon_steps=horizon_steps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_config():
    return ModelConfig(input_dim=4, gcn_layers=2, gcn_hidden=3, gcn_activation="tanh",
                       time_enc_dim=2, gru_hidden=3, mlp_layers=[3, 1], seed=7)


@pytest.fixture
def small_model_config():
    return ModelConfig(gcn_layers=1, gcn_hidden=8, time_enc_dim=2, gru_hidden=8, mlp_layers=[8, 1], seed=0)


@pytest.fixture
def quick_train_config():
    return TrainConfig(epochs=5, learning_rate=1e-2, early_stop_patience=5, seed=0)


@pytest.fixture
def small_sim_config():
    return SimConfig(depth=2, fanout=2, duration_s=36000, tick_s=600, profile_period_s=7200.0, seed=3)


@pytest.fixture
def small_trace(small_sim_config):
    return simulate(gen_topology(small_sim_config), small_sim_config)
