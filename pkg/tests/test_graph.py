import numpy as np
import numpy.testing as npt
import pytest

from app.engine.graph import (
    GraphSnapshot, add_self_loops, adjacency, align_to_vocabulary, normalize, propagation_operator,
)
from app.utils.errors import DegenerateGraphError, DimensionError, InsufficientDataError


def snapshot(node_ids, edges=(), d=2, index=0):
    return GraphSnapshot(window_index=index, window_start=index * 60, node_ids=tuple(node_ids),
                         edges=tuple(edges), features=np.ones((len(node_ids), d)))


def spectral_radius(S, iterations=500):
    v = np.ones(S.shape[0]) / np.sqrt(S.shape[0])
    estimate = 0.0
    for _ in range(iterations):
        w = S @ v
        estimate = np.linalg.norm(w)
        if estimate == 0:
            return 0.0
        v = w / estimate
    return estimate


def random_adjacency(rng, n):
    a = rng.uniform(0.0, 5.0, size=(n, n)) * (rng.random((n, n)) < 0.4)
    np.fill_diagonal(a, 0.0)
    return np.maximum(a, a.T)


def test_snapshot_rejects_bad_edges_and_features():
    with pytest.raises(ValueError):
        snapshot(["a", "b"], edges=[(0, 2, 1.0)])
    with pytest.raises(ValueError):
        snapshot(["a", "b"], edges=[(0, 1, -1.0)])
    with pytest.raises(DimensionError):
        GraphSnapshot(0, 0, ("a",), (), np.ones((2, 2)))


def test_adjacency_without_edges_is_zero():
    npt.assert_array_equal(adjacency(snapshot(["a", "b", "c"])), np.zeros((3, 3)))


def test_adjacency_max_mode():
    a = adjacency(snapshot(["a", "b"], edges=[(0, 1, 2.0)]), "max")
    assert a[0, 1] == a[1, 0] == 2.0


def test_adjacency_sum_mode():
    a = adjacency(snapshot(["a", "b"], edges=[(0, 1, 1.0), (1, 0, 3.0)]), "sum")
    assert a[0, 1] == a[1, 0] == 4.0


def test_adjacency_sums_repeated_edges_and_ignores_self_edges():
    a = adjacency(snapshot(["a", "b"], edges=[(0, 1, 1.0), (0, 1, 2.0), (0, 0, 9.0)]))
    npt.assert_array_equal(a, [[0.0, 3.0], [3.0, 0.0]])


def test_add_self_loops_examples():
    npt.assert_array_equal(add_self_loops(np.zeros((1, 1))), [[1.0]])
    npt.assert_array_equal(add_self_loops(np.zeros((3, 3))), np.eye(3))
    npt.assert_array_equal(add_self_loops(np.array([[0.0, 1.0], [1.0, 0.0]])), np.ones((2, 2)))


def test_add_self_loops_twice_adds_two_identities():
    a = np.array([[0.0, 2.0], [2.0, 0.0]])
    npt.assert_array_equal(add_self_loops(add_self_loops(a)), a + 2 * np.eye(2))


def test_add_self_loops_rejects_non_square():
    with pytest.raises(DimensionError):
        add_self_loops(np.zeros((2, 3)))


def test_normalize_single_node():
    npt.assert_allclose(normalize(np.array([[1.0]])).matrix, [[1.0]], atol=1e-12)


def test_normalize_two_connected_nodes():
    npt.assert_allclose(normalize(np.ones((2, 2))).matrix, np.full((2, 2), 0.5), atol=1e-12)


def test_normalize_three_node_star():
    a_hat = add_self_loops(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    S = normalize(a_hat).matrix
    assert abs(S[0, 1] - 1.0 / np.sqrt(6.0)) <= 1e-12
    assert abs(S[0, 0] - 1.0 / 3.0) <= 1e-12
    assert abs(S[1, 1] - 0.5) <= 1e-12
    assert S[1, 2] == 0.0


def test_normalize_zero_row_is_degenerate():
    with pytest.raises(DegenerateGraphError):
        normalize(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_normalize_random_walk_rows_sum_to_one(rng):
    a_hat = add_self_loops(random_adjacency(rng, 6))
    S = normalize(a_hat, "random_walk").matrix
    npt.assert_allclose(S.sum(axis=1), np.ones(6), atol=1e-12)


def test_normalize_is_symmetric_and_contractive(rng):
    for _ in range(200):
        n = int(rng.integers(1, 11))
        S = normalize(add_self_loops(random_adjacency(rng, n))).matrix
        assert np.max(np.abs(S - S.T)) <= 1e-12
        assert spectral_radius(S) <= 1.0 + 1e-9


def test_normalize_is_permutation_equivariant(rng):
    for _ in range(20):
        n = 5
        a_hat = add_self_loops(random_adjacency(rng, n))
        P = np.eye(n)[rng.permutation(n)]
        left = normalize(P @ a_hat @ P.T).matrix
        right = P @ normalize(a_hat).matrix @ P.T
        npt.assert_allclose(left, right, atol=1e-12)


def test_propagation_operator_composes_the_pipeline():
    snap = snapshot(["a", "b"], edges=[(0, 1, 1.0)])
    npt.assert_allclose(propagation_operator(snap).matrix, np.full((2, 2), 0.5), atol=1e-12)


def test_align_identical_node_sets():
    vocabulary, aligned, masks = align_to_vocabulary([snapshot(["a", "b"]), snapshot(["a", "b"], index=1)])
    assert vocabulary == ("a", "b")
    npt.assert_array_equal(masks, np.ones((2, 2)))


def test_align_union_with_masks():
    first = GraphSnapshot(0, 0, ("A", "B"), ((0, 1, 2.0),), np.array([[1.0, 1.0], [2.0, 2.0]]))
    second = GraphSnapshot(1, 60, ("B", "C"), ((1, 0, 5.0),), np.array([[3.0, 3.0], [4.0, 4.0]]))
    vocabulary, aligned, masks = align_to_vocabulary([first, second])
    assert vocabulary == ("A", "B", "C")
    npt.assert_array_equal(masks, [[1, 1, 0], [0, 1, 1]])
    npt.assert_array_equal(aligned[0].features[2], [0.0, 0.0])
    npt.assert_array_equal(aligned[1].features[2], [4.0, 4.0])
    assert aligned[1].edges == ((2, 1, 5.0),)


def test_align_single_window_is_identity():
    snap = snapshot(["a", "b", "c"], edges=[(0, 2, 1.0)])
    vocabulary, aligned, masks = align_to_vocabulary([snap])
    assert aligned[0].edges == snap.edges
    npt.assert_array_equal(aligned[0].features, snap.features)


def test_align_empty_list():
    with pytest.raises(InsufficientDataError):
        align_to_vocabulary([])
