import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocrhmm.classifiers import knn
from ocrhmm.classifiers.emissions import classify_argmax
from ocrhmm.classifiers.knn import KnnModel, knn_emissions, knn_scores, nearest_neighbors, train_knn


def brute_errors(tx, ty, vx, vy, k_max=18):
    d2 = ((vx[:, None, :] - tx[None]) ** 2).sum(-1)
    order = np.lexsort((np.broadcast_to(np.arange(len(tx)), d2.shape), d2), axis=1)
    out = {}
    for k in range(1, k_max + 1):
        votes = np.array([np.bincount(ty[o[:k]], minlength=26) for o in order])
        out[k] = float(np.mean(votes.argmax(axis=1) != vy))
    return out


def two_clusters(seed, n=80):
    r = np.random.default_rng(seed)

    def make():
        y = r.integers(0, 2, n)
        return r.normal(size=(n, 2)) + np.c_[y * 1.5, np.zeros(n)], y

    return make(), make()


def test_k_search_matches_grid_oracle():
    (tx, ty), (vx, vy) = two_clusters(108)
    grid = brute_errors(tx, ty, vx, vy)
    best = min(grid, key=lambda k: (grid[k], k))
    assert best == 5
    model = train_knn(tx, ty, vx, vy)
    assert model.k == 5
    assert model.validation_errors == grid


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_walk_errors_agree_with_oracle(seed):
    (tx, ty), (vx, vy) = two_clusters(seed, n=40)
    grid = brute_errors(tx, ty, vx, vy)
    model = train_knn(tx, ty, vx, vy)
    for k, e in model.validation_errors.items():
        assert e == grid[k]
    walked = model.validation_errors
    assert model.k == min(walked, key=lambda k: (walked[k], k))


def test_monotone_increase_stops_after_patience(monkeypatch):
    # training point 0 has label 0, point 1 label 1; neighbour lists are crafted so that
    # the validation error grows by one point at every step down from k = 18
    train_x = np.zeros((20, 1))
    train_y = np.arange(20) % 2
    rows, truth = [], []
    for m in range(1, 10):
        rows.append([1] * m + [0] * (18 - m))  # truth 0, wrong while k < 2m
        truth.append(0)
        rows.append([0] * m + [1] * (18 - m))  # truth 1, wrong while k <= 2m
        truth.append(1)
    idx = np.array(rows)
    monkeypatch.setattr(knn, "nearest_neighbors", lambda *a, **kw: idx)
    model = train_knn(train_x, train_y, np.zeros((len(truth), 1)), np.array(truth))
    errs = model.validation_errors
    assert sorted(errs) == list(range(12, 19))
    assert all(errs[k - 1] > errs[k] for k in range(13, 19))
    assert model.k == 18


def test_empty_validation_falls_back(caplog):
    with caplog.at_level(logging.WARNING):
        model = train_knn(np.eye(3), np.array([0, 1, 2]), np.zeros((0, 3)), np.array([], dtype=int))
    assert model.k == 1 and "k=1" in caplog.text


def test_k1_scores_are_one_hot():
    tx = np.array([[0.0], [10.0]])
    model = KnnModel(1, tx, np.array([3, 7]))
    s = knn_scores(model, np.array([[1.0], [9.0]]))
    assert s[3, 0] == 1 and s[7, 1] == 1 and s.sum() == 2


def test_k5_counts():
    tx = np.arange(5.0)[:, None]
    model = KnnModel(5, tx, np.array([0, 0, 1, 2, 2]))
    s = knn_scores(model, np.array([[2.0]]))[:, 0]
    assert (s[0], s[1], s[2]) == (0.4, 0.2, 0.4)


def test_ties_go_to_lower_training_index():
    tx = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    idx = nearest_neighbors(tx, np.array([[0.0]]), 3)
    assert list(idx[0]) == [0, 1, 2]
    model = KnnModel(1, tx, np.array([4, 5, 6, 7]))
    assert classify_argmax(knn_scores(model, np.array([[0.0]])))[0] == 4


def test_exclude_self(rng):
    tx = rng.normal(size=(30, 20))
    idx = nearest_neighbors(tx, tx, 3, exclude_self=True)
    assert not np.any(idx == np.arange(30)[:, None])
    idx_direct = nearest_neighbors(tx[:, :4], tx[:, :4], 3, exclude_self=True)
    assert not np.any(idx_direct == np.arange(30)[:, None])


def test_expanded_distance_path_matches_direct(rng):
    tx = rng.integers(0, 2, size=(200, 64)).astype(float)
    q = rng.integers(0, 2, size=(50, 64)).astype(float)
    got = nearest_neighbors(tx, q, 5)
    d2 = ((q[:, None] - tx[None]) ** 2).sum(-1)
    ref = np.lexsort((np.broadcast_to(np.arange(200), d2.shape), d2), axis=1)[:, :5]
    np.testing.assert_array_equal(got, ref)


def test_argmax_agrees_with_neighbour_mode(rng):
    tx = rng.normal(size=(100, 3))
    ty = rng.integers(0, 26, 100)
    q = rng.normal(size=(40, 3))
    model = KnnModel(7, tx, ty)
    idx = nearest_neighbors(tx, q, 7)
    mode = [np.bincount(ty[i], minlength=26).argmax() for i in idx]
    np.testing.assert_array_equal(classify_argmax(knn_scores(model, q)), mode)


def test_dimension_mismatch():
    model = KnnModel(1, np.zeros((2, 3)), np.array([0, 1]))
    with pytest.raises(ValueError):
        knn_emissions(model, np.zeros((1, 4)))


def test_emissions_rows_normalised(rng):
    tx = rng.normal(size=(60, 2))
    model = KnnModel(3, tx, rng.integers(0, 26, 60))
    e = knn_emissions(model, rng.normal(size=(30, 2)))
    sums = e.sum(axis=1)
    assert np.allclose(sums[sums > 0], 1)
