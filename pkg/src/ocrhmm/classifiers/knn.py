"""k-nearest neighbours with Euclidean distance and validation search for k."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .emissions import N_CLASSES, classify_argmax, normalize_emissions

logger = logging.getLogger(__name__)

K_MAX = 18
PATIENCE = 6
CHUNK = 1024
# below this dimension distances are summed directly, above it via one GEMM
DIRECT_MAX_DIM = 16


@dataclass
class KnnModel:
    k: int
    train_points: np.ndarray
    train_labels: np.ndarray
    validation_errors: dict | None = None

    def __post_init__(self):
        if not 1 <= self.k <= K_MAX:
            raise ValueError(f"k must lie in [1, {K_MAX}], got {self.k}")


def nearest_neighbors(train, query, k, exclude_self=False, chunk=CHUNK):
    """Indices of the ``k`` nearest training points per query, nearest first.

    Equal distances are ordered by training index.  With ``exclude_self``
    the query set must be the training set and each point skips itself.
    """
    train = np.ascontiguousarray(train, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if train.shape[1] != query.shape[1]:
        raise ValueError(f"dimension mismatch: train {train.shape[1]}, query {query.shape[1]}")
    available = train.shape[0] - (1 if exclude_self else 0)
    if k > available:
        raise ValueError(f"k={k} exceeds {available} usable training points")
    direct = train.shape[1] <= DIRECT_MAX_DIM
    norms = None if direct else np.einsum("ij,ij->i", train, train)
    out = np.empty((query.shape[0], k), dtype=np.int64)
    for start in range(0, query.shape[0], chunk):
        block = query[start : start + chunk]
        if direct:
            d2 = kernels.sqdist_direct(block, train)
        else:
            d2 = kernels.sqdist_expand(block, train, norms)
        if exclude_self:
            rows = np.arange(block.shape[0])
            d2[rows, start + rows] = np.inf
        out[start : start + block.shape[0]] = kernels.smallest_k(d2, k)
    return out


def vote_counts(neighbor_labels, k):
    """``(26, N)`` label counts among the first ``k`` neighbours."""
    n = neighbor_labels.shape[0]
    counts = np.zeros((N_CLASSES, n))
    cols = np.arange(n)
    for j in range(k):
        np.add.at(counts, (neighbor_labels[:, j], cols), 1.0)
    return counts


def train_knn(train_x, train_y, val_x, val_y, k_max=K_MAX, patience=PATIENCE) -> KnnModel:
    """Walk k down from ``k_max`` and keep the k with the lowest validation error.

    The walk stops once the error has gone up ``patience`` times relative to
    the previous k; ties in error go to the smaller k.
    """
    train_y = np.asarray(train_y)
    if len(val_y) == 0:
        logger.warning("empty validation set, falling back to k=1")
        return KnnModel(1, np.asarray(train_x, dtype=np.float64), train_y)
    k_max = min(k_max, len(train_y))
    idx = nearest_neighbors(train_x, val_x, k_max)
    labels = train_y[idx]
    val_y = np.asarray(val_y)
    errors = {}
    increases = 0
    prev = None
    for k in range(k_max, 0, -1):
        pred = classify_argmax(vote_counts(labels, k))
        err = float(np.mean(pred != val_y))
        errors[k] = err
        if prev is not None and err > prev:
            increases += 1
            if increases >= patience:
                break
        prev = err
    best = min(errors, key=lambda k: (errors[k], k))
    logger.info("kNN validation errors %s -> k=%d", errors, best)
    return KnnModel(best, np.asarray(train_x, dtype=np.float64), train_y, errors)


def knn_scores(model: KnnModel, test_x, exclude_self=False) -> np.ndarray:
    """Raw ``(26, N)`` scores: neighbour label counts divided by k."""
    test_x = np.asarray(test_x, dtype=np.float64)
    if test_x.shape[1] != model.train_points.shape[1]:
        raise ValueError("feature dimension does not match the model")
    idx = nearest_neighbors(model.train_points, test_x, model.k, exclude_self=exclude_self)
    return vote_counts(model.train_labels[idx], model.k) / model.k


def knn_emissions(model: KnnModel, test_x) -> np.ndarray:
    return normalize_emissions(knn_scores(model, test_x))
