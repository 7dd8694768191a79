"""Naive Bayes with a Gaussian kernel density per class and feature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .emissions import N_CLASSES, normalize_emissions
from .parzen import class_priors

BANDWIDTH_FLOOR = 1e-3


class NaiveBayesError(ValueError):
    pass


@dataclass
class FeatureKde:
    """Training values of one (class, feature) pair, stored as unique values + weights."""

    centers: np.ndarray
    log_weights: np.ndarray
    bandwidth: float

    def logpdf(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        return kernels.kde_logpdf(x, self.centers, self.log_weights, self.bandwidth)


@dataclass
class NaiveBayesModel:
    densities: list  # [class][feature] -> FeatureKde
    class_priors: np.ndarray

    @property
    def n_features(self):
        return len(self.densities[0])


def rule_of_thumb_bandwidth(values, floor=BANDWIDTH_FLOOR):
    """Normal-reference bandwidth ``sigma * (4 / (3 n)) ** (1/5)``, at least ``floor``."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    sigma = values.std(ddof=1) if n > 1 else 0.0
    return max(sigma * (4.0 / (3.0 * n)) ** 0.2, floor)


def fit_kde(values, floor=BANDWIDTH_FLOOR) -> FeatureKde:
    centers, counts = np.unique(np.asarray(values, dtype=np.float64), return_counts=True)
    return FeatureKde(centers, np.log(counts / counts.sum()), rule_of_thumb_bandwidth(values, floor))


def train_naive_bayes(train_x, train_y, floor=BANDWIDTH_FLOOR) -> NaiveBayesModel:
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(train_y) == 0:
        raise NaiveBayesError("empty training set")
    present = np.bincount(train_y, minlength=N_CLASSES)
    missing = np.flatnonzero(present == 0)
    if missing.size:
        names = ", ".join(chr(ord("a") + int(c)) for c in missing)
        raise NaiveBayesError(f"class(es) absent from training data: {names}")
    densities = []
    for c in range(N_CLASSES):
        rows = train_x[train_y == c]
        densities.append([fit_kde(rows[:, f], floor) for f in range(train_x.shape[1])])
    return NaiveBayesModel(densities, class_priors(train_y))


def log_likelihoods(model: NaiveBayesModel, x) -> np.ndarray:
    """``(26, N)`` sums of per-feature log densities."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.n_features:
        raise ValueError("feature dimension does not match the model")
    out = np.zeros((N_CLASSES, x.shape[0]))
    for f in range(x.shape[1]):
        values, inverse = np.unique(x[:, f], return_inverse=True)
        for c in range(N_CLASSES):
            out[c] += model.densities[c][f].logpdf(values)[inverse]
    return out


def nb_posteriors(model: NaiveBayesModel, x) -> np.ndarray:
    lp = log_likelihoods(model, x) + np.log(model.class_priors)[:, None]
    p = np.exp(lp - lp.max(axis=0, keepdims=True))
    return p / p.sum(axis=0, keepdims=True)


def nb_scores(model: NaiveBayesModel, x) -> np.ndarray:
    return nb_posteriors(model, x)


def nb_emissions(model: NaiveBayesModel, x) -> np.ndarray:
    """Likelihoods shifted by each column's maximum in log space, then row-normalised."""
    ll = log_likelihoods(model, x)
    return normalize_emissions(np.exp(ll - ll.max(axis=0, keepdims=True)))
