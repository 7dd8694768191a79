"""Parzen-window classifier with a validation-driven bandwidth search.

The default window is an isotropic Gaussian of width ``h`` in every
dimension.  ``kernel="hypercube"`` switches to an axis-aligned cube of side
``h`` instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .emissions import N_CLASSES, normalize_log_emissions
from .knn import CHUNK, DIRECT_MAX_DIM

logger = logging.getLogger(__name__)

KERNELS = ("gaussian", "hypercube")


@dataclass
class ParzenModel:
    bandwidth_h: float
    train_points: np.ndarray
    train_labels: np.ndarray
    class_priors: np.ndarray
    kernel: str = "gaussian"
    search_trace: list = field(default_factory=list)

    def __post_init__(self):
        if not self.bandwidth_h > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @property
    def class_counts(self):
        return np.bincount(self.train_labels, minlength=N_CLASSES)


def class_priors(labels):
    counts = np.bincount(labels, minlength=N_CLASSES).astype(np.float64)
    return counts / counts.sum()


# upper bound for keeping a float32 query x train distance table during the search
CACHE_BYTES = 1_600_000_000


def _sqdist_block(block, train, norms):
    if norms is None:
        return kernels.sqdist_direct(block, train)
    return kernels.sqdist_expand(block, train, norms)


class DistanceTable:
    """Squared distances query x train, computed once in float32 chunks."""

    def __init__(self, train, query, chunk=CHUNK):
        train = np.ascontiguousarray(train, dtype=np.float64)
        query = np.ascontiguousarray(query, dtype=np.float64)
        norms = None if train.shape[1] <= DIRECT_MAX_DIM else np.einsum("ij,ij->i", train, train)
        self.chunk = chunk
        self.blocks = [
            _sqdist_block(query[s : s + chunk], train, norms).astype(np.float32)
            for s in range(0, query.shape[0], chunk)
        ]

    @staticmethod
    def fits(n_query, n_train):
        return 4 * n_query * n_train <= CACHE_BYTES


def _class_log_kernel_sums(train, labels, query, h, kernel, exclude_self=False, chunk=CHUNK, table=None):
    """``(N, 26)`` log of per-class kernel sums, without any normalising constant."""
    train = np.ascontiguousarray(train, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    out = np.empty((query.shape[0], N_CLASSES))
    if table is not None:
        chunk = table.chunk
    direct = train.shape[1] <= DIRECT_MAX_DIM
    norms = None if direct else np.einsum("ij,ij->i", train, train)
    for i, start in enumerate(range(0, query.shape[0], chunk)):
        block = query[start : start + chunk]
        offset = start if exclude_self else -1
        if kernel == "gaussian":
            d2 = table.blocks[i] if table is not None else _sqdist_block(block, train, norms)
            part = kernels.class_logsumexp(d2, labels, 1.0 / (2.0 * h * h), offset, N_CLASSES)
        else:
            counts = kernels.box_counts(block, train, labels, 0.5 * h, offset, N_CLASSES)
            with np.errstate(divide="ignore"):
                part = np.log(counts.astype(np.float64))
        out[start : start + block.shape[0]] = part
    return out


def log_likelihoods(model: ParzenModel, x, exclude_self=False, table=None) -> np.ndarray:
    """``(26, N)`` log class-conditional densities ``log P(x | C)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.train_points.shape[1]:
        raise ValueError("feature dimension does not match the model")
    sums = _class_log_kernel_sums(
        model.train_points, model.train_labels, x, model.bandwidth_h, model.kernel, exclude_self, table=table
    )
    n_c = model.class_counts.astype(np.float64)
    if exclude_self:
        # each point is missing from its own class
        n_c = np.broadcast_to(n_c, sums.shape).copy()
        n_c[np.arange(len(x)), model.train_labels[: len(x)]] -= 1
    h, d = model.bandwidth_h, x.shape[1]
    if model.kernel == "gaussian":
        log_norm = d * math.log(h * math.sqrt(2.0 * math.pi))
    else:
        log_norm = d * math.log(h)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = sums - np.log(n_c) - log_norm
    ll[~np.isfinite(ll)] = -np.inf
    return ll.T


def _log_posterior(model, ll):
    with np.errstate(divide="ignore"):
        return ll + np.log(model.class_priors)[:, None]


def parzen_posteriors(model: ParzenModel, x, exclude_self=False) -> np.ndarray:
    """``(26, N)`` class posteriors ``P(C | x)``; columns sum to one."""
    lp = _log_posterior(model, log_likelihoods(model, x, exclude_self))
    lp = _fallback_columns(lp, model)
    top = lp.max(axis=0, keepdims=True)
    p = np.exp(lp - top)
    return p / p.sum(axis=0, keepdims=True)


def _fallback_columns(lp, model):
    dead = ~np.isfinite(lp).any(axis=0)
    if dead.any():
        logger.warning("%d sample(s) with zero density in every class; using priors", dead.sum())
        with np.errstate(divide="ignore"):
            lp = lp.copy()
            lp[:, dead] = np.log(model.class_priors)[:, None]
    return lp


def parzen_scores(model: ParzenModel, x, exclude_self=False) -> np.ndarray:
    """Raw scores for hard decisions: the class posteriors."""
    return parzen_posteriors(model, x, exclude_self)


def parzen_emissions(model: ParzenModel, x) -> np.ndarray:
    """Row-normalised ``P(x_j | C)``.  Columns with no density anywhere fall back to the priors."""
    ll = log_likelihoods(model, x)
    dead = ~np.isfinite(ll).any(axis=0)
    if dead.any():
        logger.warning("%d emission column(s) underflowed; using class priors", dead.sum())
        with np.errstate(divide="ignore"):
            ll[:, dead] = np.log(model.class_priors)[:, None]
    return normalize_log_emissions(ll)


def validation_error(model: ParzenModel, val_x, val_y, table=None) -> float:
    lp = _log_posterior(model, log_likelihoods(model, val_x, table=table))
    lp = _fallback_columns(lp, model)
    return float(np.mean(np.argmax(lp, axis=0) != val_y))


def default_bracket(train_x):
    """``h_hi`` is the diagonal of the training bounding box, ``h_lo = 1e-3 * h_hi``."""
    span = np.ptp(np.asarray(train_x, dtype=np.float64), axis=0)
    h_hi = float(np.sqrt(np.sum(span * span)))
    if h_hi == 0:
        h_hi = 1.0
    return 1e-3 * h_hi, h_hi


def train_parzen(
    train_x,
    train_y,
    val_x,
    val_y,
    h_lo=None,
    h_hi=None,
    kernel="gaussian",
    rel_tol=1e-3,
    max_iter=40,
) -> ParzenModel:
    """Pick ``h`` by interval halving on the validation error.

    The bracket keeps a centre point; each round probes the midpoints of both
    halves and keeps the half-width sub-bracket around the best of the three,
    so the bracket shrinks towards the error's turning point.  The search
    ends when the bracket is narrower than ``rel_tol * h_hi`` or after
    ``max_iter`` rounds, and returns the best ``h`` seen (larger ``h`` on ties).
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y)
    lo_default, hi_default = default_bracket(train_x)
    h_hi = hi_default if h_hi is None else float(h_hi)
    h_lo = 1e-3 * h_hi if h_lo is None else float(h_lo)
    if not 0 < h_lo < h_hi:
        raise ValueError(f"bad bandwidth bracket [{h_lo}, {h_hi}]")
    priors = class_priors(train_y)
    trace = []
    table = None
    if kernel == "gaussian" and DistanceTable.fits(len(val_y), len(train_y)):
        table = DistanceTable(train_x, val_x)

    def error(h):
        model = ParzenModel(h, train_x, train_y, priors, kernel)
        e = validation_error(model, val_x, val_y, table)
        trace.append((h, e))
        logger.debug("parzen h=%.6g error=%.5f", h, e)
        return e

    a, b = h_lo, h_hi
    m = 0.5 * (a + b)
    error(a), error(b)
    em = error(m)
    for _ in range(max_iter):
        if b - a < rel_tol * h_hi:
            break
        x1, x2 = 0.5 * (a + m), 0.5 * (m + b)
        e1 = error(x1)
        if e1 < em:
            b, m, em = m, x1, e1
            continue
        e2 = error(x2)
        if e2 < em:
            a, m, em = m, x2, e2
        else:
            a, b = x1, x2
    best_h, best_e = min(trace, key=lambda t: (t[1], -t[0]))
    logger.info("parzen bandwidth %.6g (validation error %.5f, %d evaluations)", best_h, best_e, len(trace))
    return ParzenModel(best_h, train_x, train_y, priors, kernel, trace)
