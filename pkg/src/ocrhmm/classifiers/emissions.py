"""Emission matrices: ``26 x N`` nonnegative scores, one column per test sample."""

import logging

import numpy as np

logger = logging.getLogger(__name__)

N_CLASSES = 26


def normalize_emissions(raw) -> np.ndarray:
    """Divide every row by its sum; all-zero rows stay zero (and are logged)."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ValueError("emission matrix must be 2-D")
    if np.any(raw < 0) or np.any(np.isnan(raw)):
        raise ValueError("emission matrix has negative or NaN entries")
    sums = raw.sum(axis=1, keepdims=True)
    zero = sums[:, 0] == 0
    if zero.any():
        logger.info("emission rows with zero mass: %s", np.flatnonzero(zero).tolist())
    out = np.divide(raw, sums, out=np.zeros_like(raw), where=sums > 0)
    return out


def normalize_log_emissions(log_raw) -> np.ndarray:
    """Row normalisation of ``exp(log_raw)`` carried out in log space."""
    log_raw = np.asarray(log_raw, dtype=np.float64)
    top = np.max(log_raw, axis=1, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(under="ignore"):
        scaled = np.exp(log_raw - safe)
    return normalize_emissions(scaled)


def classify_argmax(scores) -> np.ndarray:
    """Letter index of the largest score per column; ties go to the lower letter."""
    return np.argmax(np.asarray(scores), axis=0)
