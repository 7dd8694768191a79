"""Scaled conjugate gradient minimisation (Moller, 1993).

Same control flow as the Netlab ``scg`` routine: a finite-difference
estimate of the curvature along the search direction, a Levenberg-Marquardt
style scale ``lam`` that is raised when the quadratic model is poor, and
Polak-Ribiere direction updates with a restart every ``n_params`` successes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA = 5e-5
LAMBDA_INIT = 5e-7
LAMBDA_MIN = 1e-15
LAMBDA_MAX = 1e100


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass
class ScgResult:
    x: np.ndarray
    f: float
    iterations: int
    stopped_by: str


def minimize(fun, grad, x0, max_iter=1000, callback=None, sigma=SIGMA, lam=LAMBDA_INIT, min_grad=1e-10):
    """Minimise ``fun`` starting at ``x0``.

    ``callback(x, iteration)`` runs after every iteration that moved ``x``
    and may return ``True`` to stop early (used for validation-based stopping).
    """
    x = np.array(x0, dtype=np.float64)
    n = x.size
    fold = fun(x)
    if not np.isfinite(fold):
        raise NonFiniteLoss("loss is not finite at the starting point")
    g = grad(x)
    d = -g
    success = True
    n_success = 0
    mu = kappa = theta = 0.0
    it = 0
    stopped = "max_iter"
    while it < max_iter:
        it += 1
        if success:
            mu = d @ g
            if mu >= 0:
                d = -g
                mu = d @ g
            kappa = d @ d
            if kappa < np.finfo(float).eps:
                stopped = "converged"
                break
            step = sigma / np.sqrt(kappa)
            theta = d @ (grad(x + step * d) - g) / step
        delta = theta + lam * kappa
        if delta <= 0:
            delta = lam * kappa
            lam = lam - theta / kappa
        alpha = -mu / delta
        x_new = x + alpha * d
        f_new = fun(x_new)
        if not np.isfinite(f_new):
            raise NonFiniteLoss(f"loss became {f_new} at iteration {it}")
        ratio = 2.0 * (f_new - fold) / (alpha * mu)
        if ratio >= 0:
            success = True
            n_success += 1
            x = x_new
            fold = f_new
            g_old = g
            g = grad(x)
            if g @ g < min_grad:
                stopped = "converged"
                if callback is not None:
                    callback(x, it)
                break
        else:
            success = False
        if ratio < 0.25:
            lam = min(4.0 * lam, LAMBDA_MAX)
        if ratio > 0.75:
            lam = max(0.5 * lam, LAMBDA_MIN)
        if n_success == n:
            d = -g
            n_success = 0
        elif success:
            gamma = (g_old - g) @ g / mu
            d = gamma * d - g
        if success and callback is not None and callback(x, it):
            stopped = "callback"
            break
    return ScgResult(x, float(fold), it, stopped)
