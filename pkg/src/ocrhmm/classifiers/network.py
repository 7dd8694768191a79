"""One-against-all networks: 26 single-output tanh/logistic networks.

Each network sees min-max scaled inputs (``[-1, 1]`` per feature, fitted on
the training set), is trained in batch mode on the mean squared error with
scaled conjugate gradients, and stops early once the validation error has
failed to improve ``patience`` times in a row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import scg
from .emissions import N_CLASSES, normalize_emissions

logger = logging.getLogger(__name__)

PATIENCE = 6
MAX_EPOCHS = 1000


class TrainingError(RuntimeError):
    pass


@dataclass
class Network:
    """Parameters of one ``inputs -> tanh hidden -> logistic`` network."""

    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    epochs: int = 0

    @property
    def hidden(self):
        return self.w1.shape[0]

    def pack(self):
        return pack(self.w1, self.b1, self.w2, self.b2)

    @classmethod
    def unpack(cls, theta, n_in, hidden, epochs=0):
        w1, b1, w2, b2 = unpack(theta, n_in, hidden)
        return cls(w1, b1, w2, b2, epochs)

    def forward(self, x):
        return forward(self.pack(), x, self.w1.shape[1], self.hidden)


@dataclass
class OaaNetworkModel:
    networks: list
    hidden_nodes: int
    x_min: np.ndarray
    x_max: np.ndarray
    seed: int = 0
    epochs: list = field(default_factory=list)

    @property
    def training_epochs(self):
        return float(np.mean(self.epochs)) if self.epochs else 0.0

    def scale(self, x):
        return scale_inputs(x, self.x_min, self.x_max)


def n_params(n_in, hidden):
    return hidden * n_in + 2 * hidden + 1


def pack(w1, b1, w2, b2):
    return np.concatenate([w1.ravel(), b1, w2, [b2]])


def unpack(theta, n_in, hidden):
    i = hidden * n_in
    w1 = theta[:i].reshape(hidden, n_in)
    b1 = theta[i : i + hidden]
    w2 = theta[i + hidden : i + 2 * hidden]
    return w1, b1, w2, float(theta[-1])


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(theta, x, n_in, hidden):
    w1, b1, w2, b2 = unpack(theta, n_in, hidden)
    a = np.tanh(x @ w1.T + b1)
    return _sigmoid(a @ w2 + b2)


def mse(theta, x, t, n_in, hidden):
    out = forward(theta, x, n_in, hidden)
    return float(np.mean((out - t) ** 2))


def mse_grad(theta, x, t, n_in, hidden):
    w1, b1, w2, b2 = unpack(theta, n_in, hidden)
    a = np.tanh(x @ w1.T + b1)
    out = _sigmoid(a @ w2 + b2)
    d_out = 2.0 * (out - t) / len(t) * out * (1.0 - out)
    g_w2 = a.T @ d_out
    g_b2 = d_out.sum()
    d_hidden = np.outer(d_out, w2) * (1.0 - a * a)
    g_w1 = d_hidden.T @ x
    g_b1 = d_hidden.sum(axis=0)
    return pack(g_w1, g_b1, g_w2, g_b2)


def init_params(n_in, hidden, rng):
    """Uniform in ``+-1/sqrt(fan_in)`` for each layer."""
    r1 = 1.0 / np.sqrt(n_in)
    r2 = 1.0 / np.sqrt(hidden)
    return pack(
        rng.uniform(-r1, r1, (hidden, n_in)),
        rng.uniform(-r1, r1, hidden),
        rng.uniform(-r2, r2, hidden),
        rng.uniform(-r2, r2),
    )


def fit_scaling(x):
    x = np.asarray(x, dtype=np.float64)
    return x.min(axis=0), x.max(axis=0)


def scale_inputs(x, x_min, x_max):
    span = x_max - x_min
    safe = np.where(span > 0, span, 1.0)
    out = 2.0 * (np.asarray(x, dtype=np.float64) - x_min) / safe - 1.0
    out[:, span == 0] = 0.0
    return out


def train_binary_network(
    x, t, val_x, val_t, hidden, rng, max_epochs=MAX_EPOCHS, patience=PATIENCE, **scg_options
) -> Network:
    """Fit one network on already-scaled inputs; returns the best validation weights."""
    n_in = x.shape[1]
    theta0 = init_params(n_in, hidden, rng)
    best = {"theta": theta0, "err": np.inf, "epoch": 0, "fails": 0}
    have_val = val_x is not None and len(val_t) > 0

    def on_epoch(theta, epoch):
        if not have_val:
            best.update(theta=theta, epoch=epoch)
            return False
        err = mse(theta, val_x, val_t, n_in, hidden)
        if err < best["err"]:
            best.update(theta=theta.copy(), err=err, epoch=epoch, fails=0)
            return False
        best["fails"] += 1
        return best["fails"] >= patience

    if have_val:
        best["err"] = mse(theta0, val_x, val_t, n_in, hidden)
    result = scg.minimize(
        lambda th: mse(th, x, t, n_in, hidden),
        lambda th: mse_grad(th, x, t, n_in, hidden),
        theta0,
        max_iter=max_epochs,
        callback=on_epoch,
        **scg_options,
    )
    if not have_val:
        best["theta"] = result.x
    return Network.unpack(best["theta"], n_in, hidden, epochs=result.iterations)


def train_neural_oaa(
    train_x,
    train_y,
    val_x,
    val_y,
    hidden_nodes,
    seed=0,
    max_epochs=MAX_EPOCHS,
    patience=PATIENCE,
    sigma=scg.SIGMA,
    lam=scg.LAMBDA_INIT,
) -> OaaNetworkModel:
    if hidden_nodes < 1:
        raise ValueError("hidden_nodes must be >= 1")
    train_y = np.asarray(train_y)
    val_y = np.asarray(val_y)
    x_min, x_max = fit_scaling(train_x)
    x = scale_inputs(train_x, x_min, x_max)
    vx = scale_inputs(val_x, x_min, x_max) if len(val_y) else None
    streams = np.random.SeedSequence(seed).spawn(N_CLASSES)
    networks = []
    for c in range(N_CLASSES):
        t = (train_y == c).astype(np.float64)
        vt = (val_y == c).astype(np.float64)
        attempts = streams[c].spawn(2)
        for attempt, stream in enumerate(attempts):
            try:
                net = train_binary_network(
                    x, t, vx, vt, hidden_nodes, np.random.default_rng(stream),
                    max_epochs=max_epochs, patience=patience, sigma=sigma, lam=lam,
                )
                break
            except scg.NonFiniteLoss as exc:
                logger.warning("network %d attempt %d: %s", c, attempt + 1, exc)
        else:
            raise TrainingError(f"network for letter {chr(97 + c)} diverged twice")
        logger.debug("network %d trained for %d epochs", c, net.epochs)
        networks.append(net)
    model = OaaNetworkModel(networks, hidden_nodes, x_min, x_max, seed, [n.epochs for n in networks])
    logger.info("trained %d networks, mean epochs %.2f", N_CLASSES, model.training_epochs)
    return model


def nn_scores(model: OaaNetworkModel, x) -> np.ndarray:
    """``(26, N)`` raw network outputs, one row per letter."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != len(model.x_min):
        raise ValueError("feature dimension does not match the model")
    xs = model.scale(x)
    return np.stack([net.forward(xs) for net in model.networks])


def nn_emissions(model: OaaNetworkModel, x) -> np.ndarray:
    return normalize_emissions(nn_scores(model, x))
