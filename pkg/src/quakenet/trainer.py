"""Full-batch backpropagation training with momentum or Quickprop updates.

Training stops when the training error reaches the target, when the
validation error has not improved for ``patience`` epochs (overtraining), or
at ``max_epochs``. The returned network always carries the parameters of the
epoch with the lowest validation MSE.
"""
import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import stack
from .network import (
    DENSE_TANH,
    RADIAL_GAUSSIAN,
    DimensionMismatch,
    forward_layers,
    widths_from_params,
)

logger = logging.getLogger(__name__)

RULES = ("momentum", "quickprop")
STOP_TARGET = "target_reached"
STOP_OVERTRAINING = "overtraining"
STOP_MAX_EPOCHS = "max_epochs"
QUICKPROP_EPS = 1e-12


class TrainingError(ValueError):
    pass


class EmptySplit(TrainingError):
    pass


class NonFiniteLoss(ArithmeticError):
    """Training diverged. Carries the history so far and the best network seen."""

    def __init__(self, epoch, history, network):
        self.epoch = epoch
        self.history = history
        self.network = network
        super().__init__(f"non-finite loss at epoch {epoch}")


@dataclass
class TrainingConfig:
    rule: str = "quickprop"
    learning_rate: float = 0.05
    momentum: float = 0.9
    quickprop_max_growth: float = 1.75
    max_epochs: int = 10000
    patience: int = 25
    # per-output mean absolute normalized training error that ends training
    target_training_error: float = 0.10
    seed: int = 0
    shuffle_each_epoch: bool = False

    def __post_init__(self):
        if self.rule not in RULES:
            raise TrainingError(f"rule must be one of {RULES}")
        if not self.learning_rate > 0:
            raise TrainingError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise TrainingError("momentum must be in [0, 1)")
        if not self.quickprop_max_growth > 1:
            raise TrainingError("quickprop_max_growth must be > 1")
        if self.max_epochs < 0:
            raise TrainingError("max_epochs must be >= 0")
        if self.patience < 1:
            raise TrainingError("patience must be >= 1")
        if not 0 < self.target_training_error <= 1:
            raise TrainingError("target_training_error must be in (0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainingHistory:
    """Per-epoch errors. Entry 0 is the untrained network; entry k follows epoch k."""

    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    train_mae: list = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = STOP_MAX_EPOCHS
    cycles: int = 0
    wall_seconds: float = 0.0

    def summary(self):
        return {
            "best_epoch": self.best_epoch,
            "cycles": self.cycles,
            "stop_reason": self.stop_reason,
            "wall_seconds": self.wall_seconds,
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "val_mse"])
        for k, (a, b) in enumerate(zip(self.train_mse, self.val_mse)):
            w.writerow([k, repr(float(a)), repr(float(b))])
        return buf.getvalue()

    def write(self, csv_path, json_path):
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _backprop(network, acts, d2, T):
    """Gradients of sum_n 0.5*|y_n - t_n|^2 given a cached forward pass."""
    delta = acts[-1] - T
    grads = [None] * len(network.params)
    for k in range(len(network.params) - 1, -1, -1):
        layer, p = network.spec.layers[k], network.params[k]
        a_in, a_out = acts[k], acts[k + 1]
        if layer.kind == RADIAL_GAUSSIAN:
            sigma = widths_from_params(p["width_params"])
            g = delta * a_out
            g_centers = (g.T @ a_in - g.sum(axis=0)[:, None] * p["centers"]) / (sigma ** 2)[:, None]
            g_sigma = np.sum(g * d2, axis=0) / sigma ** 3
            grads[k] = {"centers": g_centers, "width_params": g_sigma * _sigmoid(p["width_params"])}
            # radial layer is always first; nothing to propagate further
            continue
        dz = delta * (1.0 - a_out ** 2) if layer.kind == DENSE_TANH else delta
        grads[k] = {"W": a_in.T @ dz, "b": dz.sum(axis=0)}
        if k > 0:
            delta = dz @ p["W"].T
    return grads


def backward(network, inputs, targets):
    """Analytic gradients of the summed half squared error.

    Works on a single sample or a batch (rows). Returns ``(grads, loss)`` where
    ``grads`` mirrors ``network.params``.
    """
    X = np.asarray(inputs, dtype=float)
    T = np.asarray(targets, dtype=float)
    if X.ndim == 1:
        X, T = X[None, :], T[None, :]
    if T.shape != (X.shape[0], network.spec.output_width):
        raise DimensionMismatch(f"targets must have shape ({X.shape[0]}, {network.spec.output_width})")
    acts, d2 = forward_layers(network, X)
    loss = 0.5 * float(np.sum((acts[-1] - T) ** 2))
    return _backprop(network, acts, d2, T), loss


def flatten_grads(grads):
    return np.concatenate([g[name].ravel() for g in grads for name in sorted(g)])


def update_momentum(params, grads, previous_deltas, config):
    """delta = -lr * g + momentum * previous_delta; returns (params + delta, delta)."""
    delta = -config.learning_rate * grads + config.momentum * previous_deltas
    return params + delta, delta


def update_quickprop(params, grads, previous_grads, previous_deltas, config):
    """Per-parameter secant step on the slope, growth-limited.

    The step is ``S/(S_prev - S) * delta_prev``, clipped to
    ``max_growth * |delta_prev|``. When the slope kept its sign and did not
    shrink, the secant would point uphill, so the step is the full
    ``max_growth * delta_prev`` instead. Parameters with no previous step or a
    vanishing slope difference take a plain gradient step.
    """
    mu = config.quickprop_max_growth
    denom = previous_grads - grads
    secant = (previous_deltas != 0) & (np.abs(denom) >= QUICKPROP_EPS)
    safe = np.where(secant, denom, 1.0)
    raw = grads / safe * previous_deltas
    cap = mu * np.abs(previous_deltas)
    step = np.clip(raw, -cap, cap)
    uphill = (grads * previous_grads > 0) & (np.abs(grads) >= np.abs(previous_grads))
    step = np.where(uphill, mu * previous_deltas, step)
    delta = np.where(secant, step, -config.learning_rate * grads)
    return params + delta, delta


def _mse(Y, T):
    return float(np.mean((Y - T) ** 2))


def _max_mae(Y, T):
    return float(np.max(np.mean(np.abs(Y - T), axis=0)))


def train(network, split, config):
    """Train a copy of ``network`` on ``split``; returns ``(network, history)``."""
    if not split.training or not split.validation:
        raise EmptySplit("training and validation sets must be non-empty")
    X, T = stack(split.training)
    Xv, Tv = stack(split.validation)
    n = len(X)
    rng = np.random.default_rng(config.seed)

    net = network.copy()
    flat = net.get_flat()
    history = TrainingHistory()
    start = time.perf_counter()

    def evaluate_training():
        if config.shuffle_each_epoch:
            perm = rng.permutation(n)
            Xs, Ts = X[perm], T[perm]
        else:
            Xs, Ts = X, T
        acts, d2 = forward_layers(net, Xs)
        return acts, d2, Ts

    def record(acts, Ts):
        history.train_mse.append(_mse(acts[-1], Ts))
        history.train_mae.append(_max_mae(acts[-1], Ts))
        history.val_mse.append(_mse(forward_layers(net, Xv)[0][-1], Tv))

    acts, d2, Ts = evaluate_training()
    record(acts, Ts)
    best_val, best_flat, since_best = history.val_mse[0], flat.copy(), 0
    prev_grads = np.zeros_like(flat)
    prev_deltas = np.zeros_like(flat)
    stop = STOP_MAX_EPOCHS
    epoch = 0

    while epoch < config.max_epochs:
        epoch += 1
        grads = flatten_grads(_backprop(net, acts, d2, Ts)) / n
        if config.rule == "momentum":
            flat, deltas = update_momentum(flat, grads, prev_deltas, config)
        else:
            flat, deltas = update_quickprop(flat, grads, prev_grads, prev_deltas, config)
        prev_grads, prev_deltas = grads, deltas
        if not np.all(np.isfinite(flat)):
            net.set_flat(best_flat)
            history.cycles, history.stop_reason = epoch, "diverged"
            history.wall_seconds = time.perf_counter() - start
            raise NonFiniteLoss(epoch, history, net)
        net.set_flat(flat)

        acts, d2, Ts = evaluate_training()
        record(acts, Ts)
        val = history.val_mse[-1]
        if not (np.isfinite(val) and np.isfinite(history.train_mse[-1])):
            net.set_flat(best_flat)
            history.cycles, history.stop_reason = epoch, "diverged"
            history.wall_seconds = time.perf_counter() - start
            raise NonFiniteLoss(epoch, history, net)

        if val < best_val:
            best_val, best_flat, since_best = val, flat.copy(), 0
            history.best_epoch = epoch
        else:
            since_best += 1

        if history.train_mae[-1] <= config.target_training_error:
            stop = STOP_TARGET
            break
        if since_best >= config.patience:
            stop = STOP_OVERTRAINING
            break

    net.set_flat(best_flat)
    history.cycles = epoch
    history.stop_reason = stop
    history.wall_seconds = time.perf_counter() - start
    logger.info("training stopped after %d epochs (%s); best epoch %d, val mse %.6g",
                epoch, stop, history.best_epoch, best_val)
    return net, history
