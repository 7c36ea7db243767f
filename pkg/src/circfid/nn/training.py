"""Adam, mini-batch MSE training with early stopping, and fine-tuning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import NumericalError
from .model import Model, _first_live, mse_and_grads, predict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 20
    patience: Optional[int] = 5
    seed: int = 0
    bucket: int = 16  # batches per length-sorted bucket; 0 or 1 disables bucketing
    clip_norm: Optional[float] = None  # rescale gradients whose global L2 norm exceeds this

    def __post_init__(self):
        if min(self.batch_size, self.epochs) < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size, epochs and learning_rate must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive or None")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * math.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            params[k] -= (lr_t * m / (np.sqrt(v) + self.eps)).astype(params[k].dtype)


def _batches(x: np.ndarray, n: int, tc: TrainConfig, gen: np.random.Generator) -> list[np.ndarray]:
    """Shuffled mini-batches; within each bucket of ``tc.bucket`` batches, samples of similar length are grouped."""
    perm = gen.permutation(n)
    bs = tc.batch_size
    if tc.bucket <= 1:
        return [perm[s:s + bs] for s in range(0, n, bs)]
    first = _first_live(x)
    span = bs * tc.bucket
    batches = []
    for s in range(0, n, span):
        chunk = perm[s:s + span]
        chunk = chunk[np.argsort(first[chunk], kind="stable")]
        batches.extend(chunk[k:k + bs] for k in range(0, chunk.size, bs))
    order = gen.permutation(len(batches))
    return [batches[i] for i in order]


def clip_gradients(grads: dict, max_norm: Optional[float]) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``; returns the original norm."""
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def evaluate_mse(model: Model, x, y) -> float:
    pred = predict(model, x)
    return float(np.mean((pred - np.asarray(y, dtype=np.float64)) ** 2))


def run_epochs(model: Model, x, y, tc: TrainConfig, x_val=None, y_val=None, optimizer: Optional[Adam] = None,
               history: Optional[TrainHistory] = None, callback=None):
    """Train ``model`` in place; restores the best-validation parameters when validation data is given.

    Returns ``(model, history, optimizer)``.
    """
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    optimizer = optimizer or Adam(model.params, tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon)
    history = history or TrainHistory()
    if n == 0:
        return model, history, optimizer
    if np.any((y < 0) | (y > 1)):
        raise ValueError("labels must lie in [0, 1]")
    gen = np.random.default_rng(tc.seed)
    has_val = x_val is not None and len(x_val) > 0
    best_loss, best_params, since_best = math.inf, None, 0
    for epoch in range(tc.epochs):
        total = 0.0
        for idx in _batches(x, n, tc, gen):
            loss, grads, _ = mse_and_grads(model, x[idx], y[idx])
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            clip_gradients(grads, tc.clip_norm)
            optimizer.step(model.params, grads)
            total += loss * idx.size
        train_loss = total / n
        history.train_loss.append(train_loss)
        monitor = train_loss
        if has_val:
            monitor = evaluate_mse(model, x_val, y_val)
            history.val_loss.append(monitor)
            if not math.isfinite(monitor):
                raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        log.info("epoch %d train %.5f val %s", epoch, train_loss, history.val_loss[-1] if has_val else "-")
        if callback is not None:
            callback(epoch, history)
        if monitor < best_loss:
            best_loss, since_best = monitor, 0
            history.best_epoch = len(history.train_loss) - 1
            if has_val:
                best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            since_best += 1
            if tc.patience is not None and since_best >= tc.patience:
                history.stopped_early = True
                break
    if best_params is not None:
        model.params.update(best_params)
    return model, history, optimizer


def train(model: Model, x, y, tc: TrainConfig = TrainConfig(), x_val=None, y_val=None, callback=None):
    """Fresh Adam run; returns ``(best model, history)``."""
    model, history, _ = run_epochs(model, x, y, tc, x_val, y_val, callback=callback)
    return model, history


def fine_tune(model: Model, x, y, tc: TrainConfig = TrainConfig(), optimizer: Optional[Adam] = None) -> Model:
    """Continue training from the current parameters on new samples only (no early stopping)."""
    tuned = model.copy()
    if len(x) == 0:
        return tuned
    tc_ft = TrainConfig(**{**tc.__dict__, "patience": None})
    run_epochs(tuned, x, y, tc_ft, optimizer=optimizer)
    return tuned
