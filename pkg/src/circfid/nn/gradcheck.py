"""Central finite-difference check of the analytic BPTT gradients."""
from __future__ import annotations

import numpy as np

from .model import Model, ModelConfig, forward, init_model, mse_and_grads


def tiny_config(vocab_size: int = 5) -> ModelConfig:
    return ModelConfig(lanes=2, vocab_size=vocab_size, embed_dim=4, lstm_units=8, dense_sizes=(4, 1), T=6)


def _loss(model: Model, x, y) -> float:
    pred = forward(model, x)
    return float(np.mean((pred - y) ** 2))


def grad_check(model: Model, x, y, eps: float = 1e-3):
    """Max relative error over every parameter entry, plus the per-tensor maxima.

    Relative error is ``|a - n| / max(|a| + |n|, 1e-8)``. Runs in float64.
    """
    model = model.astype(np.float64)
    y = np.asarray(y, dtype=np.float64)
    _, grads, _ = mse_and_grads(model, x, y)
    per_tensor = {}
    for name, param in model.params.items():
        numeric = np.zeros_like(param)
        flat = param.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + eps
            up = _loss(model, x, y)
            flat[j] = old - eps
            down = _loss(model, x, y)
            flat[j] = old
            numeric.reshape(-1)[j] = (up - down) / (2 * eps)
        if name == "embedding":
            numeric[:, 0, :] = 0  # padding row is frozen, not trainable
        a = grads[name]
        rel = np.abs(a - numeric) / np.maximum(np.abs(a) + np.abs(numeric), 1e-8)
        per_tensor[name] = float(rel.max())
    return max(per_tensor.values()), per_tensor


def relu_margin(model: Model, x) -> float:
    """Smallest |pre-activation| over the hidden ReLU units for batch ``x``."""
    _, state = forward(model, x, cache=True)
    a, margin = state["acts"][0], np.inf
    for k in range(len(model.config.dense_sizes) - 1):
        z = a @ model.params[f"dense{k}_w"].T + model.params[f"dense{k}_b"]
        margin = min(margin, float(np.abs(z).min()))
        a = np.maximum(z, 0)
    return margin


def demo_problem(seed: int = 0, batch: int = 3, eps: float = 1e-3):
    """Tiny float64 model and a padded batch for :func:`grad_check`.

    Weights are drawn larger than the training init and the seed is advanced
    until every ReLU input sits at least ``20 * eps`` from its kink, otherwise
    the central difference straddles the kink and measures nothing useful.
    """
    cfg = tiny_config()
    while True:
        model = init_model(cfg, seed=seed, dtype=np.float64)
        gen = np.random.default_rng(seed + 1)
        model.params["embedding"][:, 1:, :] = gen.uniform(-1, 1, size=model.params["embedding"][:, 1:, :].shape)
        for k in range(len(cfg.dense_sizes)):
            model.params[f"dense{k}_b"][:] = gen.uniform(-0.5, 0.5, size=cfg.dense_sizes[k])
        x = gen.integers(1, cfg.vocab_size + 1, size=(batch, cfg.lanes, cfg.T))
        for b in range(batch):
            x[b, :, : b + 1] = 0  # varying prefix padding exercises the mask
        y = gen.uniform(0.1, 0.9, size=batch)
        if relu_margin(model, x) > 20 * eps:
            return model, x, y
        seed += 1
