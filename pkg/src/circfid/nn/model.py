"""Embedding -> masked LSTM -> dense stack, with hand-written backpropagation through time.

Inputs are integer grids ``x[batch, lane, t]``; token 0 is padding. A timestep
whose lanes are all padding leaves the recurrent state untouched, so prefix
padding never changes a prediction. LSTM gates are stacked ``[i, f, g, o]``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    lanes: int
    vocab_size: int
    embed_dim: int = 64
    lstm_units: int = 256
    dense_sizes: tuple = (64, 16, 1)
    T: int = 500
    shared_embedding: bool = True

    def __post_init__(self):
        object.__setattr__(self, "dense_sizes", tuple(int(s) for s in self.dense_sizes))
        if not self.dense_sizes or self.dense_sizes[-1] != 1:
            raise ValueError("dense_sizes must end in 1")
        if min(self.lanes, self.vocab_size, self.embed_dim, self.lstm_units, self.T, *self.dense_sizes) < 1:
            raise ValueError("all model sizes must be >= 1")

    @property
    def input_width(self) -> int:
        return self.lanes * self.embed_dim

    @property
    def n_tables(self) -> int:
        return 1 if self.shared_embedding else self.lanes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dense_sizes"] = list(self.dense_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{**d, "dense_sizes": tuple(d["dense_sizes"])})


def param_count(cfg: ModelConfig) -> int:
    """Trainable parameters; the frozen padding row of each embedding table is excluded."""
    emb = cfg.n_tables * cfg.vocab_size * cfg.embed_dim
    H = cfg.lstm_units
    lstm = 4 * ((cfg.input_width + H) * H + H)
    dense, prev = 0, H
    for size in cfg.dense_sizes:
        dense += prev * size + size
        prev = size
    return emb + lstm + dense


def _xavier(gen, fan_out, fan_in, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=(fan_out, fan_in)).astype(dtype)


def param_shapes(cfg: ModelConfig) -> dict:
    H = cfg.lstm_units
    shapes = {
        "embedding": (cfg.n_tables, cfg.vocab_size + 1, cfg.embed_dim),
        "lstm_W": (4 * H, cfg.input_width),
        "lstm_U": (4 * H, H),
        "lstm_b": (4 * H,),
    }
    prev = H
    for k, size in enumerate(cfg.dense_sizes):
        shapes[f"dense{k}_w"] = (size, prev)
        shapes[f"dense{k}_b"] = (size,)
        prev = size
    return shapes


@dataclass
class Model:
    config: ModelConfig
    params: dict = field(repr=False)

    @property
    def dtype(self):
        return self.params["lstm_W"].dtype

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype) -> "Model":
        return Model(self.config, {k: v.astype(dtype) for k, v in self.params.items()})


def init_model(cfg: ModelConfig, seed=0, dtype=np.float32, forget_bias: float = 1.0) -> Model:
    """Xavier-uniform weights, forget-gate bias ``forget_bias``, embeddings U(-0.05, 0.05) with a zero padding row."""
    gen = np.random.default_rng(seed)
    H = cfg.lstm_units
    emb = gen.uniform(-0.05, 0.05, size=(cfg.n_tables, cfg.vocab_size + 1, cfg.embed_dim)).astype(dtype)
    emb[:, 0, :] = 0
    b = np.zeros(4 * H, dtype=dtype)
    b[H:2 * H] = forget_bias
    params = {
        "embedding": emb,
        "lstm_W": _xavier(gen, 4 * H, cfg.input_width, dtype),
        "lstm_U": _xavier(gen, 4 * H, H, dtype),
        "lstm_b": b,
    }
    prev = H
    for k, size in enumerate(cfg.dense_sizes):
        params[f"dense{k}_w"] = _xavier(gen, size, prev, dtype)
        params[f"dense{k}_b"] = np.zeros(size, dtype=dtype)
        prev = size
    return Model(cfg, params)


def _sigmoid(z):
    # split form avoids overflow warnings for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_input(model: Model, x) -> np.ndarray:
    x = np.asarray(x)
    cfg = model.config
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != cfg.lanes:
        raise ValueError(f"expected token grids of shape (n, {cfg.lanes}, T), got {x.shape}")
    if x.size and (x.min() < 0 or x.max() > cfg.vocab_size):
        raise ValueError(f"tokens must lie in [0, {cfg.vocab_size}]")
    return x


def _embed(model: Model, x: np.ndarray) -> np.ndarray:
    """(B, L, T) tokens -> (B, T, L*E) concatenated lane embeddings."""
    table = model.params["embedding"]
    B, L, T = x.shape
    if model.config.shared_embedding:
        e = table[0][x]  # (B, L, T, E)
    else:
        e = table[np.arange(L)[None, :, None], x]
    return e.transpose(0, 2, 1, 3).reshape(B, T, L * table.shape[2])


def _live_window(x: np.ndarray):
    """Mask (B, T) of non-padding steps, and the first step any sample is live."""
    mask = (x != 0).any(axis=1)
    live = np.nonzero(mask.any(axis=0))[0]
    start = int(live[0]) if live.size else x.shape[2]
    return mask, start


def forward(model: Model, x, cache: bool = False):
    """Predictions in (0, 1) for a batch of token grids; with ``cache`` also returns backprop state."""
    x = check_input(model, x)
    p = model.params
    dtype = model.dtype
    H = model.config.lstm_units
    B = x.shape[0]
    mask, start = _live_window(x)
    xw = x[:, :, start:]
    mw = mask[:, start:]
    Tw = xw.shape[2]
    emb = _embed(model, xw)
    proj = emb @ p["lstm_W"].T + p["lstm_b"]  # (B, Tw, 4H)
    U_T = p["lstm_U"].T
    h = np.zeros((B, H), dtype=dtype)
    c = np.zeros((B, H), dtype=dtype)
    if cache:
        hs = np.empty((Tw + 1, B, H), dtype=dtype)
        cs = np.empty((Tw + 1, B, H), dtype=dtype)
        gates = np.empty((Tw, B, 4 * H), dtype=dtype)
        hs[0], cs[0] = h, c
    for t in range(Tw):
        z = proj[:, t] + h @ U_T
        act = np.empty_like(z)
        act[:, :2 * H] = _sigmoid(z[:, :2 * H])
        act[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        act[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        i, f, gg, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        c_new = f * c + i * gg
        h_new = o * np.tanh(c_new)
        m = mw[:, t]
        if m.all():
            c, h = c_new, h_new
        else:
            c = np.where(m[:, None], c_new, c)
            h = np.where(m[:, None], h_new, h)
        if cache:
            gates[t] = act
            hs[t + 1], cs[t + 1] = h, c
    acts = [h]
    a = h
    n_dense = len(model.config.dense_sizes)
    for k in range(n_dense):
        zk = a @ p[f"dense{k}_w"].T + p[f"dense{k}_b"]
        a = _sigmoid(zk) if k == n_dense - 1 else np.maximum(zk, 0)
        acts.append(a)
    pred = a[:, 0]
    if not cache:
        return pred
    state = {"x": xw, "mask": mw, "emb": emb, "hs": hs, "cs": cs, "gates": gates, "acts": acts, "start": start}
    return pred, state


def backward(model: Model, state: dict, dpred: np.ndarray) -> dict:
    """Gradients of ``sum(dpred * pred)`` with respect to every parameter."""
    p = model.params
    cfg = model.config
    H = cfg.lstm_units
    dtype = model.dtype
    grads = {}
    acts = state["acts"]
    n_dense = len(cfg.dense_sizes)
    out = acts[-1]
    delta = (dpred.astype(dtype)[:, None]) * out * (1 - out)
    for k in range(n_dense - 1, -1, -1):
        a_in = acts[k]
        grads[f"dense{k}_w"] = delta.T @ a_in
        grads[f"dense{k}_b"] = delta.sum(axis=0)
        da = delta @ p[f"dense{k}_w"]
        if k > 0:
            delta = da * (acts[k] > 0)
        else:
            dh = da
    hs, cs, gates, mw = state["hs"], state["cs"], state["gates"], state["mask"]
    Tw, B = gates.shape[0], gates.shape[1]
    U = p["lstm_U"]
    dU = np.zeros_like(U)
    dproj = np.zeros((B, Tw, 4 * H), dtype=dtype)
    dc = np.zeros((B, H), dtype=dtype)
    dz = np.empty((B, 4 * H), dtype=dtype)
    for t in range(Tw - 1, -1, -1):
        act = gates[t]
        i, f, gg, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        c_prev = cs[t]
        # recompute the unmasked cell value; for masked rows cs[t+1] is the carried state
        c_t = f * c_prev + i * gg
        tc = np.tanh(c_t)
        dc_t = dc + dh * o * (1 - tc * tc)
        dz[:, :H] = dc_t * gg * i * (1 - i)
        dz[:, H:2 * H] = dc_t * c_prev * f * (1 - f)
        dz[:, 2 * H:3 * H] = dc_t * i * (1 - gg * gg)
        dz[:, 3 * H:] = dh * tc * o * (1 - o)
        m = mw[:, t]
        if m.all():
            dh = dz @ U
            dc = dc_t * f
        else:
            dz[~m] = 0
            dh = np.where(m[:, None], dz @ U, dh)
            dc = np.where(m[:, None], dc_t * f, dc)
        dU += dz.T @ hs[t]
        dproj[:, t] = dz
    flat = dproj.reshape(-1, 4 * H)
    emb = state["emb"]
    grads["lstm_U"] = dU
    grads["lstm_W"] = flat.T @ emb.reshape(-1, emb.shape[-1])
    grads["lstm_b"] = flat.sum(axis=0)
    demb = (flat @ p["lstm_W"]).reshape(B, Tw, cfg.lanes, cfg.embed_dim)
    x = state["x"]
    dtable = np.zeros_like(p["embedding"])
    E = cfg.embed_dim
    for lane in range(cfg.lanes):
        tab = 0 if cfg.shared_embedding else lane
        np.add.at(dtable[tab], x[:, lane, :].reshape(-1), demb[:, :, lane, :].reshape(-1, E))
    dtable[:, 0, :] = 0
    grads["embedding"] = dtable
    return grads


def mse_and_grads(model: Model, x, y):
    """Mean-squared error of a batch and its parameter gradients."""
    pred, state = forward(model, x, cache=True)
    y = np.asarray(y, dtype=model.dtype)
    err = pred - y
    loss = float(np.mean(err.astype(np.float64) ** 2))
    grads = backward(model, state, 2.0 * err / err.size)
    return loss, grads, pred


def predict(model: Model, x, batch_size: int = 256) -> np.ndarray:
    """Batched inference; batches are formed from similar-length grids to cut padding work."""
    x = check_input(model, x)
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    order = np.argsort(_first_live(x), kind="stable")
    for s in range(0, n, batch_size):
        idx = order[s:s + batch_size]
        out[idx] = forward(model, x[idx])
    return out


def _first_live(x: np.ndarray) -> np.ndarray:
    live = (x != 0).any(axis=1)
    first = np.argmax(live, axis=1)
    first[~live.any(axis=1)] = x.shape[2]
    return first
