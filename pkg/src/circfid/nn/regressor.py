"""Scikit-learn estimator around the LSTM fidelity model."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .checkpoint import load_checkpoint, save_checkpoint
from .model import ModelConfig, init_model, param_count, predict
from .training import TrainConfig, TrainHistory, fine_tune, run_epochs


def check_token_grids(X, lanes=None) -> np.ndarray:
    """Validate ``(n_samples, lanes, T)`` non-negative integer token grids."""
    X = np.asarray(X)
    if X.ndim != 3:
        raise ValueError(f"expected a 3-d token array (n_samples, lanes, T), got shape {X.shape}")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.mod(X, 1) == 0):
            raise ValueError("token grids must hold integers")
        X = X.astype(np.int64)
    if X.size and X.min() < 0:
        raise ValueError("tokens must be non-negative")
    if lanes is not None and X.shape[1] != lanes:
        raise ValueError(f"model expects {lanes} lanes, got {X.shape[1]}")
    return X


class LSTMFidelityRegressor(RegressorMixin, BaseEstimator):
    """Predicts circuit fidelity (d-R² in [0, 1]) from token grids.

    Chain it after :class:`circfid.tokenizer.CircuitTokenizer` in a pipeline to
    go straight from circuits to predictions. ``vocab_size=None`` infers the
    table size from the largest token seen in ``fit``.
    """

    def __init__(self, embed_dim=64, lstm_units=256, dense_sizes=(64, 16, 1), shared_embedding=True,
                 vocab_size=None, batch_size=32, learning_rate=1e-3, epochs=20, patience=5,
                 validation_fraction=0.0, bucket=16, clip_norm=None, forget_bias=1.0, random_state=0, verbose=0):
        self.embed_dim = embed_dim
        self.lstm_units = lstm_units
        self.dense_sizes = dense_sizes
        self.shared_embedding = shared_embedding
        self.vocab_size = vocab_size
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.bucket = bucket
        self.clip_norm = clip_norm
        self.forget_bias = forget_bias
        self.random_state = random_state
        self.verbose = verbose

    def _train_config(self, epochs=None) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs if epochs is None else epochs,
            patience=self.patience,
            seed=self.random_state,
            bucket=self.bucket,
            clip_norm=self.clip_norm,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_token_grids(X)
        y = np.asarray(y, dtype=np.float64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different numbers of samples")
        if X_val is None and self.validation_fraction:
            gen = np.random.default_rng(self.random_state)
            perm = gen.permutation(X.shape[0])
            n_val = max(1, int(round(self.validation_fraction * X.shape[0])))
            X_val, y_val = X[perm[:n_val]], y[perm[:n_val]]
            X, y = X[perm[n_val:]], y[perm[n_val:]]
        vocab_size = self.vocab_size or int(max(X.max(), 0 if X_val is None else np.max(X_val)))
        cfg = ModelConfig(
            lanes=X.shape[1],
            vocab_size=max(vocab_size, 1),
            embed_dim=self.embed_dim,
            lstm_units=self.lstm_units,
            dense_sizes=tuple(self.dense_sizes),
            T=X.shape[2],
            shared_embedding=self.shared_embedding,
        )
        model = init_model(cfg, seed=self.random_state, forget_bias=self.forget_bias)
        if X_val is not None:
            X_val = check_token_grids(X_val, cfg.lanes)
        callback = None
        if self.verbose:
            def callback(epoch, hist):
                val = f" val {hist.val_loss[-1]:.5f}" if hist.val_loss else ""
                print(f"epoch {epoch + 1}: train {hist.train_loss[-1]:.5f}{val}", flush=True)
        model, history, optimizer = run_epochs(model, X, y, self._train_config(), X_val, y_val, callback=callback)
        self.model_ = model
        self.history_ = history
        self.optimizer_ = optimizer
        self.n_features_in_ = cfg.lanes
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_token_grids(X, self.model_.config.lanes)
        return predict(self.model_, X)

    def fine_tune(self, X, y, epochs=None):
        """Continue Adam from the fitted parameters on new samples only; returns self."""
        check_is_fitted(self, "model_")
        X = check_token_grids(X, self.model_.config.lanes)
        y = np.asarray(y, dtype=np.float64)
        self.model_ = fine_tune(self.model_, X, y, self._train_config(epochs), optimizer=getattr(self, "optimizer_", None))
        return self

    @property
    def n_parameters_(self) -> int:
        check_is_fitted(self, "model_")
        return param_count(self.model_.config)

    def save(self, path, vocab=None) -> None:
        check_is_fitted(self, "model_")
        save_checkpoint(self.model_, path, vocab=vocab, extra={"params": _jsonable(self.get_params())})

    @classmethod
    def load(cls, path):
        """Returns ``(estimator, header)``; the header carries the vocabulary when one was saved."""
        model, header = load_checkpoint(path)
        params = header.get("extra", {}).get("params", {})
        est = cls(**{k: tuple(v) if k == "dense_sizes" else v for k, v in params.items()})
        est.model_ = model
        est.history_ = TrainHistory()
        est.n_features_in_ = model.config.lanes
        return est, header


def _jsonable(params: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}
