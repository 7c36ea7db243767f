"""End-to-end glue shared by the CLI and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import rng
from .baseline import ErrorMap, estimate_fidelity
from .circuit import Circuit, cnot_count, depth, parse_circuit
from .dataset import circuits_and_labels, split
from .errors import InputFormatError
from .metrics import align, d_r2, expected_ideal_counts
from .noise import NoiseModel
from .nn.regressor import LSTMFidelityRegressor
from .simulator import run_ideal, run_noisy
from .tokenizer import CircuitTokenizer, Vocab
from .transpile import IBM_BASIS, Layout, decompose_to_basis, remap


def prepare_circuit(c: Circuit, device_width: int, layout: Optional[Layout] = None) -> Circuit:
    """Lower to the device basis and place on physical qubits (identity placement by default)."""
    if c.n_qubits > device_width:
        raise InputFormatError(f"circuit uses {c.n_qubits} qubits but the device has {device_width}")
    c = decompose_to_basis(c, IBM_BASIS)
    return remap(c, layout or Layout.identity(c.n_qubits), device_width)


@dataclass
class FidelityPredictor:
    """Tokenizer and fitted regressor travelling together."""

    tokenizer: CircuitTokenizer
    regressor: LSTMFidelityRegressor

    def predict(self, circuits: Sequence[Circuit]) -> np.ndarray:
        if not len(circuits):
            return np.zeros(0)
        return self.regressor.predict(self.tokenizer.transform(circuits))

    def __call__(self, circuits):
        return self.predict(circuits)

    def save(self, path) -> None:
        self.regressor.save(path, vocab=self.tokenizer.vocab_)

    @classmethod
    def load(cls, path) -> "FidelityPredictor":
        reg, header = LSTMFidelityRegressor.load(path)
        if "vocab" not in header:
            raise InputFormatError(f"checkpoint {path} carries no vocabulary")
        vocab = Vocab.from_dict({"labels": header["vocab"]})
        cfg = reg.model_.config
        return cls(CircuitTokenizer.from_vocab(vocab, cfg.lanes, cfg.T), reg)


def train_predictor(records, device_width: int, model_params: Optional[dict] = None, max_steps: int = 500,
                    ratios=(0.7, 0.2, 0.1), seed: int = 0):
    """Split ``records``, fit the vocabulary and the regressor on train, early-stop on val.

    Returns ``(predictor, (train, val, test))`` where each part is ``(circuits, labels)``.
    """
    parts = [circuits_and_labels(p) for p in split(records, ratios, seed)]
    (c_tr, y_tr), (c_va, y_va), _ = parts
    tok = CircuitTokenizer(device_width=device_width, max_steps=max_steps).fit(c_tr + c_va)
    params = {"random_state": seed, **(model_params or {})}
    reg = LSTMFidelityRegressor(**params)
    reg.fit(tok.transform(c_tr), y_tr, tok.transform(c_va), y_va)
    return FidelityPredictor(tok, reg), parts


def rmse(pred, target) -> float:
    pred, target = np.broadcast_arrays(np.asarray(pred, dtype=float), np.asarray(target, dtype=float))
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def reference_rmses(parts) -> dict:
    """Test RMSE of a constant-mean predictor and of a depth-only linear fit, both fit on train."""
    from sklearn.linear_model import LinearRegression

    (c_tr, y_tr), _, (c_te, y_te) = parts
    d_tr = np.array([[depth(c)] for c in c_tr], dtype=float)
    d_te = np.array([[depth(c)] for c in c_te], dtype=float)
    linear = LinearRegression().fit(d_tr, y_tr)
    return {
        "constant_mean_rmse": rmse(np.mean(y_tr), y_te),
        "depth_linear_rmse": rmse(linear.predict(d_te), y_te),
    }


def trial_fidelities(c: Circuit, nm: NoiseModel, trials: int, shots: int, seed: int) -> np.ndarray:
    """d-R² of ``trials`` independent noisy executions against the expected ideal counts."""
    ideal = expected_ideal_counts(run_ideal(c), shots)
    return np.array([d_r2(align(ideal, run_noisy(c, nm, shots, rng.derive_seed(seed, t)))) for t in range(trials)])


EVAL_COLUMNS = ("name", "depth", "#CNOT", "mean fidelity", "baseline prediction", "baseline RMSE",
                "model prediction", "model RMSE", "RMSE ratio")


def evaluate(named_circuits, nm: NoiseModel, error_map: ErrorMap, predictor: Optional[FidelityPredictor],
             trials: int = 50, shots: int = 1024, seed: int = 0) -> list[dict]:
    """One row per circuit: measured mean d-R² over trials and each estimator's per-trial RMSE.

    Circuits must already be placed on the device. The ratio column is baseline RMSE
    over model RMSE (above 1 means the model is closer).
    """
    names = [n for n, _ in named_circuits]
    circuits = [c for _, c in named_circuits]
    model_pred = predictor.predict(circuits) if predictor is not None else [None] * len(circuits)
    rows = []
    for i, (name, c) in enumerate(zip(names, circuits)):
        samples = trial_fidelities(c, nm, trials, shots, rng.derive_seed(seed, i))
        base = estimate_fidelity(c, error_map)
        row = {
            "name": name,
            "depth": depth(c),
            "#CNOT": cnot_count(c),
            "mean fidelity": float(samples.mean()),
            "baseline prediction": base,
            "baseline RMSE": rmse(base, samples),
            "model prediction": None,
            "model RMSE": None,
            "RMSE ratio": None,
        }
        if model_pred[i] is not None:
            row["model prediction"] = float(model_pred[i])
            row["model RMSE"] = rmse(model_pred[i], samples)
            row["RMSE ratio"] = row["baseline RMSE"] / row["model RMSE"] if row["model RMSE"] > 0 else float("inf")
        rows.append(row)
    return rows


def read_circuit(path) -> Circuit:
    with open(path) as fh:
        return parse_circuit(fh.read())
