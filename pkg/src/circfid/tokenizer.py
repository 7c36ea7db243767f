"""Circuits as per-lane label sequences, a frequency-ranked vocabulary, and padded integer grids."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .circuit import Circuit, GateKind, layerize, parse_circuit
from .errors import InputFormatError

IDLE = "none"
PAD = 0


class OutOfVocabularyError(InputFormatError):
    pass


@dataclass(frozen=True)
class LabelGrid:
    """``labels[lane][t]``; every lane has the same length (the circuit depth)."""

    labels: tuple[tuple[str, ...], ...]

    @property
    def lanes(self) -> int:
        return len(self.labels)

    @property
    def depth(self) -> int:
        return len(self.labels[0]) if self.labels else 0

    def column(self, t: int) -> tuple[str, ...]:
        return tuple(lane[t] for lane in self.labels)


def gate_label(gate) -> str:
    """``h2``, ``cx03``, ``m0``, ``r1``. Indices >= 10 are joined with ``_`` so labels stay unambiguous."""
    if gate.kind is GateKind.MEASURE:
        prefix = "m"
    elif gate.kind is GateKind.RESET:
        prefix = "r"
    else:
        prefix = gate.name
    if all(q < 10 for q in gate.qubits):
        return prefix + "".join(str(q) for q in gate.qubits)
    return prefix + "_".join(str(q) for q in gate.qubits)


def labelize(c: Circuit, device_width: int) -> LabelGrid:
    if c.n_qubits > device_width:
        raise InputFormatError(f"circuit width {c.n_qubits} exceeds device width {device_width}")
    layered = layerize(c)
    lanes = [[IDLE] * len(layered) for _ in range(device_width)]
    for t, layer in enumerate(layered.layers):
        for q, gate in enumerate(layer):
            if gate is not None:
                lanes[q][t] = gate_label(gate)
    return LabelGrid(tuple(tuple(lane) for lane in lanes))


@dataclass(frozen=True)
class Vocab:
    table: dict
    freq: dict

    def __len__(self):
        return len(self.table)

    def __contains__(self, label) -> bool:
        return label in self.table

    def inverse(self) -> dict:
        return {tok: lab for lab, tok in self.table.items()}

    def to_dict(self) -> dict:
        ordered = sorted(self.table, key=self.table.get)
        return {"labels": {k: self.table[k] for k in ordered}, "freq": {k: self.freq.get(k, 0) for k in ordered}}

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict()["labels"], separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        try:
            table = {str(k): int(v) for k, v in data["labels"].items()}
            freq = {str(k): int(v) for k, v in data.get("freq", {}).items()}
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InputFormatError(f"malformed vocabulary: {exc}") from None
        if sorted(table.values()) != list(range(1, len(table) + 1)):
            raise InputFormatError("vocabulary tokens must be exactly 1..|V|")
        return cls(table, freq)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_vocab(corpus: Iterable[LabelGrid]) -> Vocab:
    """Rank labels by descending corpus frequency (ties lexicographic); token 1 is the most common."""
    freq: Counter = Counter()
    for grid in corpus:
        for lane in grid.labels:
            freq.update(lane)
    if not freq:
        raise InputFormatError("cannot fit a vocabulary on an empty corpus")
    ranked = sorted(freq, key=lambda lab: (-freq[lab], lab))
    return Vocab({lab: i + 1 for i, lab in enumerate(ranked)}, dict(freq))


def encode(grid: LabelGrid, vocab: Vocab, T: int) -> np.ndarray:
    """``(lanes, T)`` int32 tokens: pre-padded with 0 when short, tail-truncated when long."""
    out = np.zeros((grid.lanes, T), dtype=np.int32)
    keep = min(grid.depth, T)
    offset = T - keep
    table = vocab.table
    for lane, labels in enumerate(grid.labels):
        try:
            out[lane, offset:] = [table[lab] for lab in labels[:keep]]
        except KeyError as exc:
            raise OutOfVocabularyError(f"label {exc.args[0]!r} is not in the vocabulary") from None
    return out


def decode(tokens: np.ndarray, vocab: Vocab) -> LabelGrid:
    """Inverse of :func:`encode` for grids that were not truncated; padding columns are dropped."""
    tokens = np.asarray(tokens)
    inv = vocab.inverse()
    live = np.nonzero(tokens.any(axis=0))[0]
    start = live[0] if live.size else tokens.shape[1]
    return LabelGrid(tuple(tuple(inv[int(t)] for t in lane[start:]) for lane in tokens))


def _as_circuit(item) -> Circuit:
    return parse_circuit(item) if isinstance(item, str) else item


class CircuitTokenizer(TransformerMixin, BaseEstimator):
    """Turns circuits (or QASM-subset text) into ``(n_samples, device_width, max_steps)`` token arrays.

    Parameters
    ----------
    device_width : int
        Number of lanes (physical qubits of the target device).
    max_steps : int
        Fixed number of timesteps ``T``.
    """

    def __init__(self, device_width=7, max_steps=500):
        self.device_width = device_width
        self.max_steps = max_steps

    def fit(self, X, y=None):
        self.vocab_ = fit_vocab(labelize(_as_circuit(c), self.device_width) for c in X)
        self.n_features_in_ = self.device_width
        return self

    def transform(self, X):
        check_is_fitted(self, "vocab_")
        grids = [labelize(_as_circuit(c), self.device_width) for c in X]
        out = np.zeros((len(grids), self.device_width, self.max_steps), dtype=np.int32)
        for i, grid in enumerate(grids):
            out[i] = encode(grid, self.vocab_, self.max_steps)
        return out

    @classmethod
    def from_vocab(cls, vocab: Vocab, device_width, max_steps=500) -> "CircuitTokenizer":
        tok = cls(device_width=device_width, max_steps=max_steps)
        tok.vocab_ = vocab
        tok.n_features_in_ = device_width
        return tok
