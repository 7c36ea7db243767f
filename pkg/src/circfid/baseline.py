"""Gate-error-product fidelity estimate from a static error map."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .circuit import Circuit, GateKind, parse_circuit
from .errors import InputFormatError, UnpricedGateError
from .noise import NoiseModel, edge_key, parse_edge_key

_FREE = (GateKind.ID, GateKind.BARRIER, GateKind.RESET)


@dataclass(frozen=True)
class ErrorMap:
    eps_1q: dict = field(default_factory=dict)  # qubit -> {gate name: rate}
    eps_2q: dict = field(default_factory=dict)  # "a-b" -> rate
    eps_ro: tuple = ()

    def __post_init__(self):
        one = {int(q): {str(k): float(v) for k, v in rates.items()} for q, rates in dict(self.eps_1q).items()}
        two = {edge_key(*parse_edge_key(k)) if isinstance(k, str) else edge_key(*k): float(v)
               for k, v in dict(self.eps_2q).items()}
        ro = tuple(float(v) for v in self.eps_ro)
        rates = [v for r in one.values() for v in r.values()] + list(two.values()) + list(ro)
        if any(not 0.0 <= v <= 1.0 for v in rates):
            raise InputFormatError("error rates must lie in [0, 1]")
        object.__setattr__(self, "eps_1q", one)
        object.__setattr__(self, "eps_2q", two)
        object.__setattr__(self, "eps_ro", ro)

    def to_dict(self) -> dict:
        return {
            "eps_1q": {str(q): dict(sorted(r.items())) for q, r in sorted(self.eps_1q.items())},
            "eps_2q": dict(sorted(self.eps_2q.items(), key=lambda kv: parse_edge_key(kv[0]))),
            "eps_ro": list(self.eps_ro),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorMap":
        try:
            return cls(dict(data["eps_1q"]), dict(data["eps_2q"]), tuple(data["eps_ro"]))
        except (KeyError, TypeError, AttributeError) as exc:
            raise InputFormatError(f"malformed error map: {exc}") from None

    @classmethod
    def load(cls, path) -> "ErrorMap":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_noise_model(cls, nm: NoiseModel, gate_names=("rz", "sx", "x", "h", "s", "sdg", "z", "y")) -> "ErrorMap":
        """Calibration snapshot of a noise model: each rate is its effective error probability."""
        return cls(
            {q: {name: nm.gate1(q) for name in gate_names} for q in range(nm.n_qubits)},
            {k: nm.gate2(*parse_edge_key(k)) for k in nm.p2},
            tuple(nm.meas(q) for q in range(nm.n_qubits)),
        )

    def scaled_edge(self, edge, factor: float) -> "ErrorMap":
        key = edge_key(*edge)
        two = dict(self.eps_2q)
        two[key] = min(1.0, two[key] * factor)
        return ErrorMap(self.eps_1q, two, self.eps_ro)


def estimate_fidelity(c: Circuit, em: ErrorMap) -> float:
    """Product of ``(1 - eps)`` over priced gates and measured qubits."""
    f = 1.0
    for gate in c.gates:
        if gate.kind in _FREE:
            continue
        if gate.kind is GateKind.MEASURE:
            q = gate.qubits[0]
            if q >= len(em.eps_ro):
                raise UnpricedGateError(f"no readout error for qubit {q}")
            f *= 1.0 - em.eps_ro[q]
        elif len(gate.qubits) == 1:
            q = gate.qubits[0]
            try:
                f *= 1.0 - em.eps_1q[q][gate.name]
            except KeyError:
                raise UnpricedGateError(f"no error rate for {gate.name} on qubit {q}") from None
        else:
            key = edge_key(*gate.qubits)
            if key not in em.eps_2q:
                raise UnpricedGateError(f"no error rate for edge {key}")
            eps = em.eps_2q[key]
            # a swap executes as three CNOTs
            f *= (1.0 - eps) ** (3 if gate.kind is GateKind.SWAP else 1)
    return f


class GateErrorBaseline(RegressorMixin, BaseEstimator):
    """Scikit-learn face of :func:`estimate_fidelity`; ``fit`` only validates the map."""

    def __init__(self, error_map=None):
        self.error_map = error_map

    def fit(self, X=None, y=None):
        if not isinstance(self.error_map, ErrorMap):
            raise InputFormatError("GateErrorBaseline needs an ErrorMap")
        self.error_map_ = self.error_map
        return self

    def predict(self, X):
        em = getattr(self, "error_map_", None) or self.fit().error_map_
        return np.array([estimate_fidelity(parse_circuit(c) if isinstance(c, str) else c, em) for c in X])
