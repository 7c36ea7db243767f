"""Parametric noise model consumed by the trajectory simulator."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

from .errors import InputFormatError, UnpricedGateError


def edge_key(a: int, b: int) -> str:
    a, b = sorted((int(a), int(b)))
    return f"{a}-{b}"


def parse_edge_key(key: str) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in key.split("-"))
    except ValueError:
        raise InputFormatError(f"bad edge key {key!r}, expected 'a-b'") from None
    return tuple(sorted((a, b)))


def _clamp(p: float) -> float:
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class NoiseModel:
    """Base error rates plus a global multiplier.

    ``p2`` is keyed by undirected edge (``"a-b"`` with ``a < b``). Effective
    rates are ``clamp(base * multiplier, 0, 1)``.
    """

    p1: tuple[float, ...]
    p2: dict = field(default_factory=dict)
    p_meas: tuple[float, ...] = ()
    p_reset: tuple[float, ...] = ()
    p_idle: tuple[float, ...] = ()
    multiplier: float = 1.0

    def __post_init__(self):
        n = len(self.p1)
        for name in ("p1", "p_meas", "p_reset", "p_idle"):
            values = tuple(float(v) for v in getattr(self, name)) or (0.0,) * n
            if len(values) != n:
                raise InputFormatError(f"{name} has {len(values)} entries, expected {n}")
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise InputFormatError(f"{name} rates must lie in [0, 1]")
            object.__setattr__(self, name, values)
        p2 = {}
        for key, value in dict(self.p2).items():
            a, b = parse_edge_key(key) if isinstance(key, str) else tuple(sorted(key))
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise InputFormatError(f"edge {key} outside the {n}-qubit device")
            if not 0.0 <= float(value) <= 1.0:
                raise InputFormatError("p2 rates must lie in [0, 1]")
            p2[edge_key(a, b)] = float(value)
        object.__setattr__(self, "p2", p2)
        if self.multiplier < 0:
            raise InputFormatError("multiplier must be >= 0")

    @property
    def n_qubits(self) -> int:
        return len(self.p1)

    @classmethod
    def uniform(cls, n_qubits, p1=0.0, p2=None, p_meas=0.0, p_reset=0.0, p_idle=0.0,
                multiplier=1.0, edges=None):
        """Same base rate everywhere; ``edges=None`` prices every qubit pair."""
        p2 = p1 if p2 is None else p2
        edges = combinations(range(n_qubits), 2) if edges is None else edges
        return cls(
            p1=(p1,) * n_qubits,
            p2={edge_key(a, b): p2 for a, b in edges},
            p_meas=(p_meas,) * n_qubits,
            p_reset=(p_reset,) * n_qubits,
            p_idle=(p_idle,) * n_qubits,
            multiplier=multiplier,
        )

    def with_multiplier(self, multiplier: float) -> "NoiseModel":
        return replace(self, multiplier=float(multiplier))

    def scaled(self, factor: float) -> "NoiseModel":
        return self.with_multiplier(self.multiplier * factor)

    # effective rates
    def gate1(self, q: int) -> float:
        return _clamp(self.p1[q] * self.multiplier)

    def gate2(self, a: int, b: int) -> float:
        try:
            return _clamp(self.p2[edge_key(a, b)] * self.multiplier)
        except KeyError:
            raise UnpricedGateError(f"no two-qubit error rate for edge {edge_key(a, b)}") from None

    def meas(self, q: int) -> float:
        return _clamp(self.p_meas[q] * self.multiplier)

    def reset(self, q: int) -> float:
        return _clamp(self.p_reset[q] * self.multiplier)

    def idle(self, q: int) -> float:
        return _clamp(self.p_idle[q] * self.multiplier)

    def to_dict(self) -> dict:
        return {
            "p1": list(self.p1),
            "p2": dict(sorted(self.p2.items(), key=lambda kv: parse_edge_key(kv[0]))),
            "p_meas": list(self.p_meas),
            "p_reset": list(self.p_reset),
            "p_idle": list(self.p_idle),
            "multiplier": self.multiplier,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        try:
            return cls(
                p1=tuple(data["p1"]),
                p2=dict(data.get("p2", {})),
                p_meas=tuple(data.get("p_meas", ())),
                p_reset=tuple(data.get("p_reset", ())),
                p_idle=tuple(data.get("p_idle", ())),
                multiplier=float(data.get("multiplier", 1.0)),
            )
        except (KeyError, TypeError) as exc:
            raise InputFormatError(f"malformed noise model: {exc}") from None

    @classmethod
    def load(cls, path) -> "NoiseModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
