"""Rewrite passes: basis decomposition, peephole cancellation, layout relabeling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .circuit import Circuit, Gate, GateKind, g
from .errors import InputFormatError

_PI = math.pi
_TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class BasisSet:
    allowed_1q: frozenset = field(default_factory=frozenset)
    allowed_2q: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        one = frozenset(GateKind(k) if isinstance(k, str) else k for k in self.allowed_1q)
        two = frozenset(GateKind(k) if isinstance(k, str) else k for k in self.allowed_2q)
        if not one and not two:
            raise ValueError("basis set is empty")
        object.__setattr__(self, "allowed_1q", one)
        object.__setattr__(self, "allowed_2q", two)

    def __contains__(self, kind: GateKind) -> bool:
        return kind in self.allowed_1q or kind in self.allowed_2q or not kind.is_unitary


IBM_BASIS = BasisSet(frozenset({"id", "rz", "sx", "x"}), frozenset({"cx"}))


def _rz(q, theta):
    return g("rz", q, params=(theta,))


# Each rule rewrites one gate into a word of (possibly further decomposable) gates.
_RULES = {
    GateKind.H: lambda q: [_rz(q, _PI / 2), g("sx", q), _rz(q, _PI / 2)],
    GateKind.S: lambda q: [_rz(q, _PI / 2)],
    GateKind.SDG: lambda q: [_rz(q, -_PI / 2)],
    GateKind.Z: lambda q: [_rz(q, _PI)],
    GateKind.Y: lambda q: [_rz(q, _PI), g("x", q)],
    GateKind.CZ: lambda a, b: [g("h", b), g("cx", a, b), g("h", b)],
    GateKind.SWAP: lambda a, b: [g("cx", a, b), g("cx", b, a), g("cx", a, b)],
}


def _lower(gate: Gate, basis: BasisSet, depth: int = 0) -> list[Gate]:
    if gate.kind in basis:
        return [gate]
    rule = _RULES.get(gate.kind)
    if rule is None or depth > 4:
        raise InputFormatError(f"no decomposition of {gate.name} into the basis")
    out = []
    for sub in rule(*gate.qubits):
        out.extend(_lower(sub, basis, depth + 1))
    return out


def decompose_to_basis(c: Circuit, basis: BasisSet = IBM_BASIS) -> Circuit:
    gates = []
    for gate in c.gates:
        gates.extend(_lower(gate, basis))
    return c.with_gates(gates)


_SELF_INVERSE = {GateKind.X, GateKind.Z, GateKind.H, GateKind.CX, GateKind.CZ, GateKind.SWAP}
_SYMMETRIC = {GateKind.CZ, GateKind.SWAP}


def _cancels(a: Gate, b: Gate) -> bool:
    if a.kind is not b.kind:
        return False
    if a.kind is GateKind.RZ:
        if a.qubits != b.qubits:
            return False
        r = math.remainder(a.params[0] + b.params[0], _TWO_PI)
        return abs(r) < 1e-12
    if a.kind not in _SELF_INVERSE:
        return False
    if a.kind in _SYMMETRIC:
        return sorted(a.qubits) == sorted(b.qubits)
    return a.qubits == b.qubits


def cancel_adjacent_inverses(c: Circuit) -> Circuit:
    """Remove adjacent inverse pairs until none remain.

    Two gates are adjacent when no other gate touches any of their qubits in
    between. Cancellation cascades, so ``[h0, x0, x0, h0]`` reduces to nothing.
    """
    out: list = []
    stacks: dict[int, list[int]] = {q: [] for q in range(c.n_qubits)}
    for gate in c.gates:
        qubits = gate.qubits if gate.qubits or gate.kind is not GateKind.BARRIER else tuple(range(c.n_qubits))
        tops = {stacks[q][-1] if stacks[q] else None for q in qubits}
        if len(tops) == 1:
            j = tops.pop()
            if j is not None and set(out[j].qubits) == set(qubits) and _cancels(out[j], gate):
                for q in qubits:
                    stacks[q].pop()
                out[j] = None
                continue
        out.append(gate)
        for q in qubits:
            stacks[q].append(len(out) - 1)
    return c.with_gates(gt for gt in out if gt is not None)


@dataclass(frozen=True)
class Layout:
    """Injective logical -> physical qubit assignment."""

    map: dict

    def __post_init__(self):
        m = {int(k): int(v) for k, v in dict(self.map).items()}
        if len(set(m.values())) != len(m):
            raise InputFormatError(f"layout is not injective: {m}")
        if any(v < 0 for v in m.values()):
            raise InputFormatError("negative physical qubit index")
        object.__setattr__(self, "map", dict(sorted(m.items())))

    def __getitem__(self, logical: int) -> int:
        return self.map[logical]

    def __len__(self):
        return len(self.map)

    @classmethod
    def identity(cls, n: int) -> "Layout":
        return cls({i: i for i in range(n)})

    @classmethod
    def from_sequence(cls, physical) -> "Layout":
        return cls(dict(enumerate(physical)))

    def as_tuple(self) -> tuple:
        return tuple(self.map[k] for k in sorted(self.map))

    def to_dict(self, device_width: int) -> dict:
        return {"map": {str(k): v for k, v in self.map.items()}, "device_width": device_width}

    @classmethod
    def load(cls, path) -> tuple["Layout", int]:
        try:
            data = json.loads(Path(path).read_text())
            return cls(data["map"]), int(data["device_width"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"malformed layout file: {exc}") from None


def remap(c: Circuit, layout: Layout, device_width: int) -> Circuit:
    """Rewrite every qubit index through ``layout`` onto a ``device_width`` register."""
    missing = set(c.used_qubits()) - set(layout.map)
    if missing:
        raise InputFormatError(f"layout does not place logical qubits {sorted(missing)}")
    if any(p >= device_width for p in layout.map.values()):
        raise InputFormatError(f"layout targets a qubit outside the {device_width}-qubit device")
    gates = [Gate(gt.kind, tuple(layout[q] for q in gt.qubits), gt.params, gt.clbit) for gt in c.gates]
    return Circuit(device_width, tuple(gates), c.n_clbits)
