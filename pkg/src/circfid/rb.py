"""Randomized-benchmarking circuit generation.

An RB circuit is a random word of Clifford gates followed by its gate-wise
reversed inverse, so its ideal action is the identity and every measured bit
reads 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng
from .circuit import Circuit, Gate, GateKind, g
from .transpile import Layout, remap

ONE_QUBIT_CLIFFORDS = ("x", "z", "s", "h")
TWO_QUBIT_CLIFFORDS = ("cx", "cz", "swap")

_INVERSE = {
    GateKind.ID: ("id",),
    GateKind.X: ("x",),
    GateKind.Y: ("y",),
    GateKind.Z: ("z",),
    GateKind.H: ("h",),
    GateKind.S: ("z", "s"),
    GateKind.SDG: ("s",),
    GateKind.SX: ("sx", "sx", "sx"),
    GateKind.CX: ("cx",),
    GateKind.CZ: ("cz",),
    GateKind.SWAP: ("swap",),
}


def ordered_pairs(n: int, edges=None) -> list[tuple[int, int]]:
    """Ordered distinct qubit pairs, optionally restricted to undirected ``edges``."""
    if edges is None:
        return [(a, b) for a in range(n) for b in range(n) if a != b]
    pairs = set()
    for a, b in edges:
        pairs.add((a, b))
        pairs.add((b, a))
    return sorted(pairs)


def random_clifford_word(n: int, length: int, seed, pairs: Optional[Sequence] = None) -> Circuit:
    """``length`` uniformly drawn Clifford gates on ``n`` qubits.

    The gate kind is uniform over the available kinds (the three 2-qubit kinds
    are available only when a qubit pair exists), then the target is uniform
    over qubits or over ``pairs`` (default: all ordered pairs).
    """
    if n < 1 or length < 1:
        raise ValueError("need n >= 1 and length >= 1")
    gen = np.random.default_rng(seed)
    pairs = ordered_pairs(n) if pairs is None else list(pairs)
    kinds = ONE_QUBIT_CLIFFORDS + (TWO_QUBIT_CLIFFORDS if pairs else ())
    gates = []
    for k in gen.integers(0, len(kinds), size=length):
        name = kinds[k]
        if k < len(ONE_QUBIT_CLIFFORDS):
            gates.append(g(name, int(gen.integers(n))))
        else:
            a, b = pairs[int(gen.integers(len(pairs)))]
            gates.append(g(name, a, b))
    return Circuit(n, tuple(gates))


def inverse_gates(gates: Sequence[Gate]) -> list[Gate]:
    out = []
    for gate in reversed(gates):
        if gate.kind is GateKind.BARRIER:
            out.append(gate)
            continue
        if gate.kind is GateKind.RZ:
            out.append(g("rz", *gate.qubits, params=(-gate.params[0],)))
            continue
        word = _INVERSE.get(gate.kind)
        if word is None:
            raise ValueError(f"{gate.name} is not invertible")
        out.extend(g(name, *gate.qubits) for name in word)
    return out


def append_inverse(c: Circuit) -> Circuit:
    return c.with_gates(list(c.gates) + inverse_gates(c.gates))


@dataclass(frozen=True)
class RBSpec:
    n_active: int
    seq_len: int
    seed: int
    gates_per_element: Optional[tuple[int, int]] = None  # inclusive range, default (5n, 20n)
    placement: Optional[Layout] = None
    device_width: Optional[int] = None
    coupling_edges: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_active < 1 or self.seq_len < 1:
            raise ValueError("n_active and seq_len must be >= 1")
        if self.placement is not None and len(self.placement) != self.n_active:
            raise ValueError("placement must place exactly the active qubits")

    @property
    def word_range(self) -> tuple[int, int]:
        if self.gates_per_element is not None:
            return tuple(self.gates_per_element)
        return 5 * self.n_active, 20 * self.n_active


def generate_rb_circuit(spec: RBSpec) -> Circuit:
    """Random words, their reversal, then ``measure q[i] -> c[i]`` on every active qubit.

    With a placement the circuit is remapped onto the device; with
    ``coupling_edges`` the 2-qubit gates are drawn only on logical pairs whose
    physical images are coupled.
    """
    n = spec.n_active
    placement = spec.placement or Layout.identity(n)
    pairs = None
    if spec.coupling_edges is not None:
        coupled = {tuple(sorted(e)) for e in spec.coupling_edges}
        pairs = [(a, b) for a, b in ordered_pairs(n) if tuple(sorted((placement[a], placement[b]))) in coupled]
    lo, hi = spec.word_range
    gen = np.random.default_rng(rng.derive_seed(spec.seed, 0))
    prefix = []
    for element in range(spec.seq_len):
        length = int(gen.integers(lo, hi + 1))
        word = random_clifford_word(n, length, rng.derive_seed(spec.seed, 1, element), pairs)
        prefix.extend(word.gates)
    body = Circuit(n, tuple(prefix + inverse_gates(prefix)))
    logical = body.measure_all()
    width = spec.device_width or max(placement.map.values()) + 1
    return remap(logical, placement, width)
