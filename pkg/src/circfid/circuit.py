"""Circuit representation, the QASM-subset text format, and ASAP layering."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import CircuitSyntaxError


class GateKind(Enum):
    ID = "id"
    X = "x"
    Y = "y"
    Z = "z"
    H = "h"
    S = "s"
    SDG = "sdg"
    SX = "sx"
    RZ = "rz"
    CX = "cx"
    CZ = "cz"
    SWAP = "swap"
    MEASURE = "measure"
    RESET = "reset"
    BARRIER = "barrier"

    @property
    def arity(self) -> int:
        return 2 if self in _TWO_QUBIT else 1

    @property
    def param_count(self) -> int:
        return 1 if self is GateKind.RZ else 0

    @property
    def is_unitary(self) -> bool:
        return self not in (GateKind.MEASURE, GateKind.RESET, GateKind.BARRIER)


_TWO_QUBIT = frozenset({GateKind.CX, GateKind.CZ, GateKind.SWAP})
_BY_NAME = {k.value: k for k in GateKind}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    clbit: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", gate_kind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind.value} {self.qubits}")
        if self.kind is GateKind.BARRIER:
            return
        if len(self.qubits) != self.kind.arity:
            raise ValueError(f"{self.kind.value} acts on {self.kind.arity} qubit(s), got {self.qubits}")
        if len(self.params) != self.kind.param_count:
            raise ValueError(f"{self.kind.value} takes {self.kind.param_count} parameter(s)")
        if (self.kind is GateKind.MEASURE) != (self.clbit is not None):
            raise ValueError("exactly the measure gate carries a classical bit")

    @property
    def name(self) -> str:
        return self.kind.value


def gate_kind(name: str) -> GateKind:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown gate {name!r}") from None


def g(name: str, *qubits: int, params=(), clbit=None) -> Gate:
    """Shorthand constructor: ``g("cx", 0, 1)``, ``g("rz", 0, params=(pi,))``."""
    return Gate(gate_kind(name), qubits, params, clbit)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    n_clbits: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 0 or self.n_clbits < 0:
            raise ValueError("register sizes must be non-negative")
        seen_clbits = set()
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit {q} out of range for width {self.n_qubits}")
            if gate.kind is GateKind.MEASURE:
                if not 0 <= gate.clbit < self.n_clbits:
                    raise ValueError(f"classical bit {gate.clbit} out of range")
                if gate.clbit in seen_clbits:
                    raise ValueError(f"classical bit {gate.clbit} measured twice")
                seen_clbits.add(gate.clbit)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def with_gates(self, gates) -> "Circuit":
        return Circuit(self.n_qubits, tuple(gates), self.n_clbits)

    def measured_clbits(self) -> list[int]:
        return sorted(gt.clbit for gt in self.gates if gt.kind is GateKind.MEASURE)

    def measure_map(self) -> dict[int, int]:
        """clbit -> qubit for every measurement."""
        return {gt.clbit: gt.qubits[0] for gt in self.gates if gt.kind is GateKind.MEASURE}

    def used_qubits(self) -> list[int]:
        return sorted({q for gt in self.gates for q in gt.qubits})

    def measure_all(self, qubits=None) -> "Circuit":
        """Append ``measure q[i] -> c[k]`` for each listed qubit (default all)."""
        qubits = range(self.n_qubits) if qubits is None else qubits
        gates = list(self.gates)
        start = self.n_clbits
        for k, q in enumerate(qubits):
            gates.append(Gate(GateKind.MEASURE, (q,), (), start + k))
        return Circuit(self.n_qubits, gates, start + len(list(qubits)))


# ---------------------------------------------------------------------------
# text format

_QREG = re.compile(r"^qreg\s+q\s*\[\s*(\d+)\s*\]\s*;$")
_CREG = re.compile(r"^creg\s+c\s*\[\s*(\d+)\s*\]\s*;$")
_QARG = re.compile(r"^q\s*\[\s*(\d+)\s*\]$")
_CARG = re.compile(r"^c\s*\[\s*(\d+)\s*\]$")
_STMT = re.compile(r"^([a-z_][a-z0-9_]*)\s*(?:\(([^)]*)\))?\s*(.*?)\s*;$")
_ANGLE = re.compile(
    r"^(?P<sign>[-+])?\s*(?:(?P<num>[0-9.eE+-]+)\s*\*\s*)?pi(?:\s*/\s*(?P<den>[0-9.eE+-]+))?$"
)


def _parse_angle(text: str, line: int, col: int) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _ANGLE.match(text)
    if m is None:
        raise CircuitSyntaxError(f"bad angle {text!r}", line, col)
    value = math.pi * float(m["num"] or 1.0) / float(m["den"] or 1.0)
    return -value if m["sign"] == "-" else value


def _statements(text: str):
    """Yield ``(line, column, statement)`` for each ``;``-terminated statement, comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("//", 1)[0]
        start = 0
        while start < len(body):
            end = body.find(";", start)
            piece = body[start:] if end < 0 else body[start:end + 1]
            stmt = piece.strip()
            if stmt:
                col = start + piece.find(stmt) + 1
                if end < 0:
                    raise CircuitSyntaxError(f"missing ';' after {stmt!r}", lineno, col)
                yield lineno, col, stmt
            if end < 0:
                break
            start = end + 1


def parse_circuit(text: str) -> Circuit:
    """Parse the QASM subset (single ``q`` register, optional ``c`` register)."""
    n_qubits = None
    n_clbits = 0
    gates = []
    for lineno, col, line in _statements(text):
        if line.startswith("OPENQASM") or line.startswith("include"):
            continue
        if m := _QREG.match(line):
            if n_qubits is not None:
                raise CircuitSyntaxError("only one qreg is supported", lineno, col)
            n_qubits = int(m[1])
            continue
        if m := _CREG.match(line):
            n_clbits = int(m[1])
            continue
        m = _STMT.match(line)
        if m is None:
            raise CircuitSyntaxError(f"cannot parse statement {line!r}", lineno, col)
        name, param_text, args = m[1], m[2], m[3]
        if n_qubits is None:
            raise CircuitSyntaxError("statement before qreg declaration", lineno, col)
        kind = _BY_NAME.get(name)
        if kind is None:
            raise CircuitSyntaxError(f"unknown gate {name!r}", lineno, col)
        params = ()
        if param_text is not None:
            params = tuple(_parse_angle(p, lineno, col) for p in param_text.split(","))
        clbit = None
        if kind is GateKind.MEASURE:
            parts = [p.strip() for p in args.split("->")]
            if len(parts) != 2:
                raise CircuitSyntaxError("measure needs 'q[i] -> c[j]'", lineno, col)
            args = parts[0]
            cm = _CARG.match(parts[1])
            if cm is None:
                raise CircuitSyntaxError(f"bad classical argument {parts[1]!r}", lineno, col)
            clbit = int(cm[1])
            if clbit >= n_clbits:
                raise CircuitSyntaxError(f"classical bit {clbit} out of range", lineno, col)
        qubits = []
        if args:
            for a in args.split(","):
                qm = _QARG.match(a.strip())
                if qm is None:
                    raise CircuitSyntaxError(f"bad qubit argument {a.strip()!r}", lineno, col)
                q = int(qm[1])
                if q >= n_qubits:
                    raise CircuitSyntaxError(f"qubit {q} out of range for qreg of size {n_qubits}", lineno, col)
                qubits.append(q)
        try:
            gates.append(Gate(kind, tuple(qubits), params, clbit))
        except ValueError as exc:
            raise CircuitSyntaxError(str(exc), lineno, col) from None
    if n_qubits is None:
        raise CircuitSyntaxError("missing qreg declaration")
    try:
        return Circuit(n_qubits, tuple(gates), n_clbits)
    except ValueError as exc:
        raise CircuitSyntaxError(str(exc)) from None


def _emit_gate(gate: Gate) -> str:
    qargs = ",".join(f"q[{q}]" for q in gate.qubits)
    if gate.kind is GateKind.BARRIER:
        return f"barrier {qargs};" if qargs else "barrier;"
    if gate.kind is GateKind.MEASURE:
        return f"measure {qargs} -> c[{gate.clbit}];"
    if gate.params:
        return f"{gate.name}({','.join(repr(p) for p in gate.params)}) {qargs};"
    return f"{gate.name} {qargs};"


def emit_circuit(c: Circuit) -> str:
    lines = [f"qreg q[{c.n_qubits}];"]
    if c.n_clbits:
        lines.append(f"creg c[{c.n_clbits}];")
    lines.extend(_emit_gate(gate) for gate in c.gates)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# structure


@dataclass(frozen=True)
class LayeredCircuit:
    """ASAP schedule. ``layers[t][q]`` is the gate occupying lane ``q`` at step ``t`` or None."""

    n_qubits: int
    layers: tuple[tuple[Optional[Gate], ...], ...] = field(default=())

    def __len__(self):
        return len(self.layers)

    def gates(self, t: int) -> list[Gate]:
        """Distinct gates of layer ``t`` ordered by their lowest lane."""
        out, seen = [], set()
        for gate in self.layers[t]:
            if gate is not None and id(gate) not in seen:
                seen.add(id(gate))
                out.append(gate)
        return out


def layerize(c: Circuit) -> LayeredCircuit:
    frontier = [0] * c.n_qubits
    placed: list[tuple[int, Gate]] = []
    for gate in c.gates:
        if gate.kind is GateKind.BARRIER:
            top = max(frontier, default=0)
            frontier = [top] * c.n_qubits
            continue
        t = max(frontier[q] for q in gate.qubits)
        for q in gate.qubits:
            frontier[q] = t + 1
        placed.append((t, gate))
    n_layers = max((t for t, _ in placed), default=-1) + 1
    grid = [[None] * c.n_qubits for _ in range(n_layers)]
    for t, gate in placed:
        for q in gate.qubits:
            grid[t][q] = gate
    return LayeredCircuit(c.n_qubits, tuple(tuple(row) for row in grid))


def depth(c: Circuit) -> int:
    return len(layerize(c))


def cnot_count(c: Circuit) -> int:
    """CNOTs after lowering each swap to three of them."""
    return sum(1 if gt.kind is GateKind.CX else 3 if gt.kind is GateKind.SWAP else 0 for gt in c.gates)


def gate_counts(c: Circuit) -> dict[str, int]:
    counts: dict[str, int] = {}
    for gate in c.gates:
        counts[gate.name] = counts.get(gate.name, 0) + 1
    return counts
