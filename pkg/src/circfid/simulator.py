"""Exact and Monte-Carlo execution of circuits.

State vectors are little-endian: qubit 0 is the least significant bit of the
basis index. Only qubits touched by the circuit are simulated, so a 2-qubit
circuit laid out on a 27-qubit device costs a 4-amplitude state.

Noisy runs are trajectory simulations. Every stochastic event (a gate or idle
error, a Born-rule outcome, a readout flip, a reset error) owns a fixed draw
index, and shot ``k`` reads its draws from the SplitMix64 stream
``shot_key(seed, k)`` (see :mod:`circfid.rng`). Counts therefore depend only on
``(circuit, noise model, shots, seed)``.

Two interchangeable engines consume those draws:

* a batched state-vector engine that works for every circuit, and
* a Pauli-frame engine for Clifford circuits whose measurements are terminal
  and whose ideal outcome is deterministic (every RB circuit). It precomputes,
  for each error site, which output bits each Pauli flips, and then only has to
  XOR together the flips of the errors that fired.

Both engines make identical decisions from identical draws, so they return
identical Counts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng
from .circuit import Circuit, Gate, GateKind, layerize
from .errors import InputFormatError
from .noise import NoiseModel

MAX_QUBITS = 20
_SNAP = 1e-12
_SV_CHUNK_AMPLITUDES = 1 << 22


class SimulationError(InputFormatError):
    pass


@dataclass(frozen=True)
class Counts:
    """Histogram of measured bitstrings. The leftmost character is the highest measured clbit."""

    counts: dict
    shots: int

    def __post_init__(self):
        counts = {str(k): int(v) for k, v in dict(self.counts).items() if int(v) != 0}
        if any(v < 0 for v in counts.values()):
            raise InputFormatError("negative count")
        if sum(counts.values()) != self.shots:
            raise InputFormatError(f"counts sum to {sum(counts.values())}, expected {self.shots} shots")
        widths = {len(k) for k in counts}
        if len(widths) > 1:
            raise InputFormatError("bitstrings of mixed width")
        if any(set(k) - {"0", "1"} for k in counts):
            raise InputFormatError("bitstrings must contain only 0 and 1")
        object.__setattr__(self, "counts", dict(sorted(counts.items())))

    @property
    def width(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def __getitem__(self, key: str) -> int:
        return self.counts.get(key, 0)

    def probabilities(self) -> dict:
        return {k: v / self.shots for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        return {"shots": self.shots, "counts": dict(self.counts)}

    @classmethod
    def from_dict(cls, data: dict) -> "Counts":
        try:
            return cls(dict(data["counts"]), int(data["shots"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"malformed counts: {exc}") from None

    @classmethod
    def load(cls, path) -> "Counts":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# gate matrices (two-qubit index = bit(qubits[0]) + 2 * bit(qubits[1]))

_S2 = 1 / math.sqrt(2)
_FIXED = {
    GateKind.ID: np.eye(2, dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.H: np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.SDG: np.array([[1, 0], [0, -1j]], dtype=complex),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
    GateKind.CX: np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    GateKind.SWAP: np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind is GateKind.RZ:
        half = gate.params[0] / 2
        return np.diag([np.exp(-1j * half), np.exp(1j * half)])
    try:
        return _FIXED[gate.kind]
    except KeyError:
        raise ValueError(f"{gate.name} has no unitary") from None


def _apply_1q(state: np.ndarray, m: np.ndarray, q: int) -> np.ndarray:
    b = state.shape[0]
    v = state.reshape(b, -1, 2, 1 << q)
    a0, a1 = v[:, :, 0, :], v[:, :, 1, :]
    out = np.empty_like(v)
    out[:, :, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
    out[:, :, 1, :] = m[1, 0] * a0 + m[1, 1] * a1
    return out.reshape(b, -1)


def _apply_2q(state: np.ndarray, m: np.ndarray, q0: int, q1: int, n: int) -> np.ndarray:
    b = state.shape[0]
    t = state.reshape((b,) + (2,) * n)
    ax0, ax1 = n - q0, n - q1  # axis 0 is the batch
    tensor = m.reshape(2, 2, 2, 2)  # [out1, out0, in1, in0]
    res = np.tensordot(t, tensor, axes=([ax1, ax0], [2, 3]))
    res = np.moveaxis(res, [-2, -1], [ax1, ax0])
    return np.ascontiguousarray(res).reshape(b, -1)


def unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of the circuit's unitary gates (measure/reset/barrier skipped)."""
    dim = 1 << c.n_qubits
    cols = np.eye(dim, dtype=complex)  # row r = basis state r
    for gate in c.gates:
        if not gate.kind.is_unitary:
            continue
        m = gate_matrix(gate)
        if len(gate.qubits) == 1:
            cols = _apply_1q(cols, m, gate.qubits[0])
        else:
            cols = _apply_2q(cols, m, gate.qubits[0], gate.qubits[1], c.n_qubits)
    return cols.T


# ---------------------------------------------------------------------------
# compilation into an op stream with fixed draw indices

_PAULI_BITS = ((0, 0), (1, 0), (1, 1), (0, 1))  # I, X, Y, Z as (x, z)


@dataclass
class _Program:
    n: int  # simulated (compacted) width
    n_bits: int
    ops: list
    n_counters: int
    clifford: bool
    terminal: bool
    has_reset: bool


def _compile(c: Circuit, nm: Optional[NoiseModel]) -> _Program:
    used = sorted({q for gt in c.gates if gt.kind is not GateKind.BARRIER for q in gt.qubits})
    local = {q: i for i, q in enumerate(used)}
    clbits = c.measured_clbits()
    if not clbits:
        raise SimulationError("circuit has no measurements")
    if len(used) > MAX_QUBITS:
        raise SimulationError(f"{len(used)} active qubits exceeds the simulator bound of {MAX_QUBITS}")
    if nm is not None and nm.n_qubits < c.n_qubits and used and used[-1] >= nm.n_qubits:
        raise SimulationError(f"noise model covers {nm.n_qubits} qubits, circuit uses qubit {used[-1]}")
    bitpos = {cb: i for i, cb in enumerate(clbits)}

    def rate(fn, *qs):
        return 0.0 if nm is None else fn(*qs)

    ops = []
    counter = 0
    clifford, terminal, has_reset = True, True, False
    measured = set()
    for t, layer in enumerate(layerize(c).layers):
        busy = set()
        seen = set()
        for gate in layer:
            if gate is None or id(gate) in seen:
                continue
            seen.add(id(gate))
            qs = tuple(local[q] for q in gate.qubits)
            busy.update(gate.qubits)
            if measured.intersection(gate.qubits):
                terminal = False
            if gate.kind is GateKind.MEASURE:
                q = gate.qubits[0]
                ops.append(("meas", qs[0], bitpos[gate.clbit], rate(nm.meas if nm else None, q), counter, counter + 1))
                counter += 2
                measured.add(q)
            elif gate.kind is GateKind.RESET:
                q = gate.qubits[0]
                has_reset = True
                ops.append(("reset", qs[0], rate(nm.reset if nm else None, q), counter, counter + 1))
                counter += 2
            elif len(qs) == 1:
                clifford = clifford and _clifford_code(gate) is not None
                ops.append(("u", gate, qs))
                ops.append(("n1", qs[0], rate(nm.gate1 if nm else None, gate.qubits[0]), counter))
                counter += 1
            else:
                ops.append(("u", gate, qs))
                ops.append(("n2", qs, rate(nm.gate2 if nm else None, *gate.qubits), counter))
                counter += 1
        for q in used:
            if q not in busy:
                ops.append(("n1", local[q], rate(nm.idle if nm else None, q), counter))
                counter += 1
    return _Program(len(used), len(clbits), ops, counter, clifford, terminal, has_reset)


def _clifford_code(gate: Gate) -> Optional[str]:
    """Symplectic action class of a 1q gate, or None if it is not Clifford."""
    k = gate.kind
    if k in (GateKind.ID, GateKind.X, GateKind.Y, GateKind.Z):
        return "pauli"
    if k is GateKind.H:
        return "h"
    if k in (GateKind.S, GateKind.SDG):
        return "s"
    if k is GateKind.SX:
        return "sx"
    if k is GateKind.RZ:
        quarter = gate.params[0] / (math.pi / 2)
        r = round(quarter)
        if abs(quarter - r) > 1e-9:
            return None
        return "s" if r % 2 else "pauli"
    return None


# ---------------------------------------------------------------------------
# exact distributions


def _bits_to_key(values: np.ndarray, width: int) -> list[str]:
    return [format(int(v), f"0{width}b") for v in values]


def _final_state(prog: _Program) -> np.ndarray:
    state = np.zeros((1, 1 << prog.n), dtype=complex)
    state[0, 0] = 1.0
    for op in prog.ops:
        if op[0] == "u":
            gate, qs = op[1], op[2]
            m = gate_matrix(gate)
            state = _apply_1q(state, m, qs[0]) if len(qs) == 1 else _apply_2q(state, m, qs[0], qs[1], prog.n)
    return state[0]


def _ideal_terminal(prog: _Program) -> dict:
    probs = np.abs(_final_state(prog)) ** 2
    meas = [(op[1], op[2]) for op in prog.ops if op[0] == "meas"]
    idx = np.arange(probs.size)
    keyval = np.zeros(probs.size, dtype=np.int64)
    for q, pos in meas:
        keyval |= ((idx >> q) & 1) << pos
    totals = np.bincount(keyval, weights=probs, minlength=1 << prog.n_bits)
    return {k: float(p) for k, p in zip(_bits_to_key(np.arange(totals.size), prog.n_bits), totals) if p > 1e-14}


def _ideal_branching(prog: _Program) -> dict:
    branches = [(1.0, 0, _basis_zero(prog.n))]
    for op in prog.ops:
        kind = op[0]
        if kind == "u":
            gate, qs = op[1], op[2]
            m = gate_matrix(gate)
            branches = [
                (w, bits, (_apply_1q(s, m, qs[0]) if len(qs) == 1 else _apply_2q(s, m, qs[0], qs[1], prog.n)))
                for w, bits, s in branches
            ]
        elif kind in ("meas", "reset"):
            q = op[1]
            new = []
            for w, bits, s in branches:
                p1 = _prob_one(s, q)[0]
                for outcome, p in ((0, 1.0 - p1), (1, p1)):
                    if p < 1e-14:
                        continue
                    s2 = _collapse(s, q, np.array([outcome]), np.array([p]))
                    if kind == "meas":
                        new.append((w * p, bits | (outcome << op[2]), s2))
                    else:
                        if outcome:
                            s2 = _pauli(s2, q, 1)
                        new.append((w * p, bits, s2))
            branches = new
    out: dict = {}
    for w, bits, _ in branches:
        key = format(bits, f"0{prog.n_bits}b")
        out[key] = out.get(key, 0.0) + w
    return dict(sorted(out.items()))


def _basis_zero(n: int) -> np.ndarray:
    s = np.zeros((1, 1 << n), dtype=complex)
    s[0, 0] = 1.0
    return s


def run_ideal(c: Circuit) -> dict:
    """Exact Born-rule distribution over the measured classical bits."""
    prog = _compile(c, None)
    if prog.terminal and not prog.has_reset:
        return _ideal_terminal(prog)
    return _ideal_branching(prog)


# ---------------------------------------------------------------------------
# trajectories


def _prob_one(state: np.ndarray, q: int) -> np.ndarray:
    v = state.reshape(state.shape[0], -1, 2, 1 << q)
    return np.sum(np.abs(v[:, :, 1, :]) ** 2, axis=(1, 2))


def _collapse(state, q, outcome, prob):
    v = state.reshape(state.shape[0], -1, 2, 1 << q).copy()
    keep0 = outcome == 0
    v[keep0, :, 1, :] = 0
    v[~keep0, :, 0, :] = 0
    norm = np.sqrt(np.where(keep0, 1.0 - prob, prob))
    norm[norm == 0] = 1.0
    v /= norm[:, None, None, None]
    return v.reshape(state.shape[0], -1)


def _pauli(state, q, code):
    """Apply Pauli ``code`` (1=X, 2=Y, 3=Z; global phase dropped) on qubit ``q`` of every row."""
    x, z = _PAULI_BITS[code]
    if z:
        idx = np.arange(state.shape[1])
        state = state * np.where((idx >> q) & 1, -1.0, 1.0)
    if x:
        state = state[:, np.arange(state.shape[1]) ^ (1 << q)]
    return state


def _snap(p):
    return np.where(p < _SNAP, 0.0, np.where(p > 1 - _SNAP, 1.0, p))


class _Draws:
    """Per-chunk lazily evaluated draw table."""

    def __init__(self, keys: np.ndarray):
        self.keys = keys

    def __call__(self, counter: int) -> np.ndarray:
        return rng.uniforms(self.keys, np.array([counter]))[:, 0]


def _choose(u: np.ndarray, p: float, n_choices: int) -> np.ndarray:
    return np.minimum((u / p * n_choices).astype(np.int64), n_choices - 1)


def _run_statevector(prog: _Program, keys: np.ndarray) -> np.ndarray:
    out = np.zeros(keys.size, dtype=np.int64)
    chunk = max(1, _SV_CHUNK_AMPLITUDES >> prog.n)
    for start in range(0, keys.size, chunk):
        out[start:start + chunk] = _sv_chunk(prog, keys[start:start + chunk])
    return out


def _sv_chunk(prog: _Program, keys: np.ndarray) -> np.ndarray:
    b = keys.size
    draw = _Draws(keys)
    state = np.zeros((b, 1 << prog.n), dtype=complex)
    state[:, 0] = 1.0
    bits = np.zeros(b, dtype=np.int64)
    for op in prog.ops:
        kind = op[0]
        if kind == "u":
            gate, qs = op[1], op[2]
            m = gate_matrix(gate)
            state = _apply_1q(state, m, qs[0]) if len(qs) == 1 else _apply_2q(state, m, qs[0], qs[1], prog.n)
        elif kind == "n1":
            _, q, p, ctr = op
            if p <= 0:
                continue
            u = draw(ctr)
            hit = np.nonzero(u < p)[0]
            if hit.size:
                choice = _choose(u[hit], p, 3) + 1
                for code in (1, 2, 3):
                    rows = hit[choice == code]
                    if rows.size:
                        state[rows] = _pauli(state[rows], q, code)
        elif kind == "n2":
            _, (qa, qb), p, ctr = op
            if p <= 0:
                continue
            u = draw(ctr)
            hit = np.nonzero(u < p)[0]
            if hit.size:
                choice = _choose(u[hit], p, 15) + 1
                for code in np.unique(choice):
                    rows = hit[choice == code]
                    sub = state[rows]
                    if code % 4:
                        sub = _pauli(sub, qa, code % 4)
                    if code // 4:
                        sub = _pauli(sub, qb, code // 4)
                    state[rows] = sub
        elif kind == "meas":
            _, q, pos, p_flip, ctr_flip, ctr_born = op
            p1 = _snap(_prob_one(state, q))
            outcome = (draw(ctr_born) < p1).astype(np.int64)
            state = _collapse(state, q, outcome, p1)
            if p_flip > 0:
                outcome ^= (draw(ctr_flip) < p_flip).astype(np.int64)
            bits |= outcome << pos
        elif kind == "reset":
            _, q, p_err, ctr_born, ctr_err = op
            p1 = _snap(_prob_one(state, q))
            outcome = draw(ctr_born) < p1
            state = _collapse(state, q, outcome.astype(np.int64), p1)
            flip = outcome.copy()
            if p_err > 0:
                flip ^= draw(ctr_err) < p_err
            rows = np.nonzero(flip)[0]
            if rows.size:
                state[rows] = _pauli(state[rows], q, 1)
    return bits


def _frame_tables(prog: _Program):
    """Backward sweep: output-bit flip masks for every error site and Pauli choice."""
    xq = [0] * prog.n
    zq = [0] * prog.n
    sites = []  # (counter, p, n_choices, masks)

    def flip(q, code):
        x, z = _PAULI_BITS[code]
        return (zq[q] if x else 0) ^ (xq[q] if z else 0)

    for op in reversed(prog.ops):
        kind = op[0]
        if kind == "u":
            gate, qs = op[1], op[2]
            k = gate.kind
            if len(qs) == 1:
                q = qs[0]
                code = _clifford_code(gate)
                if code == "h":
                    xq[q], zq[q] = zq[q], xq[q]
                elif code == "s":
                    zq[q] ^= xq[q]
                elif code == "sx":
                    xq[q] ^= zq[q]
            elif k is GateKind.CX:
                c_, t_ = qs
                xq[t_] ^= xq[c_]
                zq[c_] ^= zq[t_]
            elif k is GateKind.CZ:
                a, b = qs
                za, zb = zq[a] ^ xq[b], zq[b] ^ xq[a]
                zq[a], zq[b] = za, zb
            elif k is GateKind.SWAP:
                a, b = qs
                xq[a], xq[b] = xq[b], xq[a]
                zq[a], zq[b] = zq[b], zq[a]
        elif kind == "n1":
            _, q, p, ctr = op
            if p > 0:
                sites.append((ctr, p, 3, [flip(q, code) for code in (1, 2, 3)]))
        elif kind == "n2":
            _, (qa, qb), p, ctr = op
            if p > 0:
                sites.append((ctr, p, 15, [flip(qa, code % 4) ^ flip(qb, code // 4) for code in range(1, 16)]))
        elif kind == "meas":
            _, q, pos, p_flip, ctr_flip, _ = op
            if p_flip > 0:
                sites.append((ctr_flip, p_flip, 1, [1 << pos]))
            zq[q] |= 1 << pos
    return sites


def _frame_eligible(prog: _Program) -> bool:
    return prog.clifford and prog.terminal and not prog.has_reset


def _run_frame(prog: _Program, keys: np.ndarray, ideal_bits: int) -> np.ndarray:
    out = np.full(keys.size, ideal_bits, dtype=np.int64)
    sites = _frame_tables(prog)
    if not sites:
        return out
    counters = np.array([s[0] for s in sites], dtype=np.int64)
    probs = np.array([s[1] for s in sites])
    nch = np.array([s[2] for s in sites], dtype=np.int64)
    table = np.zeros((len(sites), 15), dtype=np.int64)
    for i, s in enumerate(sites):
        table[i, : len(s[3])] = s[3]
    chunk = max(1, (1 << 22) // len(sites))
    for start in range(0, keys.size, chunk):
        u = rng.uniforms(keys[start:start + chunk], counters)
        rows, cols = np.nonzero(u < probs)
        if rows.size == 0:
            continue
        choice = np.minimum((u[rows, cols] / probs[cols] * nch[cols]).astype(np.int64), nch[cols] - 1)
        np.bitwise_xor.at(out, rows + start, table[cols, choice])
    return out


def run_noisy(c: Circuit, nm: Optional[NoiseModel], shots: int, seed: int, method: str = "auto") -> Counts:
    """Monte-Carlo counts under ``nm`` (``None`` means noise-free).

    ``method`` is ``"auto"``, ``"statevector"`` or ``"frame"``; all produce the
    same Counts where applicable, ``auto`` just picks the cheaper one.
    """
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    prog = _compile(c, nm)
    keys = rng.shot_keys(seed, shots)
    use_frame = method == "frame"
    ideal_bits = None
    if method in ("auto", "frame") and _frame_eligible(prog):
        dist = _ideal_terminal(prog)
        top_key, top_p = max(dist.items(), key=lambda kv: kv[1])
        if top_p > 1 - 1e-9:
            ideal_bits = int(top_key, 2)
            use_frame = True
        elif method == "frame":
            raise SimulationError("frame engine needs a deterministic ideal outcome")
    elif method == "frame":
        raise SimulationError("frame engine needs a Clifford circuit with terminal measurements and no resets")
    if use_frame:
        bits = _run_frame(prog, keys, ideal_bits)
    else:
        bits = _run_statevector(prog, keys)
    values, freq = np.unique(bits, return_counts=True)
    return Counts(dict(zip(_bits_to_key(values, prog.n_bits), (int(f) for f in freq))), shots)


def sample_ideal(c: Circuit, shots: int, seed: int) -> Counts:
    return run_noisy(c, None, shots, seed)
