import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circfid.circuit import (
    Circuit, Gate, GateKind, cnot_count, depth, emit_circuit, g, gate_counts, layerize, parse_circuit,
)
from circfid.errors import CircuitSyntaxError
from circfid.transpile import decompose_to_basis

from conftest import unitary_circuits


def test_parse_single_gate():
    c = parse_circuit("qreg q[3]; h q[2];")
    assert c == Circuit(3, [g("h", 2)])


def test_parse_two_qubit_gate():
    assert parse_circuit("qreg q[4]; cx q[0],q[3];") == Circuit(4, [g("cx", 0, 3)])


def test_emit_canonical():
    assert emit_circuit(Circuit(2, [g("cx", 0, 1)])) == "qreg q[2];\ncx q[0],q[1];"
    assert emit_circuit(Circuit(1)) == "qreg q[1];"


def test_parse_full_grammar():
    text = """OPENQASM 2.0;
include "qelib1.inc";
qreg q[2];   // two qubits
creg c[2];
rz(pi/2) q[0];
rz(-0.25) q[1];
barrier;
barrier q[0],q[1];
reset q[1];
measure q[0] -> c[1];
"""
    c = parse_circuit(text)
    assert c.n_qubits == 2 and c.n_clbits == 2
    assert c.gates[0].params == (pytest.approx(math.pi / 2),)
    assert c.gates[1].params == (-0.25,)
    assert [gt.kind for gt in c.gates][2:] == [GateKind.BARRIER, GateKind.BARRIER, GateKind.RESET, GateKind.MEASURE]
    assert c.measure_map() == {1: 0}


def test_emit_normalizes_whitespace():
    messy = "qreg   q[2] ;\n\n   cx  q[0] , q[1] ;\n"
    assert emit_circuit(parse_circuit(messy)) == "qreg q[2];\ncx q[0],q[1];"


@pytest.mark.parametrize("text, line", [
    ("qreg q[2];\nfoo q[0];", 2),
    ("qreg q[2];\nh q[5];", 2),
    ("qreg q[2];\ncx q[0],q[0];", 2),
    ("qreg q[2];\nh q[0]", 2),
    ("h q[0];", 1),
    ("qreg q[1];\nrz(abc) q[0];", 2),
])
def test_parse_errors_carry_location(text, line):
    with pytest.raises(CircuitSyntaxError) as info:
        parse_circuit(text)
    assert info.value.line == line


def test_measure_twice_into_same_clbit_rejected():
    with pytest.raises(CircuitSyntaxError):
        parse_circuit("qreg q[2];\ncreg c[1];\nmeasure q[0] -> c[0];\nmeasure q[1] -> c[0];")


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate(GateKind.RZ, (0,))
    with pytest.raises(ValueError):
        Gate(GateKind.CX, (0,))
    with pytest.raises(ValueError):
        Circuit(1, [g("h", 1)])


@settings(max_examples=200, deadline=None)
@given(unitary_circuits(max_qubits=5, max_gates=20))
def test_round_trip(c):
    assert parse_circuit(emit_circuit(c)) == c


@settings(max_examples=50, deadline=None)
@given(unitary_circuits(max_qubits=3, max_gates=8))
def test_round_trip_with_measures(c):
    c = c.measure_all()
    assert parse_circuit(emit_circuit(c)) == c


def test_layerize_examples():
    lc = layerize(Circuit(2, [g("h", 0), g("cx", 0, 1)]).measure_all())
    h0, cx, m0, m1 = lc.layers[0][0], lc.layers[1][0], lc.layers[2][0], lc.layers[2][1]
    assert lc.layers[0][1] is None
    assert cx is lc.layers[1][1] and cx.kind is GateKind.CX
    assert (h0.kind, m0.kind, m1.kind) == (GateKind.H, GateKind.MEASURE, GateKind.MEASURE)
    assert len(layerize(Circuit(2, [g("h", 0), g("h", 1)]))) == 1


def test_barrier_forces_boundary_without_a_lane():
    c = parse_circuit("qreg q[2]; h q[0]; barrier; h q[1];")
    lc = layerize(c)
    assert len(lc) == 2
    assert all(gt is None or gt.kind is not GateKind.BARRIER for layer in lc.layers for gt in layer)


@settings(max_examples=200, deadline=None)
@given(unitary_circuits(max_qubits=5, max_gates=25))
def test_layering_preserves_per_qubit_order(c):
    lc = layerize(c)
    replay = [gt for t in range(len(lc)) for gt in lc.gates(t)]
    assert len(replay) == len(c.gates)
    for q in range(c.n_qubits):
        assert [gt for gt in replay if q in gt.qubits] == [gt for gt in c.gates if q in gt.qubits]
    for layer in lc.layers:
        assert any(gt is not None for gt in layer)


@settings(max_examples=100, deadline=None)
@given(unitary_circuits(max_qubits=4, max_gates=15), st.data())
def test_depth_bounds_and_monotone(c, data):
    assert depth(c) <= len(c.gates)
    q = data.draw(st.integers(0, c.n_qubits - 1))
    assert depth(c.with_gates(c.gates + (g("x", q),))) >= depth(c)


def test_depth_and_cnot_fixtures():
    assert depth(Circuit(1)) == 0
    assert depth(Circuit(1, [g("h", 0)] * 3)) == 3
    swap = Circuit(2, [g("swap", 0, 1)])
    assert cnot_count(decompose_to_basis(swap)) == 3
    assert cnot_count(swap) == 3
    assert gate_counts(Circuit(2, [g("h", 0), g("h", 1), g("cx", 0, 1)])) == {"cx": 1, "h": 2}
