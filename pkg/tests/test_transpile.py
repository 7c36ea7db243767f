import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circfid.circuit import Circuit, GateKind, g
from circfid.errors import InputFormatError
from circfid.simulator import run_ideal, unitary
from circfid.transpile import (
    IBM_BASIS, BasisSet, Layout, cancel_adjacent_inverses, decompose_to_basis, remap,
)

from conftest import equal_up_to_phase, unitary_circuits

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])


def test_h_rule_by_hand():
    c = decompose_to_basis(Circuit(1, [g("h", 0)]))
    assert [gt.kind.value for gt in c.gates] == ["rz", "sx", "rz"]
    # matrix product taken independently of the simulator's gate table
    product = _rz(math.pi / 2) @ SX @ _rz(math.pi / 2)
    assert equal_up_to_phase(product, H) < 1e-12


def test_s_rule():
    c = decompose_to_basis(Circuit(1, [g("s", 0)]))
    assert c.gates == (g("rz", 0, params=(math.pi / 2,)),)
    assert equal_up_to_phase(_rz(math.pi / 2), np.diag([1, 1j])) < 1e-12


def test_swap_rule():
    c = decompose_to_basis(Circuit(2, [g("swap", 0, 1)]))
    assert c.gates == (g("cx", 0, 1), g("cx", 1, 0), g("cx", 0, 1))


def test_output_within_basis():
    c = Circuit(3, [g("h", 0), g("y", 1), g("cz", 0, 2), g("sdg", 2), g("swap", 1, 2)]).measure_all()
    out = decompose_to_basis(c)
    allowed = {k.value for k in IBM_BASIS.allowed_1q | IBM_BASIS.allowed_2q} | {"measure", "barrier"}
    assert {gt.kind.value for gt in out.gates} <= allowed


def test_missing_rule_is_an_error():
    narrow = BasisSet(frozenset({"rz", "sx"}), frozenset({"cz"}))
    with pytest.raises(InputFormatError):
        decompose_to_basis(Circuit(2, [g("cx", 0, 1)]), narrow)


@settings(max_examples=150, deadline=None)
@given(unitary_circuits(max_qubits=4, max_gates=10))
def test_decomposition_preserves_unitary(c):
    assert equal_up_to_phase(unitary(decompose_to_basis(c)), unitary(c)) < 1e-10


@settings(max_examples=150, deadline=None)
@given(unitary_circuits(max_qubits=4, max_gates=14))
def test_cancellation_preserves_unitary_and_is_idempotent(c):
    once = cancel_adjacent_inverses(c)
    assert len(once.gates) <= len(c.gates)
    assert cancel_adjacent_inverses(once) == once
    assert equal_up_to_phase(unitary(once), unitary(c)) < 1e-10


def test_cancellation_examples():
    assert cancel_adjacent_inverses(Circuit(2, [g("cx", 0, 1)] * 2)).gates == ()
    assert cancel_adjacent_inverses(Circuit(2, [g("h", 0), g("x", 1), g("h", 0)])).gates == (g("x", 1),)
    blocked = Circuit(2, [g("cx", 0, 1), g("h", 1), g("cx", 0, 1)])
    assert cancel_adjacent_inverses(blocked) == blocked


def test_cancellation_cascades_and_handles_rz():
    c = Circuit(1, [g("h", 0), g("x", 0), g("x", 0), g("h", 0)])
    assert cancel_adjacent_inverses(c).gates == ()
    rz = Circuit(1, [g("rz", 0, params=(1.0,)), g("rz", 0, params=(2 * math.pi - 1.0,))])
    assert cancel_adjacent_inverses(rz).gates == ()
    assert cancel_adjacent_inverses(Circuit(2, [g("cz", 0, 1), g("cz", 1, 0)])).gates == ()
    assert len(cancel_adjacent_inverses(Circuit(2, [g("cx", 0, 1), g("cx", 1, 0)])).gates) == 2


def test_remap_examples():
    c = Circuit(2, [g("cx", 0, 1)])
    out = remap(c, Layout({0: 5, 1: 3}), 7)
    assert out == Circuit(7, [g("cx", 5, 3)])
    assert remap(c, Layout.identity(2), 2) == c


def test_layout_validation():
    with pytest.raises(ValueError):
        Layout({0: 1, 1: 1})
    with pytest.raises(ValueError):
        remap(Circuit(2, [g("cx", 0, 1)]), Layout({0: 0, 1: 9}), 7)
    with pytest.raises(ValueError):
        remap(Circuit(2, [g("cx", 0, 1)]), Layout({0: 0}), 7)


def test_layout_file_round_trip(tmp_path):
    lay = Layout({0: 5, 1: 3})
    path = tmp_path / "layout.json"
    path.write_text(__import__("json").dumps(lay.to_dict(7)))
    assert Layout.load(path) == (lay, 7)


@settings(max_examples=60, deadline=None)
@given(unitary_circuits(max_qubits=3, max_gates=8), st.data())
def test_remap_preserves_distribution(c, data):
    c = c.measure_all()
    width = 5
    image = data.draw(st.permutations(range(width)))[: c.n_qubits]
    placed = remap(c, Layout.from_sequence(image), width)
    # clbits follow the measured qubits, so distributions agree key-for-key
    a, b = run_ideal(c), run_ideal(placed)
    keys = set(a) | set(b)
    assert max(abs(a.get(k, 0) - b.get(k, 0)) for k in keys) < 1e-10
