from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from circfid.errors import InputFormatError, UndefinedFidelityError
from circfid.metrics import (
    AlignedPair, align, d_r2, d_r2_unbounded, expected_ideal_counts, interpret, pst, sums_of_squares,
)
from circfid.simulator import Counts

IDEAL = Counts({"10": 1024}, 1024)
NOISY = Counts({"00": 137, "01": 17, "10": 789, "11": 81}, 1024)


def exact_dr2(Y, y):
    """Independent rational-arithmetic evaluation."""
    mean = Fraction(sum(Y), len(Y))
    ssr = sum((Fraction(a) - b) ** 2 for a, b in zip(Y, y))
    sst = sum((a - mean) ** 2 for a in Y)
    return ssr, sst, 1 - ssr / sst


def test_align_canonical_order():
    p = align(IDEAL, NOISY)
    assert list(p.Y) == [0, 0, 1024, 0]
    assert list(p.y) == [137, 17, 789, 81]
    assert list(align(Counts({"0": 4}, 4), Counts({"0": 4}, 4)).Y) == [4, 0]


def test_align_errors():
    with pytest.raises(InputFormatError):
        align(IDEAL, Counts({"0": 1024}, 1024))
    with pytest.raises(InputFormatError):
        align(IDEAL, Counts({"10": 1000}, 1000))
    with pytest.raises(InputFormatError):
        AlignedPair(np.array([1, 0]), np.array([0, 2]), 1)


def test_worked_example():
    ssr, sst, value = exact_dr2([0, 0, 1024, 0], [137, 17, 789, 81])
    assert (ssr, sst) == (80844, 786432)
    p = align(IDEAL, NOISY)
    assert sums_of_squares(p) == (80844.0, 786432.0)
    assert d_r2(p) == pytest.approx(float(value), abs=1e-12)
    assert d_r2(p) == pytest.approx(0.897202, abs=1e-6)
    assert d_r2_unbounded(p) == d_r2(p)


def test_extremes():
    assert d_r2(align(IDEAL, IDEAL)) == 1.0
    uniform = Counts({k: 256 for k in ("00", "01", "10", "11")}, 1024)
    assert d_r2(align(IDEAL, uniform)) == 0.0
    wrong = Counts({"00": 1024}, 1024)
    assert d_r2_unbounded(align(IDEAL, wrong)) == pytest.approx(1 - 2 * 1024**2 / 786432)
    assert d_r2_unbounded(align(IDEAL, wrong)) == pytest.approx(-1.6667, abs=1e-4)
    assert d_r2(align(IDEAL, wrong)) == 0.0


def test_uniform_ideal_is_undefined():
    flat = Counts({"0": 2, "1": 2}, 4)
    with pytest.raises(UndefinedFidelityError):
        d_r2(align(flat, flat))


def test_pst():
    assert pst({"10"}, NOISY) == pytest.approx(789 / 1024)
    assert pst({"10"}, NOISY) == pytest.approx(0.770508, abs=1e-6)
    assert pst({"10"}, IDEAL) == 1.0
    assert pst({"01"}, IDEAL) == 0.0
    with pytest.raises(InputFormatError):
        pst(set(), NOISY)


def test_expected_ideal_counts():
    assert expected_ideal_counts({"10": 1.0}, 1024).counts == {"10": 1024}
    assert expected_ideal_counts({"00": 0.5, "11": 0.5}, 1000).counts == {"00": 500, "11": 500}
    thirds = expected_ideal_counts({"0": 1 / 3, "1": 2 / 3}, 100)
    assert thirds.shots == 100 and thirds.counts == {"0": 33, "1": 67}


@settings(max_examples=200)
@given(st.lists(st.floats(0.001, 1), min_size=1, max_size=16), st.integers(1, 5000))
def test_expected_counts_total_is_exact(weights, shots):
    total = sum(weights)
    width = max(1, (len(weights) - 1).bit_length())
    dist = {format(i, f"0{width}b"): w / total for i, w in enumerate(weights)}
    c = expected_ideal_counts(dist, shots)
    assert c.shots == shots
    for k, p in dist.items():
        assert abs(c[k] - p * shots) < 1


count_vectors = st.integers(1, 3).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.integers(0, 50), min_size=2**n, max_size=2**n),
                        st.lists(st.integers(0, 50), min_size=2**n, max_size=2**n)))


def _pair(n, Y, y):
    total = sum(Y)
    assume(total > 0 and sum(y) > 0 and len(set(Y)) > 1)
    y = list(y)
    y[0] += total - sum(y)
    assume(y[0] >= 0)
    return AlignedPair(np.array(Y), np.array(y), n)


@settings(max_examples=300)
@given(count_vectors)
def test_range_and_clamp(args):
    p = _pair(*args)
    v, raw = d_r2(p), d_r2_unbounded(p)
    assert 0.0 <= v <= 1.0
    assert v == max(0.0, raw)
    assert (v == 1.0) == bool(np.array_equal(p.Y, p.y))
    _, _, exact = exact_dr2(list(p.Y), list(p.y))
    assert raw == pytest.approx(float(exact), abs=1e-12)


@settings(max_examples=200)
@given(count_vectors, st.randoms(use_true_random=False))
def test_permutation_equivariance(args, rnd):
    p = _pair(*args)
    perm = list(range(len(p.Y)))
    rnd.shuffle(perm)
    q = AlignedPair(p.Y[perm], p.y[perm], p.n)
    assert d_r2(q) == pytest.approx(d_r2(p), abs=1e-12)


@pytest.mark.parametrize("value, band", [
    (1.0, "perfect"), (0.9, "good"), (0.7, "fair"), (0.5, "significant"), (0.3, "extremely"),
    (0.1, "extremely"), (0.0, "no better"),
])
def test_interpretation_bands(value, band):
    assert interpret(value).startswith(band)
