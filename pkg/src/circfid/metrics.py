"""Fidelity metrics over measured output distributions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputFormatError, UndefinedFidelityError
from .simulator import Counts


@dataclass(frozen=True)
class AlignedPair:
    """Ideal (``Y``) and noisy (``y``) count vectors over all ``2**n`` bitstrings, index = int(bitstring, 2)."""

    Y: np.ndarray
    y: np.ndarray
    n: int

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        if Y.shape != (1 << self.n,) or y.shape != Y.shape:
            raise InputFormatError(f"aligned vectors must both have length 2**{self.n}")
        if Y.sum() != y.sum():
            raise InputFormatError(f"shot totals differ: {Y.sum()} vs {y.sum()}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "y", y)


def _vector(c: Counts, n: int) -> np.ndarray:
    v = np.zeros(1 << n, dtype=np.int64)
    for key, count in c.counts.items():
        v[int(key, 2)] = count
    return v


def align(ideal: Counts, noisy: Counts) -> AlignedPair:
    if ideal.width != noisy.width:
        raise InputFormatError(f"bit widths differ: {ideal.width} vs {noisy.width}")
    if ideal.shots != noisy.shots:
        raise InputFormatError(f"shot totals differ: {ideal.shots} vs {noisy.shots}")
    n = ideal.width
    return AlignedPair(_vector(ideal, n), _vector(noisy, n), n)


def sums_of_squares(p: AlignedPair) -> tuple[float, float]:
    """(SSR, SST); both exact for realistic shot counts since every term is an integer or a mean of integers."""
    Y = p.Y.astype(np.float64)
    ssr = float(np.sum((Y - p.y) ** 2))
    sst = float(np.sum((Y - Y.mean()) ** 2))
    return ssr, sst


def d_r2_unbounded(p: AlignedPair) -> float:
    ssr, sst = sums_of_squares(p)
    if sst == 0:
        raise UndefinedFidelityError("ideal distribution is uniform by design; d-R² is undefined")
    return 1.0 - ssr / sst


def d_r2(p: AlignedPair) -> float:
    """1 - SSR/SST when SSR < SST, otherwise 0."""
    ssr, sst = sums_of_squares(p)
    if sst == 0:
        raise UndefinedFidelityError("ideal distribution is uniform by design; d-R² is undefined")
    return 1.0 - ssr / sst if ssr < sst else 0.0


def pst(correct, noisy: Counts) -> float:
    correct = set(correct)
    if not correct:
        raise InputFormatError("need at least one correct bitstring")
    return sum(noisy[k] for k in correct) / noisy.shots


def expected_ideal_counts(dist: dict, shots: int) -> Counts:
    """Round ``p * shots`` per bitstring, fixing the total with the largest-remainder rule."""
    keys = sorted(dist)
    total = sum(dist.values())
    if not math.isclose(total, 1.0, abs_tol=1e-9):
        raise InputFormatError(f"probabilities sum to {total}, expected 1")
    exact = [dist[k] * shots for k in keys]
    floors = [math.floor(x) for x in exact]
    short = shots - sum(floors)
    order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - floors[i]), keys[i]))
    for i in order[:short]:
        floors[i] += 1
    return Counts(dict(zip(keys, floors)), shots)


def all_zero_counts(width: int, shots: int) -> Counts:
    return Counts({"0" * width: shots}, shots)


_BANDS = (
    (0.7, "good: high fidelity"),
    (0.5, "fair: noticeable noise"),
    (0.3, "significant noise: interpret with caution"),
    (0.0, "extremely noisy: do not use"),
)


def interpret(value: float) -> str:
    """Interpretation band for a d-R² value."""
    if value >= 1.0:
        return "perfect: same as noise-free"
    for lower, label in _BANDS:
        if value > lower:
            return label
    return "no better than a uniform superposition"
