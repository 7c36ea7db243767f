"""Counter-based SplitMix64 streams.

Shot ``k`` of a run seeded with ``seed`` reads from the SplitMix64 generator
whose state is ``shot_key(seed, k)``; draw ``j`` of that shot is the
``(j+1)``-th output of the generator. Because every draw is a pure function of
``(seed, k, j)``, draws can be evaluated in any order, vectorized over shots,
or skipped entirely, and the result never depends on scheduling.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def shot_key(seed: int, shot: int) -> int:
    base = _mix((seed + GOLDEN) & MASK64)
    return _mix((base + (shot + 1) * GOLDEN) & MASK64)


class SplitMix64:
    """Scalar reference generator; the vectorized path must agree with it bit for bit."""

    def __init__(self, state: int):
        self.state = state & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def shot_keys(seed: int, shots: int) -> np.ndarray:
    base = _mix((seed + GOLDEN) & MASK64)
    k = np.arange(1, shots + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_array(np.uint64(base) + k * np.uint64(GOLDEN))


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Draw ``counters[j]`` of every shot: array of shape ``(len(keys), len(counters))``."""
    keys = np.asarray(keys, dtype=np.uint64)
    offs = (np.asarray(counters, dtype=np.uint64) + np.uint64(1)) * np.uint64(GOLDEN)
    with np.errstate(over="ignore"):
        z = _mix_array(keys[:, None] + offs[None, :])
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(seed: int, *path: int) -> int:
    """Child seed for a sub-task (e.g. record ``i`` of a dataset); deterministic in the path."""
    s = seed & MASK64
    for p in path:
        s = _mix((s + (p + 1) * GOLDEN) & MASK64)
    return s
