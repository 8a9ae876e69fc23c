"""Counter-based random numbers.

Every random quantity in the package is a pure function of ``(seed, stream,
counter)``: a SplitMix64-style finalizer applied to a keyed counter. Nothing is
stored, so an edge uniform can be recomputed anywhere (numpy or numba code)
and two percolation configurations at different ``p`` see identical uniforms.
"""
from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# stream tags keep unrelated consumers of one seed apart
STREAM_EDGES = 1
STREAM_PAIRS = 2
STREAM_CLOCKS = 3
STREAM_SPRINKLE = 4
STREAM_MISC = 5

_MASK64 = (1 << 64) - 1


def _mix_int(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, stream: int = 0) -> np.uint64:
    """Key for ``(seed, stream)``; seeds may be any Python int (reduced mod 2**64)."""
    z = _mix_int(int(seed) * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019)
    z = _mix_int(z ^ ((int(stream) + 1) * 0xD1B54A32D192ED03))
    return np.uint64(z)


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def uniform_at(key, counter):
    """Uniform in [0, 1) for one counter (numba-callable)."""
    z = mix64(key + (np.uint64(counter) + np.uint64(1)) * GOLDEN)
    return float(z >> _S11) * _INV53


def uniforms(key: np.uint64, counters) -> np.ndarray:
    """Vectorized :func:`uniform_at` over an integer array of counters."""
    c = np.asarray(counters).astype(np.uint64, copy=False)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + (c + np.uint64(1)) * GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        z = z ^ (z >> _S31)
    return (z >> _S11).astype(np.float64) * _INV53


def exponentials(key: np.uint64, counters, rates) -> np.ndarray:
    """Exp(rate) variates by inverse CDF of the counter uniforms."""
    u = uniforms(key, counters)
    return -np.log1p(-u) / np.asarray(rates, dtype=float)


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """A numpy Generator for bulk sampling, deterministically keyed like the counters."""
    return np.random.Generator(np.random.Philox(key=int(derive_key(seed, stream))))
