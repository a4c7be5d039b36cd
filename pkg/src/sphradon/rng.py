"""Portable counter-based random number generation.

Experiments must reproduce bit-identically across platforms and library
versions, so noise draws do not go through numpy's Generator machinery.
Instead we use a splitmix64-style counter generator: output i of stream
`seed` is a pure function of (seed, i).  Normals come from Box-Muller.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def random_u64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs start..start+count-1 of the stream for `seed`, as uint64."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN)


def random_uniform(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform draws in (0, 1], 53-bit resolution."""
    bits = random_u64(seed, start, count)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def random_normal(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Standard normal draws via Box-Muller on consecutive uniform pairs."""
    n_pairs = (count + 1) // 2
    u1 = random_uniform(seed, start, n_pairs)
    u2 = random_uniform(seed, start + n_pairs, n_pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])
    return out[:count]
