"""Portable seeded Gaussian noise.

Algorithm, so that other implementations can reproduce datasets bit for bit:

1. SplitMix64: output ``k`` (k = 0, 1, ...) of stream ``s`` for seed ``S``
   mixes the counter ``S + (s * 2**32 + k + 1) * 0x9E3779B97F4A7C15``
   (mod 2**64) with
   ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``,
   ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``,
   ``z = z ^ (z >> 31)``.
2. Uniform: ``u = (z >> 11) * 2**-53`` in [0, 1).
3. Box-Muller on consecutive pairs ``(u1, u2)``:
   ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` and ``... * sin(2 pi u2)``.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int, stream: int = 0) -> np.ndarray:
    counter = np.arange(1, n + 1, dtype=np.uint64) + np.uint64((stream << 32) & (2**64 - 1))
    with np.errstate(over="ignore"):
        z = np.uint64(seed & (2**64 - 1)) + counter * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform(seed: int, n: int, stream: int = 0) -> np.ndarray:
    return (splitmix64(seed, n, stream) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def gaussian(seed: int, n: int, stream: int = 0) -> np.ndarray:
    """``n`` standard normal deviates from the documented generator."""
    m = (n + 1) // 2
    u = uniform(seed, 2 * m, stream)
    radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * m)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:n]


def add_noise(y, amplitude: float, seed: int | None, mode: str = "multiplicative", stream: int = 0):
    """Return ``y`` with seeded Gaussian noise.

    ``multiplicative`` scales each point by ``1 + amplitude * n``;
    ``additive`` adds ``amplitude * max|y| * n``.
    """
    y = np.asarray(y, dtype=float)
    if amplitude == 0:
        return y.copy()
    if seed is None:
        raise ValueError("a seed is required for noisy output")
    n = gaussian(seed, y.size, stream).reshape(y.shape)
    if mode == "multiplicative":
        return y * (1 + amplitude * n)
    if mode == "additive":
        return y + amplitude * float(np.max(np.abs(y))) * n
    raise ValueError(f"unknown noise mode {mode!r}")
