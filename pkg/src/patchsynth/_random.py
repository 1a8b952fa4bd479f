"""Seedable random streams.

All randomness in the package goes through :func:`make_rng`, which builds a
``numpy.random.Generator`` on the PCG64 bit generator seeded by a
``SeedSequence``.  PCG64 output and the SeedSequence hash are specified
bit-for-bit by numpy and do not depend on the platform.

Gaussian variates use the Box-Muller transform on 53-bit uniforms::

    u1 = 1 - U[0, 1)        # in (0, 1], keeps log finite
    u2 = U[0, 1)
    g0 = sqrt(-2 log u1) * cos(2 pi u2)
    g1 = sqrt(-2 log u1) * sin(2 pi u2)

Pairs are emitted interleaved (g0, g1, g0', g1', ...).  Laplace variates use
the inverse CDF of one uniform.
"""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.Generator


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for ``seed`` and an optional path of sub-stream keys.

    ``make_rng(s, i)`` and ``make_rng(s, j)`` are statistically independent
    streams for ``i != j``; the derivation is numpy's SeedSequence hash of
    ``(seed, spawn_key=keys)``.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(int(seed))


def gaussian(rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` standard normal variates by Box-Muller."""
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:size]


def laplace(rng: np.random.Generator, size: int, scale: float = 1.0) -> np.ndarray:
    """Zero-mean Laplace variates with density ``exp(-|x|/scale) / (2 scale)``."""
    u = rng.random(size) - 0.5
    # u == -0.5 has probability 2**-53; nudge it into the open interval
    u = np.where(u == -0.5, -0.5 + 2.0**-54, u)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
