"""Pinned random number generation.

All simulation randomness comes from numpy's Philox-4x64 counter-based bit
generator. Uniforms are ``Generator.random`` doubles; normal variates are
produced here with the polar Box–Muller (Marsaglia) method rather than
numpy's ziggurat, so the mapping from seed to sample is fixed by this file.

Per-cell seeds are derived with :class:`numpy.random.SeedSequence`, whose
hashing of the entropy words is stable across numpy releases.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))


def derive_seed(base_seed: int, *keys: int) -> int:
    """Mix ``base_seed`` with integer keys into a fresh 64-bit seed."""
    entropy = [int(base_seed) & _MASK64, *(int(k) for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def split_seed(seed: int, n: int = 2) -> list[int]:
    """``n`` independent child seeds of ``seed``."""
    children = np.random.SeedSequence(int(seed) & _MASK64).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal variates by the polar Box–Muller method.

    Pairs (u, v) are drawn uniformly on [-1, 1)²; pairs outside the open unit
    disc (or at the origin) are rejected. Each accepted pair yields two
    normals, emitted in (u-derived, v-derived) order.
    """
    shape = (size,) if np.isscalar(size) else tuple(size)
    n = int(np.prod(shape))
    out = np.empty(n)
    filled = 0
    while filled < n:
        pairs = (n - filled + 1) // 2
        batch = int(pairs * 1.28) + 8
        uv = 2.0 * rng.random((batch, 2)) - 1.0
        s = np.einsum("ij,ij->i", uv, uv)
        ok = (s > 0.0) & (s < 1.0)
        uv, s = uv[ok], s[ok]
        z = uv * np.sqrt(-2.0 * np.log(s) / s)[:, None]
        z = z.reshape(-1)[: n - filled]
        out[filled : filled + z.size] = z
        filled += z.size
    return out.reshape(shape)
