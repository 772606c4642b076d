"""Deterministic random numbers: splitmix64 seeding, xoshiro256** streams, Box-Muller.

Everything here is a pure function of (seed, count), independent of platform
and of numpy's global state, so corpora and noise operators are bit-reproducible.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK = (1 << 64) - 1


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 wraparound is intended
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of a splitmix64 stream started at `seed`."""
    s = np.uint64(seed & _MASK)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    return _mix64(s + idx * _GOLDEN)


def derive_seed(seed: int, index: int) -> int:
    """Per-item sub-seed: seed xor index pushed through the splitmix64 mixer."""
    return int(_mix64(np.uint64(seed & _MASK) ^ np.uint64(index & _MASK)))


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    k = np.uint64(k)
    return (x << k) | (x >> (np.uint64(64) - k))


def random_u64(seed: int, count: int) -> np.ndarray:
    """`count` raw 64-bit words from parallel xoshiro256** streams.

    Streams are seeded from splitmix64 (four state words each) and stepped
    eight times; outputs are laid out stream-major so the result depends only
    on (seed, count prefix).
    """
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    per_stream = 8
    n_streams = -(-count // per_stream)
    state = splitmix64(seed, 4 * n_streams).reshape(n_streams, 4)
    s0, s1, s2, s3 = (state[:, i].copy() for i in range(4))
    out = np.empty((n_streams, per_stream), dtype=np.uint64)
    for step in range(per_stream):
        out[:, step] = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
    return out.reshape(-1)[:count]


def uniforms(seed: int, count: int) -> np.ndarray:
    """`count` uniforms in (0, 1]."""
    bits = random_u64(seed, count) >> np.uint64(11)
    return (bits.astype(np.float64) + 1.0) * (2.0 ** -53)


def normals(seed: int, count: int) -> np.ndarray:
    """`count` i.i.d. standard normals via the Box-Muller transform."""
    if count <= 0:
        return np.empty(0, dtype=np.float64)
    m = count + (count & 1)
    u = uniforms(seed, m)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(m, dtype=np.float64)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:count]
