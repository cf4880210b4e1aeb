"""Counter-based random streams (Philox4x32-10).

Every random draw in the library is addressed, not sequential: a draw is
``philox4x32(key=(seed_lo, seed_hi), counter=(lane, serial, slot, purpose))``.
Lanes are path / excursion / tree indices, so any lane can be generated
independently, in any order, on any number of workers, and two runs that
share a seed but differ in marking parameters still see bit-identical path
randomness (marking draws live under their own purpose word).

Purpose words:
  0  path        diffusive increments, bridge minima, bisection refinement
  1  marks       skeleton-mark births/positions, node-mark Bernoullis
  2  jumps       jump interarrival times and sizes
  3  gw          discrete Galton-Watson sampling
  4  init        initial-state draws (e.g. optional initial-atom mark)

The python functions here are the reference implementation; the numba
kernels in ``_kernels`` replicate them instruction for instruction and the
test suite checks both against the published Philox4x32-10 test vectors.
"""

from __future__ import annotations

import numpy as np

MASK32 = 0xFFFFFFFF
MASK64 = 0xFFFFFFFFFFFFFFFF

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
PHILOX_ROUNDS = 10

# purpose words
PURPOSE_PATH = 0
PURPOSE_MARKS = 1
PURPOSE_JUMPS = 2
PURPOSE_GW = 3
PURPOSE_INIT = 4

# inverse powers of two used to map integer words to floats
INV_2_53 = 2.0 ** -53
INV_2_52 = 2.0 ** -52


def philox4x32(key0: int, key1: int, c0: int, c1: int, c2: int, c3: int):
    """One Philox4x32-10 block; returns four 32-bit words."""
    x0, x1, x2, x3 = c0 & MASK32, c1 & MASK32, c2 & MASK32, c3 & MASK32
    k0, k1 = key0 & MASK32, key1 & MASK32
    for _ in range(PHILOX_ROUNDS):
        p0 = (x0 * PHILOX_M0) & MASK64
        p1 = (x2 * PHILOX_M1) & MASK64
        hi0, lo0 = p0 >> 32, p0 & MASK32
        hi1, lo1 = p1 >> 32, p1 & MASK32
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return x0, x1, x2, x3


def split_key(seed: int):
    """Master seed (any non-negative int) -> Philox key pair."""
    seed = int(seed) & MASK64
    return seed & MASK32, seed >> 32


def uniform_pair(key0, key1, lane, serial, slot, purpose):
    """Two uniforms in (0,1] from one block (53-bit mantissas)."""
    w0, w1, w2, w3 = philox4x32(key0, key1, lane, serial, slot, purpose)
    a = ((w0 << 32) | w1) & MASK64
    b = ((w2 << 32) | w3) & MASK64
    return ((a >> 11) + 1) * INV_2_53, ((b >> 11) + 1) * INV_2_53


def uint64_pair(key0, key1, lane, serial, slot, purpose):
    w0, w1, w2, w3 = philox4x32(key0, key1, lane, serial, slot, purpose)
    return ((w0 << 32) | w1) & MASK64, ((w2 << 32) | w3) & MASK64


def uniforms(seed: int, lane: int, purpose: int, n: int, slot: int = 0) -> np.ndarray:
    """n uniforms in (0,1] from consecutive serials of one lane."""
    k0, k1 = split_key(seed)
    out = np.empty(2 * ((n + 1) // 2))
    for s in range((n + 1) // 2):
        u, v = uniform_pair(k0, k1, lane, s, slot, purpose)
        out[2 * s] = u
        out[2 * s + 1] = v
    return out[:n]


def philox4x32_vec(key0: int, key1: int, c0, c1, c2, c3):
    """Vectorised Philox4x32-10 over uint64 counter arrays (values < 2^32)."""
    m0, m1 = np.uint64(PHILOX_M0), np.uint64(PHILOX_M1)
    w0c, w1c = np.uint64(PHILOX_W0), np.uint64(PHILOX_W1)
    mask = np.uint64(MASK32)
    sh = np.uint64(32)
    x0 = np.asarray(c0, dtype=np.uint64) & mask
    x1 = np.asarray(c1, dtype=np.uint64) & mask
    x2 = np.asarray(c2, dtype=np.uint64) & mask
    x3 = np.asarray(c3, dtype=np.uint64) & mask
    k0 = np.uint64(key0 & MASK32)
    k1 = np.uint64(key1 & MASK32)
    for _ in range(PHILOX_ROUNDS):
        p0 = x0 * m0
        p1 = x2 * m1
        hi0, lo0 = p0 >> sh, p0 & mask
        hi1, lo1 = p1 >> sh, p1 & mask
        x0 = (hi1 ^ x1 ^ k0) & mask
        x1 = lo1
        x2 = (hi0 ^ x3 ^ k1) & mask
        x3 = lo0
        k0 = (k0 + w0c) & mask
        k1 = (k1 + w1c) & mask
    return x0, x1, x2, x3


def uniforms_vec(seed: int, lane: int, purpose: int, n: int, slot: int = 0) -> np.ndarray:
    """n uniforms in (0,1] for one lane: pairs from serial-indexed blocks."""
    k0, k1 = split_key(seed)
    m = (n + 1) // 2
    serial = np.arange(m, dtype=np.uint64)
    w0, w1, w2, w3 = philox4x32_vec(
        k0, k1, np.full(m, lane, dtype=np.uint64), serial,
        np.full(m, slot, dtype=np.uint64), np.full(m, purpose, dtype=np.uint64))
    a = (w0 << np.uint64(32)) | w1
    b = (w2 << np.uint64(32)) | w3
    out = np.empty(2 * m)
    out[0::2] = ((a >> np.uint64(11)) + np.uint64(1)) * INV_2_53
    out[1::2] = ((b >> np.uint64(11)) + np.uint64(1)) * INV_2_53
    return out[:n]


def normals_vec(seed: int, lane: int, purpose: int, n: int, slot: int = 0) -> np.ndarray:
    """n standard normals by Box-Muller on consecutive uniform pairs."""
    u = uniforms_vec(seed, lane, purpose, 2 * n, slot)
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    return r * np.cos(2.0 * np.pi * u[1::2])


class LaneStream:
    """Sequential double stream over one (seed, lane, purpose) address.

    Mirrors the draw discipline of the numba kernels: each call to
    ``next_pair`` consumes one Philox block (one serial).
    """

    def __init__(self, seed: int, lane: int, purpose: int):
        self.k0, self.k1 = split_key(seed)
        self.lane = lane
        self.purpose = purpose
        self.serial = 0

    def next_pair(self):
        u = uniform_pair(self.k0, self.k1, self.lane, self.serial, 0, self.purpose)
        self.serial += 1
        return u

    def next_uniform(self):
        return self.next_pair()[0]
