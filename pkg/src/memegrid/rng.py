"""Counter-based random streams (Philox4x64-10).

Every random draw in a simulation is addressed, not sequenced: a draw is a
pure function of (root seed, purpose, entity, step, block index). This makes
results bit-identical regardless of evaluation order, worker count, or which
branches of the step pipeline actually consume randomness.

Stream addressing convention used across the whole package:

    key     = (root_seed, purpose)
    counter = (entity, step, block, 0)

where ``entity`` is usually a flat agent index and each 128-bit block yields
four uint64 words. Word layouts per draw kind:

* uniforms:  draw ``i`` is word ``i % 4`` of block ``i // 4``, mapped to
  [0, 1) via the top 53 bits.
* open uniforms: same indexing, mapped to (0, 1) via the top 52 bits + 1/2.
* gaussians: Box-Muller pairs; block words (x0, x1, x2, x3) give
  (z0, z1) from (x0, x1) and (z2, z3) from (x2, x3).
* gumbels: open uniform -> -log(-log(u)).

The compiled kernel re-implements the identical mapping in C; a known-answer
test pins both against numpy's Philox.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

U64 = np.uint64

_M0 = U64(0xD2E7470EE14C6C93)
_M1 = U64(0xCA5A826395121157)
_W0 = 0x9E3779B97F4A7C15
_W1 = 0xBB67AE8584CAA73B
_MASK32 = U64(0xFFFFFFFF)
_MASK64 = (1 << 64) - 1

# Purpose tags. Values are part of the on-disk determinism contract: changing
# them changes every simulation, so append only.
P_INIT = 0  # genome initialization
P_DELIVER = 1  # perception noise at buffer insertion
P_ATTEND = 2  # gumbel noise for message selection
P_GEN = 3  # output symbol sampling
P_PROMOTE = 4  # promotion / gate / target choice
P_MUTATE = 5  # offspring weight mutation (entity = promoter)
P_BIRTH = 6  # newborn bootstrap broadcast (entity = target site)
P_TASK_RESET = 7  # per-rollout environment seeding
P_TASK_ACT = 8  # action sampling (block = environment step)
P_ENV = 9  # internal draws of the built-in environment (key0 = env seed)

TWO_M53 = 2.0**-53
TWO_M52 = 2.0**-52


def _mulhilo(a, b):
    """128-bit product of scalar uint64 ``a`` with uint64 array ``b``."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> U64(32)
    b_lo = b & _MASK32
    b_hi = b >> U64(32)
    t = a_hi * b_lo + ((a_lo * b_lo) >> U64(32))
    t2 = a_lo * b_hi + (t & _MASK32)
    hi = a_hi * b_hi + (t >> U64(32)) + (t2 >> U64(32))
    return hi, lo


def philox4(key0, key1, c0, c1, c2, c3):
    """10-round Philox4x64 block function, broadcast over keys and counters.

    Returns four uint64 arrays of the broadcast shape. Matches the Random123
    reference (numpy's Philox emits our block ``c0+1`` first for a configured
    counter ``c0``; the test suite pins this correspondence).
    """
    def _u64(v):
        if isinstance(v, (int, np.integer)):
            v = int(v) & _MASK64
        return np.asarray(v, dtype=U64)

    arrs = np.broadcast_arrays(
        _u64(key0), _u64(key1), _u64(c0), _u64(c1), _u64(c2), _u64(c3)
    )
    shape = arrs[0].shape
    k0, k1 = (np.atleast_1d(a).astype(U64, copy=False) for a in arrs[:2])
    x0, x1, x2, x3 = (np.atleast_1d(a).astype(U64, copy=True) for a in arrs[2:])
    for r in range(10):
        rk0 = k0 + U64((r * _W0) & _MASK64)
        rk1 = k1 + U64((r * _W1) & _MASK64)
        hi0, lo0 = _mulhilo(_M0, x0)
        hi1, lo1 = _mulhilo(_M1, x2)
        x0 = hi1 ^ x1 ^ rk0
        x1 = lo1
        x2 = hi0 ^ x3 ^ rk1
        x3 = lo0
    return tuple(x.reshape(shape) for x in (x0, x1, x2, x3))


def _blocks(key0, key1, entity, step, nblocks, block_offset=0):
    """Word matrix (..., nblocks*4) for the given stream address."""
    entity = np.asarray(entity, dtype=U64)
    blocks = np.arange(block_offset, block_offset + nblocks, dtype=U64)
    c0 = entity[..., None]
    c2 = blocks[(None,) * entity.ndim]
    w = philox4(key0, key1, c0, step, c2, 0)
    out = np.stack(w, axis=-1)  # (..., nblocks, 4)
    return out.reshape(out.shape[:-2] + (nblocks * 4,))


def _to_u01(x):
    return (x >> U64(11)).astype(np.float64) * TWO_M53


def _to_open(x):
    return ((x >> U64(12)).astype(np.float64) + 0.5) * TWO_M52


word_to_u01 = _to_u01
word_to_open = _to_open


def uniforms(key0, key1, entity, step, n, block_offset=0):
    """``n`` uniforms in [0, 1) per entity; shape = entity.shape + (n,)."""
    nb = -(-n // 4)
    return _to_u01(_blocks(key0, key1, entity, step, nb, block_offset))[..., :n]


def open_uniforms(key0, key1, entity, step, n, block_offset=0):
    nb = -(-n // 4)
    return _to_open(_blocks(key0, key1, entity, step, nb, block_offset))[..., :n]


def gaussians(key0, key1, entity, step, n, block_offset=0):
    """``n`` standard normals per entity (Box-Muller on word pairs)."""
    nb = -(-n // 4)
    w = _blocks(key0, key1, entity, step, nb, block_offset)
    w = w.reshape(w.shape[:-1] + (nb, 4))
    u1 = _to_open(w[..., 0::2])  # radius term must stay away from 0
    u2 = _to_u01(w[..., 1::2])
    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    z = np.empty(w.shape[:-1] + (4,), dtype=np.float64)
    z[..., 0::2] = r * np.cos(theta)
    z[..., 1::2] = r * np.sin(theta)
    return z.reshape(z.shape[:-2] + (nb * 4,))[..., :n]


def gumbels(key0, key1, entity, step, n, block_offset=0):
    u = open_uniforms(key0, key1, entity, step, n, block_offset)
    return -np.log(-np.log(u))


@dataclass(frozen=True)
class RngStream:
    """Handle for one addressed stream; draws are stateless and repeatable."""

    root_seed: int
    purpose: int
    entity: int = 0
    step: int = 0

    def uniforms(self, n, block_offset=0):
        return uniforms(self.root_seed, self.purpose, self.entity, self.step, n, block_offset)

    def open_uniforms(self, n, block_offset=0):
        return open_uniforms(self.root_seed, self.purpose, self.entity, self.step, n, block_offset)

    def gaussians(self, n, block_offset=0):
        return gaussians(self.root_seed, self.purpose, self.entity, self.step, n, block_offset)

    def gumbels(self, n, block_offset=0):
        return gumbels(self.root_seed, self.purpose, self.entity, self.step, n, block_offset)

    def raw_words(self, nblocks, block_offset=0):
        return _blocks(self.root_seed, self.purpose, self.entity, self.step, nblocks, block_offset)
