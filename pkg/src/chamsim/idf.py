"""Keyed index derivation: maps a line address to one set index per division.

The mapping is a fixed-round ARX permutation over 64-bit inputs (a SPECK-like
round on two 32-bit halves), keyed per division.  Cryptographic strength is not
a goal here; statistical quality is, and it is covered by the uniformity and
key-independence tests.
"""

import random
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError

_M32 = 0xFFFFFFFF
_M64 = 0xFFFFFFFFFFFFFFFF

ROUNDS = 8


def _splitmix64(state):
    """Advance a splitmix64 state, return (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return state, z ^ (z >> 31)


def _round_keys(key_material):
    """Expand 64 bits of key material into ROUNDS 32-bit round keys."""
    rks = []
    st = key_material
    for _ in range(ROUNDS):
        st, out = _splitmix64(st)
        rks.append(out & _M32)
    return tuple(rks)


@dataclass(frozen=True)
class IdfKey:
    """One division's key: 64 bits of material plus a generation counter."""

    key_material: int
    key_id: int = 0
    round_keys: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.round_keys:
            object.__setattr__(self, "round_keys", _round_keys(self.key_material))

    def hex(self):
        return f"{self.key_material:016x}"

    @classmethod
    def from_hex(cls, text, key_id=0):
        return cls(int(text, 16), key_id)


def permute(a, key):
    """Keyed 64-bit ARX permutation (8 rounds on 32-bit halves)."""
    x = (a >> 32) & _M32
    y = a & _M32
    for rk in key.round_keys:
        x = ((((x >> 8) | (x << 24)) & _M32) + y) & _M32
        x ^= rk
        y = (((y << 3) | (y >> 29)) & _M32) ^ x
    return (x << 32) | y


def permute_batch(addrs, key):
    """Vectorized permute() over a uint64 numpy array."""
    a = np.asarray(addrs, dtype=np.uint64)
    x = (a >> np.uint64(32)).astype(np.uint32)
    y = a.astype(np.uint32)
    for rk in key.round_keys:
        x = ((x >> np.uint32(8)) | (x << np.uint32(24))) + y
        x ^= np.uint32(rk)
        y = ((y << np.uint32(3)) | (y >> np.uint32(29))) ^ x
    return (x.astype(np.uint64) << np.uint64(32)) | y.astype(np.uint64)


def generate_keys(seed, d, generation=0):
    """Draw d pairwise-distinct keys, deterministically from seed.

    generation feeds the stream so that re-keying under the same master seed
    yields fresh but replayable material.
    """
    if d < 1:
        raise InvalidConfigError("division count d must be >= 1")
    rng = random.Random(f"{seed}:{generation}")
    return keys_from_rng(rng, d, generation)


def keys_from_rng(rng, d, generation=0):
    """Draw d keys from an already-seeded PRNG stream."""
    if d < 1:
        raise InvalidConfigError("division count d must be >= 1")
    return tuple(IdfKey(rng.getrandbits(64), generation) for _ in range(d))


def _check_sets(s):
    if s < 1 or (s & (s - 1)) != 0:
        raise InvalidConfigError(f"set count s={s} is not a power of two")


def derive_indices(a, keys, s):
    """Return one set index in [0, s) per key, for line address a.

    Pure and deterministic; the low log2(s) bits of the permuted address are
    the index.
    """
    _check_sets(s)
    if not keys:
        raise InvalidConfigError("keys must be nonempty")
    mask = s - 1
    return tuple(permute(a, k) & mask for k in keys)


def derive_indices_batch(addrs, key, s):
    """Vectorized single-division index derivation over a uint64 array."""
    _check_sets(s)
    return (permute_batch(addrs, key) & np.uint64(s - 1)).astype(np.int64)
