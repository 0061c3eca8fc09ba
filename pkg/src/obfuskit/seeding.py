"""Deterministic seed derivation.

Every stochastic stage gets its own generator derived from a master seed and
a tuple of keys, so results never depend on call order or worker count.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed, *keys):
    """Hash ``seed`` and ``keys`` into a new unsigned 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _MASK64).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(repr(key).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed, *keys):
    """Return a ``numpy.random.Generator`` for the derived stream."""
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.default_rng(int(seed) & _MASK64)
