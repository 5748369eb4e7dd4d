"""Named, hash-based seed derivation.

Every source of randomness in the package draws from a generator obtained
through ``derive_rng(master, *names)``. The derivation is a SHA-256 hash of
the master seed and the name path, so streams are independent of each other
and of execution order, which is what makes threaded generation reproducible.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *path) -> int:
    """Return a 64-bit seed for the stream named by ``path`` under ``master``."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(master: int, *path) -> np.random.Generator:
    """Generator seeded from the named sub-stream of ``master``."""
    return np.random.default_rng(derive_seed(master, *path))
