"""Sub-seed derivation from one master seed by labeled hashing."""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_SEED = 20240601


def derive_seed(master: int, *labels: object) -> int:
    """Stable 63-bit seed for ``(master, *labels)``; independent of call order."""
    text = "/".join([str(int(master)), *map(str, labels)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def rng_for(master: int, *labels: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *labels))
