"""Deterministic RNG substream derivation.

Every random draw in the package flows from one root seed. Independent
streams are carved out by hashing the root seed together with a token
path (module name, purpose, indices), so results never depend on the
order in which streams are consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, *tokens: int | str) -> int:
    """Hash ``(root_seed, *tokens)`` into a new 64-bit root seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root_seed)).encode("ascii"))
    for tok in tokens:
        h.update(b"/")
        h.update(str(tok).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def substream(root_seed: int, *tokens: int | str) -> np.random.Generator:
    """Return a generator keyed by ``(root_seed, *tokens)``.

    The same arguments always yield the same stream; distinct token paths
    yield statistically independent streams.
    """
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(root_seed)).encode("ascii"))
    for tok in tokens:
        h.update(b"/")
        h.update(str(tok).encode("utf-8"))
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))
