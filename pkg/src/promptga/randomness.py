"""Seeded random-stream helpers: derived sub-streams and state checkpoints.

Built-in hash() is salted per process, so sub-stream seeds derive from
sha256 instead.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(base_seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{base_seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(base_seed: int, tag: str) -> random.Random:
    """Independent deterministic stream for one subsystem."""
    return random.Random(derive_seed(base_seed, tag))


def state_to_jsonable(rng: random.Random) -> list:
    version, internal, gauss_next = rng.getstate()
    return [version, list(internal), gauss_next]


def state_from_jsonable(doc: list) -> tuple:
    version, internal, gauss_next = doc
    return (int(version), tuple(int(x) for x in internal), gauss_next)
