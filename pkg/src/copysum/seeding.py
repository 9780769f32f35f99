"""Named RNG substreams so one root seed drives every random choice."""

from __future__ import annotations

import zlib

import numpy as np


def seed_key(root_seed: int, name: str) -> list[int]:
    """Entropy for the (root_seed, name) substream; feed to default_rng."""
    return [root_seed, zlib.crc32(name.encode("utf-8"))]


def named_rng(root_seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible generator for (root_seed, name)."""
    return np.random.default_rng(seed_key(root_seed, name))
