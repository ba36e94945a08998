"""Seed plumbing: one root seed fans out into independent reproducible streams."""

from __future__ import annotations

import zlib

import numpy as np

SeedLike = "int | np.random.SeedSequence | np.random.Generator | None"


def as_rng(seed) -> np.random.Generator:
    """Return a Generator; Generators pass through, everything else seeds a new one."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _as_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def subseed(root: int, *parts) -> np.random.SeedSequence:
    """Derive an independent SeedSequence from a root seed and a label path.

    String parts are hashed with crc32 so labels are stable across runs and
    platforms; integer parts are used as-is.
    """
    return np.random.SeedSequence([_as_word(root), *(_as_word(p) for p in parts)])


def derive_int(root: int, *parts) -> int:
    """A plain integer seed derived from a root seed and a label path."""
    return int(subseed(root, *parts).generate_state(1)[0])
