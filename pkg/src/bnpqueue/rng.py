"""Seed handling.

Every random draw in the package goes through :func:`make_rng`, which wraps
NumPy's PCG64 bit generator seeded by a :class:`numpy.random.SeedSequence`.
Named sub-streams are derived as ``SeedSequence([seed, crc32(label), counter])``
so a single user-facing seed fans out into independent, reproducible streams
(``label`` is e.g. ``"simulate"`` or ``"bvm-cdf"``, ``counter`` a cell index).
"""

from __future__ import annotations

import zlib

import numpy as np

MAX_SEED = 2**64 - 1


def _check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def seed_sequence(seed, label: str | None = None, counter: int = 0) -> np.random.SeedSequence:
    """Return the seed sequence for ``(seed, label, counter)``."""
    seed = _check_seed(seed)
    if label is None:
        return np.random.SeedSequence(seed)
    return np.random.SeedSequence([seed, zlib.crc32(label.encode("utf-8")), int(counter)])


def make_rng(seed, label: str | None = None, counter: int = 0) -> np.random.Generator:
    """PCG64 generator for the stream ``(seed, label, counter)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, label, counter)))


def spawn(seed, n: int, label: str | None = None) -> list[np.random.Generator]:
    """``n`` independent generators split off a single stream."""
    children = seed_sequence(seed, label).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1), safe to push through a ppf."""
    return rng.random(n) + 2.0**-54
