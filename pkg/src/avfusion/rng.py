"""Deterministic random-number streams.

Every stochastic operation in the toolkit draws from a ``numpy.random.Generator``
backed by PCG64. Independent components derive their own stream from one global
seed via a fixed splitting scheme:

    stream(seed, label) = Generator(PCG64(SeedSequence([seed, crc32(label)])))

so adding or reordering components never perturbs another component's draws.
"""

from __future__ import annotations

import zlib

import numpy as np


def subseed(seed: int, label: str) -> np.random.SeedSequence:
    """Derive the seed sequence for one named component of a run."""
    return np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8"))])


def stream(seed: int, label: str) -> np.random.Generator:
    """Deterministic generator for (seed, label); same pair, same draws."""
    return np.random.Generator(np.random.PCG64(subseed(seed, label)))
