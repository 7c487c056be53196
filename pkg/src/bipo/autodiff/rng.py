"""Seeded random streams.

All randomness goes through numpy's ``Generator`` backed by the PCG64 bit
generator (PCG XSL RR 128/64). Named sub-streams are derived with
``SeedSequence(seed, spawn_key=...)`` so each consumer gets an independent,
reproducible stream regardless of call order elsewhere.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(name: str | int) -> int:
    if isinstance(name, int):
        return name
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed: int, *stream: str | int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))
