"""Counter-based random streams keyed by (seed, replicate, role)."""
from __future__ import annotations

import os

import numpy as np

SEED_ENV = "MHCOUPLINGS_SEED"

ROLE_CHAIN = 0
ROLE_SPLIT = 1
ROLE_REFERENCE = 2


def default_seed(fallback: int = 20240101) -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else fallback


def stream(seed: int, replicate: int = 0, role: int = ROLE_CHAIN) -> np.random.Generator:
    """Independent Philox stream; steps within a replicate advance its counter."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(role)))
    return np.random.Generator(np.random.Philox(ss))


class UniformBuffer:
    """Scalar uniforms drawn in blocks, for tight Python loops."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._buf = rng.random(block)
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == self.block:
            self._buf = self.rng.random(self.block)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)
