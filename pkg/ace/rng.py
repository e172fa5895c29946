"""Seeded random streams.

A stream is a (seed, counter) pair; the same pair always yields the same numbers.
Child streams are derived from integer keys, so every stage, ε index and sample
index of an experiment gets its own stream no matter which worker runs it.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Stage(IntEnum):
    DATA = 1
    VICTIM = 2
    PROXY = 3
    FOREIGN_PROXY = 4
    ENSEMBLE = 5
    MC_VICTIM = 6
    SELNET = 7
    EVAL = 8
    ATTACK = 9
    LABEL_NOISE = 10


@dataclass(frozen=True)
class RngState:
    seed: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.counter < 0:
            raise ValueError("counter must be non-negative")

    def _sequence(self, *keys):
        return np.random.SeedSequence(self.seed, spawn_key=(self.counter, *[int(k) for k in keys]))

    def generator(self):
        return np.random.Generator(np.random.PCG64(self._sequence()))

    def derive(self, *keys):
        word = self._sequence(*keys).generate_state(1, dtype=np.uint64)[0]
        return RngState(seed=int(word))

    def seed_for(self, *keys):
        """A plain integer seed for an independent child, e.g. a model's training seed."""
        return self.derive(*keys).seed
