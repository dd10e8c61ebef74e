"""Seeded random streams for reproducible experiments."""

from enum import IntEnum

import numpy as np

SEED_MASK = (1 << 64) - 1


class Purpose(IntEnum):
    """What a random stream is used for. Values are part of the stream key."""

    MEASUREMENT = 1
    INIT = 2
    PACKET_LOSS = 3
    TRACKING = 4
    RUN = 5


class SeedStreams:
    """
    Hands out independent generators derived from one 64-bit master seed.

    A stream is keyed by ``(purpose, *index)`` so that adding a new purpose or a
    new index never changes the draws of an existing one.
    """

    def __init__(self, seed: int):
        """
        Parameters
        ----------
        seed : int
            Master seed, reduced modulo 2**64
        """
        self._seed = int(seed) & SEED_MASK

    @property
    def seed(self) -> int:
        return self._seed

    def generator(self, purpose: Purpose, *index: int) -> np.random.Generator:
        """
        Get the generator for a given purpose and index.

        Parameters
        ----------
        purpose : Purpose
            Stream purpose
        *index : int
            Non-negative integers further identifying the stream (round, node, sample)

        Returns
        -------
        np.random.Generator
            A fresh generator; calling twice with the same key gives identical draws
        """
        key = [self._seed, int(purpose), *(int(i) for i in index)]
        return np.random.default_rng(np.random.SeedSequence(key))

    def run_seed(self, k: int) -> int:
        """Derive the 64-bit seed of the k-th replication of an experiment."""
        seq = np.random.SeedSequence([self._seed, int(Purpose.RUN), int(k)])
        return int(seq.generate_state(1, dtype=np.uint64)[0])
