"""Reproducible random streams keyed by (master_seed, replica_index).

Streams are built on numpy's counter-based Philox generator with the pair
(master_seed, replica_index) as the 128-bit key, so distinct replicas get
independent streams by construction.  The event-loop kernels run their own
xoshiro256++ generator; its 256-bit state is drawn from the same Philox
stream, which keeps replica independence and bit-reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one replica's random stream."""

    master_seed: int
    replica_index: int = 0

    def __post_init__(self):
        if self.replica_index < 0:
            raise ValueError("replica_index must be >= 0")

    def generator(self, substream: int = 0) -> np.random.Generator:
        """Philox generator for this replica (substream splits further)."""
        if not 0 <= substream < 2 ** 16:
            raise ValueError("substream must fit in 16 bits")
        key = np.array([
            self.master_seed & 0xFFFFFFFFFFFFFFFF,
            ((self.replica_index & 0xFFFFFFFFFFFF) << 16) | substream,
        ], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def kernel_state(self, substream: int = 0) -> np.ndarray:
        """256-bit xoshiro256++ state for the jitted event loop."""
        raw = self.generator(substream).integers(
            0, 2 ** 64, size=4, dtype=np.uint64)
        while not raw.any():  # the all-zero state is absorbing for xoshiro
            raw = self.generator(substream).integers(
                0, 2 ** 64, size=4, dtype=np.uint64)
        return raw


def replica_kernel_states(master_seed: int, n_replicas: int,
                          substream: int = 0) -> np.ndarray:
    """Stacked kernel states for a deterministic replica sweep."""
    out = np.empty((n_replicas, 4), dtype=np.uint64)
    for r in range(n_replicas):
        out[r] = SeedSpec(master_seed, r).kernel_state(substream)
    return out
