"""Hierarchical, counter-based random streams.

Every random draw in the package is addressed by a root seed plus an integer
path such as ``(replicate, attempt, outcome)``.  The path is fed to
``numpy.random.SeedSequence`` as a spawn key and drives a Philox generator,
so a stream depends only on its address and never on the order in which
streams are created or consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ValueError("stream path indices must be non-negative")
        object.__setattr__(self, "path", path)

    def child(self, *index: int) -> RngStream:
        return RngStream(self.seed, self.path + tuple(index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    @property
    def lineage(self) -> str:
        return f"{self.seed}:" + "/".join(str(p) for p in self.path)


def as_stream(rng: RngStream | int) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))
