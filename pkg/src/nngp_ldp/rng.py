"""Counter-based, replayable random streams.

Every draw in the package comes from a generator keyed by
``(master_seed, stream_id, *path)``. Parallel work splits the path (layer,
replicate, Monte-Carlo block, ...) rather than sharing a generator, so the
variates never depend on scheduling or worker count.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int = 0
    stream_id: int = 0
    path: tuple = ()

    def child(self, *keys) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id, self.path + tuple(_key(k) for k in keys))

    def rng(self, *keys) -> np.random.Generator:
        spec = self.child(*keys) if keys else self
        ss = np.random.SeedSequence(
            int(spec.master_seed) % 2**64, spawn_key=(int(spec.stream_id),) + spec.path
        )
        return np.random.Generator(np.random.Philox(ss))

    def to_dict(self):
        return {"master_seed": self.master_seed, "stream_id": self.stream_id, "path": list(self.path)}


def as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    if seed is None:
        return SeedSpec()
    return SeedSpec(int(seed))
