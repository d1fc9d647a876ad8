import hashlib

import galois
import numpy as np


def stream_key(*name) -> int:
    digest = hashlib.sha256("/".join(str(part) for part in name).encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RandomStreams:
    """Named substreams derived from a single seed.

    The same (seed, name) always yields the same draws, independent of the
    order in which other streams are consumed.
    """

    def __init__(self, seed: int, GF: type[galois.FieldArray]):
        self.seed = seed
        self.GF = GF
        self._generators: dict[tuple, np.random.Generator] = {}

    def generator(self, *name) -> np.random.Generator:
        if name not in self._generators:
            sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(stream_key(*name),))
            self._generators[name] = np.random.default_rng(sequence)
        return self._generators[name]

    def field(self, *name, shape=()) -> galois.FieldArray:
        values = self.generator(*name).integers(0, self.GF.order, size=shape)
        return self.GF(values)

    def nonzero(self, *name, shape=()) -> galois.FieldArray:
        values = self.generator(*name).integers(1, self.GF.order, size=shape)
        return self.GF(values)

    def permutation(self, *name, items) -> list:
        items = list(items)
        order = self.generator(*name).permutation(len(items))
        return [items[i] for i in order]
