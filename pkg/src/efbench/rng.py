"""Deterministic random-number streams, splittable by name.

Every stochastic step in the pipeline (init, dropout, subsampling, synthetic
data) pulls from a named child stream of one master seed, so a whole
experiment is reproducible from a single integer and stream names never
collide across components.
"""

import hashlib

import numpy as np


def _name_to_int(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A named, seedable random stream backed by numpy's PCG64.

    Child streams are derived from (seed, name) only, so the draw order of
    one component cannot perturb another.
    """

    def __init__(self, seed: int, name: str = "root"):
        self.seed = int(seed)
        self.name = name
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, _name_to_int(name)]))
        )

    def derive(self, name: str) -> "RngStream":
        """Child stream for a sub-component; deterministic in (seed, path)."""
        return RngStream(self.seed, f"{self.name}/{name}")

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, n, size, replace=False):
        return self._gen.choice(n, size=size, replace=replace)

    def permutation(self, n):
        return self._gen.permutation(n)


def derive_seed(master: int, name: str) -> int:
    """Stable 31-bit child seed from (master, name); hashlib, not hash()."""
    digest = hashlib.sha256(f"{int(master)}/{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") % (2**31)


def fresh_seed() -> int:
    """A non-deterministic seed for runs where the user gave none."""
    return int.from_bytes(np.random.SeedSequence().entropy.to_bytes(16, "little")[:4], "little")
