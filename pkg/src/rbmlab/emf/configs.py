"""Particle configurations eta: sites -> N with a fixed total."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

ENUMERATION_CAP = 10 ** 6


@dataclass(frozen=True, order=True)
class Configuration:
    """Occupation numbers on sites 0..n_sites-1, stored densely."""

    occupation: tuple

    @staticmethod
    def from_counts(counts: dict, n_sites: int) -> "Configuration":
        occ = [0] * n_sites
        for site, k in counts.items():
            if k < 0:
                raise ValueError("particle counts must be nonnegative")
            occ[site] += int(k)
        return Configuration(tuple(occ))

    @property
    def n_sites(self) -> int:
        return len(self.occupation)

    @property
    def total(self) -> int:
        return sum(self.occupation)

    @property
    def counts(self) -> dict:
        return {i: k for i, k in enumerate(self.occupation) if k}

    def __getitem__(self, site: int) -> int:
        return self.occupation[site]

    def move(self, i: int, j: int) -> "Configuration":
        """eta^{i,j}: one particle from i to j; identity when site i is empty."""
        if self.occupation[i] == 0 or i == j:
            return self
        occ = list(self.occupation)
        occ[i] -= 1
        occ[j] += 1
        return Configuration(tuple(occ))

    def label(self) -> str:
        return "{" + ",".join(f"{i}:{k}" for i, k in self.counts.items()) + "}"

    def __str__(self) -> str:
        return self.label()


def count_configs(n_sites: int, d: int) -> int:
    return math.comb(n_sites + d - 1, d)


def enumerate_configs(n_sites: int, d: int) -> list:
    """All configurations with ``d`` particles, ordered lexicographically by
    the sorted particle positions."""
    if count_configs(n_sites, d) > ENUMERATION_CAP:
        raise ValueError(f"{count_configs(n_sites, d)} configurations exceed the cap {ENUMERATION_CAP}")
    out = []
    for pos in itertools.combinations_with_replacement(range(n_sites), d):
        occ = [0] * n_sites
        for p in pos:
            occ[p] += 1
        out.append(Configuration(tuple(occ)))
    return out
