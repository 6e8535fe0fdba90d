"""Permutation genotypes, objective vectors, populations and seeded RNG streams.

Permutations are stored 0-based as integer numpy arrays; serialized formats
use 1-based indices and convert through :func:`to_external` /
:func:`from_external`.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class PermutationError(ValueError):
    pass


def is_permutation(order: Sequence[int] | np.ndarray, n: int | None = None) -> bool:
    """True if ``order`` holds every index ``0..n-1`` exactly once."""
    arr = np.asarray(order)
    if arr.ndim != 1 or arr.size == 0:
        return False
    if n is not None and arr.size != n:
        return False
    if not np.issubdtype(arr.dtype, np.integer):
        return False
    seen = np.zeros(arr.size, dtype=bool)
    if arr.min() < 0 or arr.max() >= arr.size:
        return False
    seen[arr] = True
    return bool(seen.all())


def check_permutation(order, n: int | None = None) -> np.ndarray:
    arr = np.asarray(order)
    if not is_permutation(arr, n):
        raise PermutationError(f"not a valid permutation of length {n or arr.size}: {arr!r}")
    return arr.astype(np.int64, copy=False)


def to_external(order: np.ndarray) -> list[int]:
    return [int(i) + 1 for i in order]


def from_external(order: Iterable[int]) -> np.ndarray:
    return check_permutation(np.asarray(list(order), dtype=np.int64) - 1)


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random permutation of ``0..n-1`` (Fisher-Yates)."""
    if n < 1:
        raise ValueError(f"permutation length must be >= 1, got {n}")
    return rng.permutation(n).astype(np.int64)


def dominates(a, b) -> bool:
    """Pareto dominance under minimization."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"objective dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True iff row ``i`` of ``F`` dominates row ``j``."""
    F = np.asarray(F, dtype=float)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


@dataclass
class Individual:
    genotype: np.ndarray
    objectives: np.ndarray
    # MOEA/D subproblem that produced (or, for generated solutions, inherited)
    # this individual; None outside MOEA/D.
    origin: int | None = None

    def copy(self) -> "Individual":
        return Individual(self.genotype.copy(), self.objectives.copy(), self.origin)


@dataclass
class Population:
    members: list[Individual]
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("population capacity must be positive")
        if len(self.members) > self.capacity:
            raise ValueError(
                f"{len(self.members)} members exceed capacity {self.capacity}"
            )

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([m.objectives for m in self.members], dtype=float)

    def copy(self) -> "Population":
        return Population([m.copy() for m in self.members], self.capacity)


def _stream_key(name: str) -> int:
    return zlib.crc32(name.encode())


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent generator for a named stream of a run seed.

    Streams are keyed by name, not by spawn order.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(seed, spawn_key=(_stream_key(stream),))
    return np.random.Generator(np.random.PCG64DXSM(ss))


@dataclass
class RngStreams:
    seed: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._cache:
            self._cache[name] = make_rng(self.seed, name)
        return self._cache[name]
