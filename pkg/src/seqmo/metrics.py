"""Hypervolume and update-count bookkeeping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .moea import fast_nondominated_sort


def hypervolume_2d(front, ref) -> float:
    """Exact area dominated by ``front`` and bounded by ``ref`` (minimization).

    Points that do not strictly dominate ``ref`` contribute nothing.
    """
    F = np.asarray(front, dtype=float).reshape(-1, np.size(ref))
    ref = np.asarray(ref, dtype=float)
    if ref.size != 2:
        raise ValueError(f"hypervolume_2d needs 2 objectives, got {ref.size}")
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    # staircase: keep points that lower the running f2 minimum
    prev_min = np.concatenate([[ref[1]], np.minimum.accumulate(F[:, 1])[:-1]])
    F = F[F[:, 1] < prev_min]
    widths = np.append(F[1:, 0], ref[0]) - F[:, 0]
    area = np.sum(widths * (ref[1] - F[:, 1]))
    return float(area)


def normalize_front(front, lower, upper) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper <= lower):
        raise ValueError("normalization bounds need upper > lower in every objective")
    return (np.asarray(front, dtype=float) - lower) / (upper - lower)


def nondominated(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    return F[fast_nondominated_sort(F)[0]]


def union_bounds(fronts) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise min/max of every point in ``fronts``."""
    allF = np.vstack([np.asarray(f, dtype=float) for f in fronts])
    return allF.min(axis=0), allF.max(axis=0)


def normalized_hv(F, lower, upper, ref=(1.0, 1.0)) -> float:
    return hypervolume_2d(normalize_front(nondominated(F), lower, upper), ref)


@dataclass
class UpdateTrace:
    """Per training iteration: population slots taken by generated solutions."""

    iterations: list[int] = field(default_factory=list)
    generations: list[int] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)

    def start(self, iteration: int, generation: int) -> None:
        if self.iterations and iteration < self.iterations[-1]:
            raise ValueError("iterations must be non-decreasing")
        if not self.iterations or self.iterations[-1] != iteration:
            self.iterations.append(iteration)
            self.generations.append(generation)
            self.counts.append(0)

    def __len__(self):
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "generation", "updated"])
            for row in zip(self.iterations, self.generations, self.counts):
                w.writerow(row)


def record_update(trace: UpdateTrace, iteration: int, accepted: bool, generation: int = -1) -> UpdateTrace:
    """Credit one accepted (or rejected) generated solution to ``iteration``."""
    if trace.iterations and iteration < trace.iterations[-1]:
        raise ValueError("iterations must be non-decreasing")
    trace.start(iteration, generation)
    if accepted:
        trace.counts[-1] += 1
    return trace
