"""Training pairs for the pointer network.

Offspring are split into an elite half (closer to the current front) and a
poor half, and each poor solution is paired with an elite one whose shifted
objective vector points in a similar direction. The poor genotype becomes
the network input and the elite genotype its target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .moea import crowding_distance, fast_nondominated_sort

SHIFT_EPS = 1e-12


@dataclass
class PairSet:
    data: list[np.ndarray]
    labels: list[np.ndarray]
    angles: np.ndarray
    poor_index: np.ndarray  # row of each pair in the angle matrix / C_poor
    elite_index: np.ndarray  # column of each pair in the angle matrix / C_elite
    angle_matrix: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.data)

    @property
    def total_angle(self) -> float:
        return float(np.sum(self.angles))


def divide_offspring(C) -> tuple[list[int], list[int]]:
    """Split offspring indices into ``(poor, elite)``.

    Fronts fill the elite set until it holds ``ceil(n/2)`` members; the front
    that crosses the boundary is split by crowding distance, larger distance
    staying elite.
    """
    n = len(C)
    if n < 2:
        raise ValueError(f"need at least 2 offspring to divide, got {n}")
    F = np.array([c.objectives for c in C], dtype=float)
    target = math.ceil(n / 2)
    elite: list[int] = []
    for front in fast_nondominated_sort(F):
        room = target - len(elite)
        if room <= 0:
            break
        if front.size <= room:
            elite.extend(front.tolist())
        else:
            cd = crowding_distance(F[front])
            elite.extend(front[np.argsort(-cd, kind="stable")[:room]].tolist())
    elite.sort()
    chosen = set(elite)
    poor = [i for i in range(n) if i not in chosen]
    return poor, elite


def objective_angle(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("angle undefined for a zero-norm objective vector")
    return float(np.arccos(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)))


def angle_matrix(P, E) -> np.ndarray:
    """Pairwise angles (radians) between rows of ``P`` and rows of ``E``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    np_, ne = np.linalg.norm(P, axis=1), np.linalg.norm(E, axis=1)
    if np.any(np_ == 0) or np.any(ne == 0):
        raise ValueError("angle undefined for a zero-norm objective vector")
    cos = (P @ E.T) / np.outer(np_, ne)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def shift_to_ideal(F, z=None, eps: float = SHIFT_EPS) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    z = F.min(axis=0) if z is None else np.asarray(z, dtype=float)
    return F - z + eps


def greedy_assignment(cost) -> np.ndarray:
    """Column index of the cheapest entry in each row (lowest index on ties)."""
    return np.argmin(np.asarray(cost), axis=1)


def hungarian(cost) -> np.ndarray:
    """Minimum-cost assignment for a square cost matrix.

    Returns ``col`` with ``col[i]`` the column assigned to row ``i``.
    Shortest augmenting path with row/column potentials, O(n^3).
    """
    c = np.asarray(cost, dtype=float)
    n = c.shape[0]
    if c.ndim != 2 or c.shape[1] != n:
        raise ValueError(f"cost matrix must be square, got {c.shape}")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[j] = row owning column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cols = np.flatnonzero(free) + 1
            cur = c[i0 - 1, cols - 1] - u[i0] - v[cols]
            better = cur < minv[cols]
            minv[cols[better]] = cur[better]
            way[cols[better]] = j0
            k = int(np.argmin(minv[cols]))
            j1 = int(cols[k])
            delta = minv[j1]
            u[match[used]] += delta
            v[used] -= delta
            minv[cols] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    col = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col[match[j] - 1] = j - 1
    return col


def rectangular_hungarian(cost) -> np.ndarray:
    """Assignment for an ``r x c`` matrix via constant padding to square.

    Returns, per row, its column or -1 when the row was matched to padding.
    The pad cost exceeds any real total, so padding never displaces a real
    match.
    """
    cost = np.asarray(cost, dtype=float)
    r, c = cost.shape
    n = max(r, c)
    pad = (np.abs(cost).max() if cost.size else 0.0) * n + math.pi * n + 1.0
    square = np.full((n, n), pad)
    square[:r, :c] = cost
    col = hungarian(square)[:r]
    col[col >= c] = -1
    return col


def _pairs(C_poor, C_elite, cols, A) -> PairSet:
    rows = np.flatnonzero(cols >= 0)
    cols = cols[rows]
    return PairSet(
        data=[C_poor[i].genotype for i in rows],
        labels=[C_elite[j].genotype for j in cols],
        angles=A[rows, cols],
        poor_index=rows,
        elite_index=cols,
        angle_matrix=A,
    )


def _angles_for(C_poor, C_elite, z=None) -> np.ndarray:
    if not C_poor or not C_elite:
        raise ValueError("both poor and elite sets must be non-empty")
    Fp = np.array([p.objectives for p in C_poor], dtype=float)
    Fe = np.array([e.objectives for e in C_elite], dtype=float)
    if z is None:
        z = np.minimum(Fp.min(axis=0), Fe.min(axis=0))
    return angle_matrix(shift_to_ideal(Fp, z), shift_to_ideal(Fe, z))


def greedy_match(C_poor, C_elite, z=None) -> PairSet:
    A = _angles_for(C_poor, C_elite, z)
    return _pairs(C_poor, C_elite, greedy_assignment(A), A)


def hungarian_match(C_poor, C_elite, z=None) -> PairSet:
    A = _angles_for(C_poor, C_elite, z)
    return _pairs(C_poor, C_elite, rectangular_hungarian(A), A)


def build_training_set(C, mode: str = "hungarian") -> tuple[PairSet, list[int], list[int]]:
    """Divide offspring and match poor to elite.

    Returns the pairs plus the poor and elite index lists into ``C``; the
    pair set's ``poor_index`` / ``elite_index`` index into those lists.
    """
    if mode not in ("greedy", "hungarian"):
        raise ValueError(f"unknown pairing mode {mode!r}")
    poor, elite = divide_offspring(C)
    C_poor = [C[i] for i in poor]
    C_elite = [C[i] for i in elite]
    z = np.array([c.objectives for c in C], dtype=float).min(axis=0)
    matcher = greedy_match if mode == "greedy" else hungarian_match
    return matcher(C_poor, C_elite, z), poor, elite


def save_pairs(pairs: PairSet, path, iteration: int | None = None) -> None:
    """Dump a pair set and its angle matrix as JSON (1-based genotypes)."""
    import json

    record = {
        "iteration": iteration,
        "pairs": [
            {
                "poor": int(p),
                "elite": int(e),
                "angle": float(a),
                "data": [int(x) + 1 for x in d],
                "label": [int(x) + 1 for x in lab],
            }
            for p, e, a, d, lab in zip(pairs.poor_index, pairs.elite_index, pairs.angles,
                                       pairs.data, pairs.labels)
        ],
        "angle_matrix": np.asarray(pairs.angle_matrix).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(record, fh)
