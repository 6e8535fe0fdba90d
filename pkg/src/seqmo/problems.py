"""Multi-objective TSP and QAP instances.

Both problems are minimized over permutations. Instances are immutable after
construction and evaluation is a pure function, so they can be shared
between workers.

Text format (``save_instance`` / ``load_instance``)::

    seqmo-instance 1
    kind motsp
    n 3
    k 2
    seed 7
    matrix distance 1
    0.0 0.25 0.5
    ...

A MOTSP file holds ``k`` ``distance`` blocks. A MOQAP file holds one
``distance`` block (location distances) followed by ``k`` ``flow`` blocks.
Floats are written with ``repr`` so a save/load round trip is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
OPEN_EPS = 1e-9


class InstanceFormatError(ValueError):
    """Malformed instance file; message carries the line number and field."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MotspInstance:
    distances: np.ndarray  # (K, N, N)
    seed: int | None = None

    kind = "motsp"

    def __post_init__(self):
        d = _readonly(self.distances)
        if d.ndim != 3 or d.shape[1] != d.shape[2]:
            raise ValueError(f"distances must have shape (K, N, N), got {d.shape}")
        if d.shape[0] < 2:
            raise ValueError("at least two objectives are required")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        object.__setattr__(self, "distances", d)

    @property
    def n(self) -> int:
        return self.distances.shape[1]

    @property
    def n_obj(self) -> int:
        return self.distances.shape[0]

    def evaluate(self, tour) -> np.ndarray:
        return evaluate_motsp(self, tour)

    def check_invariants(self) -> None:
        d = self.distances
        off = ~np.eye(self.n, dtype=bool)
        if not np.array_equal(d, np.transpose(d, (0, 2, 1))):
            raise ValueError("distance matrices must be symmetric")
        if np.any(np.diagonal(d, axis1=1, axis2=2) != 0):
            raise ValueError("distance matrices must have a zero diagonal")
        if np.any(d[:, off] <= 0) or np.any(d[:, off] >= 1):
            raise ValueError("off-diagonal distances must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class MoqapInstance:
    distance: np.ndarray  # (N, N) location distances a_ij
    flows: np.ndarray  # (K, N, N) facility flows b^k_uv
    seed: int | None = None

    kind = "moqap"

    def __post_init__(self):
        a = _readonly(self.distance)
        b = _readonly(self.flows)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"distance matrix must be square, got {a.shape}")
        if b.ndim != 3 or b.shape[1:] != a.shape:
            raise ValueError(f"flows must have shape (K, {a.shape[0]}, {a.shape[0]}), got {b.shape}")
        if b.shape[0] < 2:
            raise ValueError("at least two objectives are required")
        for name, m in (("distance", a), ("flows", b)):
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise ValueError(f"{name} entries must be finite and non-negative")
        object.__setattr__(self, "distance", a)
        object.__setattr__(self, "flows", b)

    @property
    def n(self) -> int:
        return self.distance.shape[0]

    @property
    def n_obj(self) -> int:
        return self.flows.shape[0]

    def evaluate(self, assignment) -> np.ndarray:
        return evaluate_moqap(self, assignment)


def _as_order(perm, n: int) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (n,):
        raise ValueError(f"permutation length {p.size} does not match instance size {n}")
    return p


def evaluate_motsp(instance: MotspInstance, tour) -> np.ndarray:
    """Closed-tour length under each of the K distance matrices."""
    t = _as_order(tour, instance.n)
    return instance.distances[:, t, np.roll(t, -1)].sum(axis=1)


def evaluate_moqap(instance: MoqapInstance, assignment) -> np.ndarray:
    """``f_k = sum_ij a[i, j] * b_k[p[i], p[j]]`` for each flow matrix."""
    p = _as_order(assignment, instance.n)
    permuted = instance.flows[:, p][:, :, p]
    return np.einsum("ij,kij->k", instance.distance, permuted)


def _symmetric_uniform(n: int, rng: np.random.Generator, eps: float) -> np.ndarray:
    upper = np.triu(rng.uniform(eps, 1.0 - eps, size=(n, n)), k=1)
    return upper + upper.T


def generate_motsp(n: int, k: int, rng: np.random.Generator, seed: int | None = None) -> MotspInstance:
    if n < 3:
        raise ValueError(f"MOTSP needs at least 3 cities, got {n}")
    if k < 2:
        raise ValueError(f"at least two objectives are required, got {k}")
    d = np.stack([_symmetric_uniform(n, rng, OPEN_EPS) for _ in range(k)])
    return MotspInstance(d, seed=seed)


def generate_moqap(n: int, k: int, rng: np.random.Generator, seed: int | None = None) -> MoqapInstance:
    if n < 3:
        raise ValueError(f"MOQAP needs at least 3 facilities, got {n}")
    if k < 2:
        raise ValueError(f"at least two objectives are required, got {k}")
    a = _symmetric_uniform(n, rng, OPEN_EPS)
    b = np.stack([_symmetric_uniform(n, rng, OPEN_EPS) for _ in range(k)])
    return MoqapInstance(a, b, seed=seed)


def make_instance(kind: str, n: int, k: int, seed: int):
    from .core import make_rng

    rng = make_rng(seed, "instance")
    if kind == "motsp":
        return generate_motsp(n, k, rng, seed=seed)
    if kind == "moqap":
        return generate_moqap(n, k, rng, seed=seed)
    raise ValueError(f"unknown problem kind {kind!r}")


# -- file I/O ---------------------------------------------------------------

def _matrix_lines(name: str, m: np.ndarray) -> list[str]:
    return [f"matrix {name}"] + [" ".join(repr(float(x)) for x in row) for row in m]


def save_instance(instance, path) -> None:
    lines = [
        f"seqmo-instance {FORMAT_VERSION}",
        f"kind {instance.kind}",
        f"n {instance.n}",
        f"k {instance.n_obj}",
        f"seed {'none' if instance.seed is None else instance.seed}",
    ]
    if instance.kind == "motsp":
        for i, d in enumerate(instance.distances, 1):
            lines += _matrix_lines(f"distance {i}", d)
    else:
        lines += _matrix_lines("distance", instance.distance)
        for i, b in enumerate(instance.flows, 1):
            lines += _matrix_lines(f"flow {i}", b)
    Path(path).write_text("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path):
        self.path = str(path)
        self.lines = [
            (no, ln.strip())
            for no, ln in enumerate(Path(path).read_text().splitlines(), 1)
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
        self.pos = 0

    def fail(self, msg: str, lineno: int | None = None):
        where = f"line {lineno}" if lineno is not None else "end of file"
        raise InstanceFormatError(f"{self.path}: {where}: {msg}")

    def next(self, what: str):
        if self.pos >= len(self.lines):
            self.fail(f"missing {what}")
        item = self.lines[self.pos]
        self.pos += 1
        return item

    def field(self, key: str) -> str:
        no, line = self.next(f"header field '{key}'")
        parts = line.split()
        if len(parts) != 2 or parts[0] != key:
            self.fail(f"expected '{key} <value>', got {line!r}", no)
        return parts[1]

    def int_field(self, key: str) -> int:
        raw = self.field(key)
        try:
            return int(raw)
        except ValueError:
            self.fail(f"field '{key}' must be an integer, got {raw!r}", self.lines[self.pos - 1][0])

    def matrix(self, name: str, n: int) -> np.ndarray:
        no, line = self.next(f"section 'matrix {name}'")
        if line != f"matrix {name}":
            self.fail(f"expected section 'matrix {name}', got {line!r}", no)
        rows = []
        for r in range(n):
            no, line = self.next(f"row {r + 1} of section 'matrix {name}'")
            parts = line.split()
            if len(parts) != n:
                self.fail(
                    f"dimension error in 'matrix {name}' row {r + 1}: expected {n} values, got {len(parts)}",
                    no,
                )
            try:
                rows.append([float(x) for x in parts])
            except ValueError:
                self.fail(f"non-numeric value in 'matrix {name}' row {r + 1}", no)
        return np.array(rows, dtype=float)


def load_instance(path):
    rd = _Reader(path)
    no, head = rd.next("header 'seqmo-instance'")
    parts = head.split()
    if len(parts) != 2 or parts[0] != "seqmo-instance":
        rd.fail(f"not a seqmo instance file (header {head!r})", no)
    if parts[1] != str(FORMAT_VERSION):
        rd.fail(f"unsupported format version {parts[1]}", no)
    kind = rd.field("kind")
    if kind not in ("motsp", "moqap"):
        rd.fail(f"unknown problem kind {kind!r}", rd.lines[rd.pos - 1][0])
    n = rd.int_field("n")
    k = rd.int_field("k")
    raw_seed = rd.field("seed")
    seed = None if raw_seed == "none" else int(raw_seed)
    if kind == "motsp":
        d = np.stack([rd.matrix(f"distance {i}", n) for i in range(1, k + 1)])
        inst = MotspInstance(d, seed=seed)
    else:
        a = rd.matrix("distance", n)
        b = np.stack([rd.matrix(f"flow {i}", n) for i in range(1, k + 1)])
        inst = MoqapInstance(a, b, seed=seed)
    if rd.pos != len(rd.lines):
        rd.fail("unexpected trailing content", rd.lines[rd.pos][0])
    return inst


class CountingProblem:
    """Wraps an instance and counts objective evaluations (the FE budget)."""

    def __init__(self, instance):
        self.instance = instance
        self.evaluations = 0

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def n_obj(self) -> int:
        return self.instance.n_obj

    def evaluate(self, perm) -> np.ndarray:
        self.evaluations += 1
        return self.instance.evaluate(perm)
