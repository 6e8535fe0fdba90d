"""Permutation variation operators and the two host evolutionary algorithms.

Both hosts expose the same three steps the learning wrapper drives:
``initialize``, ``offspring`` (one child per population slot) and
``select`` (environmental selection over parents, offspring and any
network-generated solutions). Running ``offspring`` followed by ``select``
with no generated solutions is exactly one plain generation of the host.

Ties are always broken toward the lower original index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Individual, Population, dominance_matrix, random_permutation


# -- variation ----------------------------------------------------------------

def order_crossover(u, v, rng: np.random.Generator, cuts: tuple[int, int] | None = None) -> np.ndarray:
    """OX: keep ``u[a..b]`` in place, fill the other slots left to right with
    the missing genes in the order they appear in ``v``.

    ``cuts`` is an inclusive 0-based ``(a, b)``; drawn uniformly when omitted.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"parent length mismatch: {u.size} vs {v.size}")
    n = u.size
    if cuts is None:
        a, b = sorted(rng.integers(0, n, size=2))
    else:
        a, b = cuts
        if not 0 <= a <= b < n:
            raise ValueError(f"invalid cut points {cuts} for length {n}")
    child = np.empty_like(u)
    keep = np.zeros(n, dtype=bool)
    keep[a:b + 1] = True
    child[keep] = u[keep]
    in_segment = np.zeros(n, dtype=bool)
    in_segment[u[keep]] = True
    child[~keep] = v[~in_segment[v]]
    return child


def swap_mutation(p, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Each position ``i < n-1`` is, with probability ``rate``, swapped with a
    uniformly chosen later position."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must be in [0, 1], got {rate}")
    out = np.array(p, copy=True)
    n = out.size
    if n < 2 or rate == 0.0:
        return out
    hits = np.flatnonzero(rng.random(n - 1) < rate)
    for i in hits:
        j = rng.integers(i + 1, n)
        out[i], out[j] = out[j], out[i]
    return out


def default_mutation_rate(n: int) -> float:
    return min(1.0, 2.0 / n)


# -- sorting ------------------------------------------------------------------

def fast_nondominated_sort(F) -> list[np.ndarray]:
    """Partition rows of ``F`` into fronts; ``fronts[0]`` is non-dominated.

    Each front is an ascending array of row indices.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] == 0:
        raise ValueError("need a non-empty (n, K) objective array")
    D = dominance_matrix(F)
    count = D.sum(axis=0)
    remaining = np.ones(F.shape[0], dtype=bool)
    fronts = []
    while remaining.any():
        current = np.flatnonzero(remaining & (count == 0))
        fronts.append(current)
        remaining[current] = False
        count = count - D[current].sum(axis=0)
    return fronts


def front_ranks(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    rank = np.empty(F.shape[0], dtype=np.int64)
    for r, front in enumerate(fast_nondominated_sort(F)):
        rank[front] = r
    return rank


def crowding_distance(F) -> np.ndarray:
    """Crowding distance of each row of a single front.

    Boundary rows get ``inf``; interior rows sum, per objective, the
    normalized gap between their two sorted neighbours.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(F.shape[1]):
        order = np.argsort(F[:, m], kind="stable")
        col = F[order, m]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def rank_and_crowding(F) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=float)
    rank = np.empty(F.shape[0], dtype=np.int64)
    crowd = np.empty(F.shape[0])
    for r, front in enumerate(fast_nondominated_sort(F)):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd


def truncate(F, capacity: int) -> np.ndarray:
    """Indices of the ``capacity`` rows kept by NSGA-II survival.

    Whole fronts are taken while they fit; the boundary front is cut by
    descending crowding distance. Result is sorted ascending.
    """
    F = np.asarray(F, dtype=float)
    if capacity >= F.shape[0]:
        return np.arange(F.shape[0])
    chosen = []
    for front in fast_nondominated_sort(F):
        room = capacity - len(chosen)
        if room <= 0:
            break
        if front.size <= room:
            chosen.extend(front.tolist())
        else:
            cd = crowding_distance(F[front])
            # stable sort on -cd keeps lower index first among equal distances
            keep = front[np.argsort(-cd, kind="stable")[:room]]
            chosen.extend(keep.tolist())
    return np.array(sorted(chosen), dtype=np.int64)


# -- NSGA-II ------------------------------------------------------------------

def binary_tournament(rank, crowd, rng: np.random.Generator) -> int:
    i, j = rng.integers(0, len(rank), size=2)
    if i > j:
        i, j = j, i
    if rank[j] < rank[i] or (rank[j] == rank[i] and crowd[j] > crowd[i]):
        return int(j)
    return int(i)


def nsga2_offspring(pop: Population, problem, rng: np.random.Generator,
                    mutation_rate: float | None = None) -> list[Individual]:
    rate = default_mutation_rate(problem.n) if mutation_rate is None else mutation_rate
    rank, crowd = rank_and_crowding(pop.objectives)
    children = []
    for _ in range(pop.capacity):
        u = pop[binary_tournament(rank, crowd, rng)].genotype
        v = pop[binary_tournament(rank, crowd, rng)].genotype
        g = swap_mutation(order_crossover(u, v, rng), rate, rng)
        children.append(Individual(g, problem.evaluate(g)))
    return children


def nsga2_select(pop: Population, offspring, generated=()) -> tuple[Population, list[int]]:
    """Rank + crowding truncation of parents, offspring and generated.

    Returns the new population and, per generated individual, 1 if it
    survived (replacing a population member) else 0.
    """
    pool = list(pop.members) + list(offspring) + list(generated)
    keep = truncate(np.array([m.objectives for m in pool]), pop.capacity)
    first_generated = len(pop) + len(offspring)
    credits = [0] * len(generated)
    for k in keep:
        if k >= first_generated:
            credits[k - first_generated] = 1
    return Population([pool[k] for k in keep], pop.capacity), credits


def nsga2_generation(pop: Population, problem, rng: np.random.Generator,
                     mutation_rate: float | None = None) -> Population:
    children = nsga2_offspring(pop, problem, rng, mutation_rate)
    return nsga2_select(pop, children)[0]


# -- MOEA/D -------------------------------------------------------------------

@dataclass(frozen=True)
class WeightVectorSet:
    vectors: np.ndarray  # (N_pop, K)
    neighbors: np.ndarray  # (N_pop, T), each row starts with the vector itself

    @classmethod
    def uniform(cls, n_pop: int, n_obj: int = 2, T: int = 20) -> "WeightVectorSet":
        if n_obj != 2:
            w = _simplex_lattice(n_pop, n_obj)
        elif n_pop == 1:
            w = np.array([[0.5, 0.5]])
        else:
            t = np.arange(n_pop) / (n_pop - 1)
            w = np.column_stack([t, 1.0 - t])
        T = min(T, n_pop)
        d = np.linalg.norm(w[:, None, :] - w[None, :, :], axis=2)
        neighbors = np.argsort(d, axis=1, kind="stable")[:, :T]
        return cls(w, neighbors)

    def __len__(self):
        return self.vectors.shape[0]


def _simplex_lattice(n_pop: int, n_obj: int) -> np.ndarray:
    from itertools import combinations

    h = 1
    while True:
        count = len(list(combinations(range(h + n_obj - 1), n_obj - 1)))
        if count >= n_pop:
            break
        h += 1
    if count != n_pop:
        raise ValueError(
            f"no simplex lattice for {n_obj} objectives has exactly {n_pop} points"
        )
    pts = []
    for bars in combinations(range(h + n_obj - 1), n_obj - 1):
        edges = (-1,) + bars + (h + n_obj - 1,)
        pts.append([(edges[i + 1] - edges[i] - 1) / h for i in range(n_obj)])
    return np.array(pts)


def tchebycheff(F, w, z) -> np.ndarray:
    """``max_k w_k |f_k - z_k|``, broadcast over leading dimensions."""
    return np.max(np.asarray(w) * np.abs(np.asarray(F) - np.asarray(z)), axis=-1)


def moead_offspring(pop: Population, weights: WeightVectorSet, problem,
                    rng: np.random.Generator, mutation_rate: float | None = None) -> list[Individual]:
    """One child per subproblem, mated inside that subproblem's neighbourhood."""
    if len(pop) != len(weights):
        raise ValueError(f"population size {len(pop)} != number of weight vectors {len(weights)}")
    rate = default_mutation_rate(problem.n) if mutation_rate is None else mutation_rate
    T = weights.neighbors.shape[1]
    children = []
    for i in range(len(pop)):
        if T >= 2:
            k, l = weights.neighbors[i, rng.choice(T, size=2, replace=False)]
        else:
            k = l = i
        g = order_crossover(pop[k].genotype, pop[l].genotype, rng)
        g = swap_mutation(g, rate, rng)
        children.append(Individual(g, problem.evaluate(g), origin=i))
    return children


def moead_replace(pop: Population, weights: WeightVectorSet, z, child: Individual,
                  rng: np.random.Generator, max_replace: int = 2) -> tuple[np.ndarray, int]:
    """Update ``z`` with the child, then let it replace up to ``max_replace``
    neighbours of its subproblem whose aggregation it strictly improves.

    Mutates ``pop`` in place; returns the new ideal point and the number of
    replacements.
    """
    z = np.minimum(z, child.objectives)
    nbrs = weights.neighbors[child.origin]
    order = nbrs[rng.permutation(nbrs.size)]
    current = np.array([pop[j].objectives for j in order])
    w = weights.vectors[order]
    g_child = tchebycheff(child.objectives, w, z)
    g_curr = tchebycheff(current, w, z)
    replaced = 0
    for pos, j in enumerate(order):
        if replaced >= max_replace:
            break
        if g_child[pos] < g_curr[pos]:
            pop.members[j] = child
            replaced += 1
    return z, replaced


def moead_select(pop: Population, weights: WeightVectorSet, z, offspring, generated,
                 rng: np.random.Generator, max_replace: int = 2):
    """Sequential subproblem replacement with ``offspring`` then ``generated``.

    Returns ``(population, z, credits)`` where ``credits[i]`` is the number of
    population slots generated individual ``i`` took over.
    """
    pop = Population(list(pop.members), pop.capacity)
    z = np.asarray(z, dtype=float)
    for child in offspring:
        z, _ = moead_replace(pop, weights, z, child, rng, max_replace)
    credits = []
    for child in generated:
        z, r = moead_replace(pop, weights, z, child, rng, max_replace)
        credits.append(r)
    return pop, z, credits


def moead_generation(pop: Population, weights: WeightVectorSet, z, problem,
                     rng: np.random.Generator, max_replace: int = 2,
                     mutation_rate: float | None = None):
    """One MOEA/D generation; returns ``(population, z, offspring)``."""
    children = moead_offspring(pop, weights, problem, rng, mutation_rate)
    pop, z, _ = moead_select(pop, weights, z, children, (), rng, max_replace)
    return pop, z, children


def random_population(problem, n_pop: int, rng: np.random.Generator) -> Population:
    members = []
    for i in range(n_pop):
        g = random_permutation(problem.n, rng)
        members.append(Individual(g, problem.evaluate(g), origin=i))
    return Population(members, n_pop)


# -- hosts ----------------------------------------------------------------------

class Nsga2Host:
    name = "nsga2"

    def __init__(self, n_pop: int, mutation_rate: float | None = None):
        self.n_pop = n_pop
        self.mutation_rate = mutation_rate

    def initialize(self, problem, rng) -> Population:
        pop = random_population(problem, self.n_pop, rng)
        for m in pop:
            m.origin = None
        return pop

    def offspring(self, pop, problem, rng):
        return nsga2_offspring(pop, problem, rng, self.mutation_rate)

    def select(self, pop, offspring, generated, rng):
        return nsga2_select(pop, offspring, generated)


class MoeadHost:
    name = "moead"

    def __init__(self, n_pop: int, n_obj: int = 2, neighborhood: int = 20,
                 max_replace: int = 2, mutation_rate: float | None = None):
        self.weights = WeightVectorSet.uniform(n_pop, n_obj, neighborhood)
        self.n_pop = n_pop
        self.max_replace = max_replace
        self.mutation_rate = mutation_rate
        self.z = None

    def initialize(self, problem, rng) -> Population:
        pop = random_population(problem, self.n_pop, rng)
        self.z = pop.objectives.min(axis=0)
        return pop

    def offspring(self, pop, problem, rng):
        return moead_offspring(pop, self.weights, problem, rng, self.mutation_rate)

    def select(self, pop, offspring, generated, rng):
        pop, self.z, credits = moead_select(
            pop, self.weights, self.z, offspring, generated, rng, self.max_replace
        )
        return pop, credits


def make_host(name: str, n_pop: int, n_obj: int = 2, **kw):
    if name == "nsga2":
        return Nsga2Host(n_pop, mutation_rate=kw.get("mutation_rate"))
    if name == "moead":
        return MoeadHost(n_pop, n_obj, **kw)
    raise ValueError(f"unknown host algorithm {name!r}")


def environment_selection(host, pop: Population, offspring, generated, rng):
    """Host survival step over parents, offspring and generated solutions.

    Returns the next population and one credit per generated solution: for
    NSGA-II 1 if it survived, for MOEA/D the number of slots it replaced.
    """
    return host.select(pop, offspring, generated, rng)
