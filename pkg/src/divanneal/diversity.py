"""Solution diversity: refined Hamming distance, basin seeds, overlaps.

The refined (singly-connected) distance between two configurations is the
size of the largest connected cluster, in the coupling graph, of the spins
on which they differ. Two low-energy states count as independent when that
distance is at least ``R * N``; the diversity ``D`` is the size of a maximum
independent set of the "too close" graph over the low-energy states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._rng import make_rng
from .instance import Instance
from .spectrum import LowEnergySet

EXACT_DIVERSITY_LIMIT = 24


@dataclass(frozen=True)
class DiversityParams:
    R: float = 1 / 8
    merge_spin_flip: bool = False

    def __post_init__(self):
        if not (0.0 < self.R <= 1.0):
            raise ValueError("R must lie in (0, 1]")

    @classmethod
    def for_instance(cls, inst: Instance, R: float = 1 / 8) -> "DiversityParams":
        """Spin-flip images are merged only when the instance has no fields."""
        return cls(R, merge_spin_flip=not np.any(inst.h))


@dataclass
class BasinSeeds:
    seeds: np.ndarray            # (D, n) int8, ascending energy
    indices: np.ndarray          # rows of the LowEnergySet the seeds came from
    R_used: float
    a_r_used: float
    merge_spin_flip: bool = False
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def D(self) -> int:
        return len(self.seeds)


# -- kernels ----------------------------------------------------------------------

@njit(cache=True)
def _largest_cluster(diff, indptr, indices, stack, label):
    n = diff.shape[0]
    for i in range(n):
        label[i] = 0
    best = 0
    for start in range(n):
        if not diff[start] or label[start]:
            continue
        label[start] = 1
        top = 0
        stack[0] = start
        top = 1
        size = 0
        while top > 0:
            top -= 1
            v = stack[top]
            size += 1
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                if diff[u] and not label[u]:
                    label[u] = 1
                    stack[top] = u
                    top += 1
        if size > best:
            best = size
    return best


@njit(cache=True)
def _distances_to(S, ref, indptr, indices, flip):
    """Refined distance of every row of S to ``ref`` (min over +-ref if ``flip``)."""
    m, n = S.shape
    out = np.empty(m, dtype=np.int64)
    diff = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    label = np.zeros(n, dtype=np.bool_)
    for r in range(m):
        for i in range(n):
            diff[i] = S[r, i] != ref[i]
        d = _largest_cluster(diff, indptr, indices, stack, label)
        if flip:
            for i in range(n):
                diff[i] = not diff[i]
            d2 = _largest_cluster(diff, indptr, indices, stack, label)
            if d2 < d:
                d = d2
        out[r] = d
    return out


def _as_batch(inst: Instance, S) -> np.ndarray:
    S = np.asarray(S)
    if S.ndim == 1:
        S = S[None, :]
    if S.shape[1] != inst.n:
        raise ValueError(f"configurations must have length {inst.n}")
    return np.ascontiguousarray(S, dtype=np.int8)


def refined_distances(inst: Instance, S, ref, merge_spin_flip: bool = False) -> np.ndarray:
    """Vector of refined distances from each row of ``S`` to ``ref``."""
    ref = np.asarray(ref)
    if ref.ndim != 1 or len(ref) != inst.n:
        raise ValueError(f"reference must have length {inst.n}")
    indptr, indices, _ = inst.csr
    return _distances_to(_as_batch(inst, S), np.ascontiguousarray(ref, dtype=np.int8),
                         indptr, indices, bool(merge_spin_flip))


def refined_distance(inst: Instance, a, b, merge_spin_flip: bool = False) -> int:
    """Largest connected cluster of sites where ``a`` and ``b`` differ."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("configurations differ in length")
    return int(refined_distances(inst, a, b, merge_spin_flip)[0])


def distance_matrix(inst: Instance, S, merge_spin_flip: bool = False) -> np.ndarray:
    S = _as_batch(inst, S)
    return np.stack([refined_distances(inst, S, s, merge_spin_flip) for s in S]) if len(S) else \
        np.zeros((0, 0), dtype=np.int64)


# -- seeds and diversity ------------------------------------------------------------

def greedy_seeds(inst: Instance, low: LowEnergySet, p: DiversityParams) -> BasinSeeds:
    """Scan states by ascending energy; keep a state if it is >= R*N from every seed."""
    S = np.ascontiguousarray(low.states, dtype=np.int8)
    K = len(S)
    if K == 0:
        raise ValueError("empty low-energy set")
    thr = p.R * inst.n
    nearest = np.full(K, np.iinfo(np.int64).max, dtype=np.int64)
    chosen = []
    k = 0
    while k < K:
        chosen.append(k)
        rest = S[k + 1:]
        if len(rest) == 0:
            break
        d = refined_distances(inst, rest, S[k], p.merge_spin_flip)
        np.minimum(nearest[k + 1:], d, out=nearest[k + 1:])
        ok = np.flatnonzero(nearest[k + 1:] >= thr)
        if len(ok) == 0:
            break
        k = k + 1 + int(ok[0])
    idx = np.array(chosen, dtype=np.int64)
    seeds = S[idx].copy()
    seeds.setflags(write=False)
    return BasinSeeds(seeds, idx, p.R, low.a_r, p.merge_spin_flip, np.asarray(low.energies)[idx].copy())


def max_independent_set_size(adj: list[int]) -> int:
    """Exact maximum independent set of a small graph given as neighbour bitmasks."""
    memo: dict[int, int] = {}

    def solve(cand: int) -> int:
        if cand == 0:
            return 0
        if cand in memo:
            return memo[cand]
        # Vertices with no neighbour inside cand are always taken.
        free, v_best, deg_best = 0, -1, -1
        c = cand
        while c:
            low = c & -c
            v = low.bit_length() - 1
            deg = bin(adj[v] & cand).count("1")
            if deg == 0:
                free |= low
            elif deg > deg_best:
                v_best, deg_best = v, deg
            c ^= low
        if free:
            res = bin(free).count("1") + solve(cand & ~free)
        else:
            bit = 1 << v_best
            res = max(solve(cand & ~bit), 1 + solve(cand & ~bit & ~adj[v_best]))
        memo[cand] = res
        return res

    return solve((1 << len(adj)) - 1)


def exact_diversity(inst: Instance, low: LowEnergySet, p: DiversityParams,
                    limit: int = EXACT_DIVERSITY_LIMIT) -> int:
    """Maximum number of states pairwise at refined distance >= R*N (exponential)."""
    K = len(low)
    if K > limit:
        raise ValueError(f"{K} states exceed the exact-diversity limit {limit}")
    if K == 0:
        return 0
    dm = distance_matrix(inst, low.states, p.merge_spin_flip)
    close = dm < p.R * inst.n
    adj = [sum(1 << j for j in range(K) if j != i and close[i, j]) for i in range(K)]
    return max_independent_set_size(adj)


def assign_basins(inst: Instance, S, seeds: BasinSeeds) -> np.ndarray:
    """Index of the nearest seed for each row of ``S``; ties go to the lower index."""
    S = _as_batch(inst, S)
    if seeds.D == 0:
        raise ValueError("no seeds")
    d = np.stack([refined_distances(inst, S, seed, seeds.merge_spin_flip) for seed in seeds.seeds],
                 axis=1)
    return np.argmin(d, axis=1)


def assign_basin(inst: Instance, s, seeds: BasinSeeds) -> int:
    return int(assign_basins(inst, np.asarray(s)[None, :], seeds)[0])


def diversity_ratio(D_solver: int, D: int) -> float:
    if D < 1:
        raise ValueError("D must be >= 1")
    if not (0 <= D_solver <= D):
        raise ValueError("need 0 <= D_solver <= D")
    return D_solver / D


# -- overlap diagnostic ---------------------------------------------------------------

@dataclass
class OverlapHistogram:
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    pairs: int
    subsampled: bool

    @property
    def mass(self) -> np.ndarray:
        return self.counts / max(1, self.counts.sum())


def pair_overlaps(samples, max_pairs: int = 500_000, seed: int = 0) -> tuple[np.ndarray, bool]:
    S = np.asarray(samples, dtype=np.float64)
    M, N = S.shape
    total = M * (M - 1) // 2
    if total <= max_pairs:
        iu, ju = np.triu_indices(M, k=1)
        sub = False
    else:
        rng = make_rng(seed)
        iu = rng.integers(0, M, size=max_pairs)
        ju = rng.integers(0, M - 1, size=max_pairs)
        ju = ju + (ju >= iu)
        sub = True
    q = np.einsum("ij,ij->i", S[iu], S[ju]) / N
    return q, sub


def overlap_histogram(samples, bins: int = 41, max_pairs: int = 500_000,
                      seed: int = 0) -> OverlapHistogram:
    """Histogram of q_ab over sample pairs (random pairs above ``max_pairs``)."""
    S = np.asarray(samples)
    if S.ndim != 2 or len(S) < 2:
        raise ValueError("need at least two samples")
    q, sub = pair_overlaps(S, max_pairs, seed)
    counts, edges = np.histogram(q, bins=bins, range=(-1.0, 1.0))
    return OverlapHistogram(edges, counts, float(q.mean()), len(q), sub)
