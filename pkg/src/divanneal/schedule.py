"""Space-time transverse-field profiles for multi-front annealing.

Each cluster k carries a linear front that starts at the cluster centre and
moves outward:

    g_i(t) = clamp(1 + alpha_k * (d_i - v_k t), 0, 1)
    v_k    = (1 + alpha_k * d_max_k) / (alpha_k * t_a)

so every site of the cluster reaches g = 0 exactly at t_a. ``alpha = 0`` is
the homogeneous ramp g(t) = 1 - t / t_a. Couplings switch on as the fields
switch off: J_ij(t) = (1 - g_i/2 - g_j/2) J_ij and h_i(t) = (1 - g_i) h_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._rng import make_rng
from .instance import Instance

DEFAULT_ALPHAS = (0.0, 1 / 50, 1 / 20, 1 / 10, 1 / 5)
HOMOGENEOUS_SHARE = 0.2


@dataclass(frozen=True)
class Cluster:
    sites: tuple[int, ...]
    center: np.ndarray
    alpha: float
    d: np.ndarray                 # distance of each member from the centre, aligned with ``sites``

    @property
    def d_max(self) -> float:
        return float(self.d.max()) if len(self.d) else 0.0

    def velocity(self, t_a: float) -> float:
        if self.alpha == 0.0:
            return float("inf")
        return (1.0 + self.alpha * self.d_max) / (self.alpha * t_a)


@dataclass(frozen=True)
class Partition:
    """Disjoint clusters covering every site, ordered by smallest member."""

    clusters: tuple[tuple[int, ...], ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cl = tuple(tuple(sorted(int(s) for s in c)) for c in self.clusters if len(c))
        object.__setattr__(self, "clusters", tuple(sorted(cl)))

    @property
    def M(self) -> int:
        return len(self.clusters)

    def labels(self, n: int) -> np.ndarray:
        lab = np.full(n, -1, dtype=np.int64)
        for k, c in enumerate(self.clusters):
            lab[list(c)] = k
        return lab

    def key(self) -> str:
        return "|".join(",".join(map(str, c)) for c in self.clusters)


def _check_partition(part: Partition, n: int):
    seen = np.zeros(n, dtype=np.int64)
    for c in part.clusters:
        for s in c:
            if not (0 <= s < n):
                raise ValueError(f"site {s} out of range")
            seen[s] += 1
    if not np.all(seen == 1):
        raise ValueError("clusters must partition all sites exactly once")


def make_cluster(inst: Instance, sites: Sequence[int], alpha: float) -> Cluster:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    sites = tuple(sorted(int(s) for s in sites))
    if not sites:
        raise ValueError("empty cluster")
    if inst.coords is None:
        if alpha > 0:
            raise ValueError("inhomogeneous fronts need site coordinates")
        return Cluster(sites, np.zeros(1), float(alpha), np.zeros(len(sites)))
    xy = inst.coords[list(sites)]
    center = xy.mean(axis=0)
    d = np.sqrt(((xy - center) ** 2).sum(axis=1))
    return Cluster(sites, center, float(alpha), d)


@dataclass(frozen=True, eq=False)
class Schedule:
    clusters: tuple[Cluster, ...]
    t_a: float
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.t_a > 0:
            raise ValueError("t_a must be positive")
        _check_partition(Partition(tuple(c.sites for c in self.clusters)), self.n)
        alpha = np.zeros(self.n)
        dist = np.zeros(self.n)
        vel = np.zeros(self.n)
        for c in self.clusters:
            idx = list(c.sites)
            alpha[idx] = c.alpha
            dist[idx] = c.d
            vel[idx] = 0.0 if c.alpha == 0 else c.velocity(self.t_a)
        for a in (alpha, dist, vel):
            a.setflags(write=False)
        object.__setattr__(self, "site_alpha", alpha)
        object.__setattr__(self, "site_d", dist)
        object.__setattr__(self, "site_v", vel)

    @property
    def velocities(self) -> list[float]:
        return [c.velocity(self.t_a) for c in self.clusters]

    @property
    def homogeneous(self) -> bool:
        return all(c.alpha == 0 for c in self.clusters)

    def fields(self, t: float) -> np.ndarray:
        """g_i(t) for every site."""
        if not (0.0 <= t <= self.t_a):
            raise ValueError(f"t={t} outside [0, {self.t_a}]")
        if t == self.t_a:
            return np.zeros(self.n)
        return _front_fields(self.site_alpha, self.site_d, self.site_v, t, self.t_a)

    def to_dict(self) -> dict:
        return {"t_a": self.t_a,
                "clusters": [{"sites": list(c.sites), "alpha": c.alpha} for c in self.clusters],
                "meta": dict(self.meta)}


def _front_fields(alpha, d, v, t, t_a):
    g = np.where(alpha == 0.0, 1.0 - t / t_a, 1.0 + alpha * (d - v * t))
    return np.clip(g, 0.0, 1.0)


def schedule_from_dict(inst: Instance, data: dict) -> Schedule:
    cl = tuple(make_cluster(inst, c["sites"], float(c["alpha"])) for c in data["clusters"])
    return Schedule(cl, float(data["t_a"]), inst.n, dict(data.get("meta", {})))


def build_schedule(inst: Instance, partition: Partition, alphas: Sequence[float], t_a: float,
                   **meta) -> Schedule:
    if len(alphas) != partition.M:
        raise ValueError("one alpha per cluster required")
    cl = tuple(make_cluster(inst, c, a) for c, a in zip(partition.clusters, alphas))
    return Schedule(cl, float(t_a), inst.n, meta)


def homogeneous(inst: Instance, t_a: float) -> Schedule:
    """Single cluster, alpha = 0: g(t) = 1 - t/t_a everywhere."""
    return Schedule((make_cluster(inst, range(inst.n), 0.0),), float(t_a), inst.n,
                    {"protocol": "homogeneous"})


def field_at(sched: Schedule, site: int, t: float) -> float:
    if not (0 <= site < sched.n):
        raise ValueError(f"site {site} out of range")
    if not (0.0 <= t <= sched.t_a):
        raise ValueError(f"t={t} outside [0, {sched.t_a}]")
    if t == sched.t_a:
        return 0.0
    a, d, v = sched.site_alpha[site], sched.site_d[site], sched.site_v[site]
    g = 1.0 - t / sched.t_a if a == 0.0 else 1.0 + a * (d - v * t)
    return float(min(1.0, max(0.0, g)))


def coupling_at(sched: Schedule, inst: Instance, edge: tuple[int, int], t: float) -> float:
    """J_ij(t) for an edge, or h_i(t) for the diagonal pair ``(i, i)``."""
    i, j = int(edge[0]), int(edge[1])
    if i == j:
        return (1.0 - field_at(sched, i, t)) * float(inst.h[i])
    a, b = min(i, j), max(i, j)
    hit = np.flatnonzero((inst.edge_i == a) & (inst.edge_j == b))
    if len(hit) == 0:
        raise ValueError(f"no edge ({i}, {j})")
    J = float(inst.edge_J[hit[0]])
    return (1.0 - field_at(sched, i, t) / 2 - field_at(sched, j, t) / 2) * J


def couplings_at(sched: Schedule, inst: Instance, t: float) -> tuple[np.ndarray, np.ndarray]:
    """All ramped couplings and fields at time ``t``."""
    g = sched.fields(t)
    J = (1.0 - g[inst.edge_i] / 2 - g[inst.edge_j] / 2) * inst.edge_J
    return J, (1.0 - g) * inst.h


# -- partitions -------------------------------------------------------------------

def _merge_small(inst: Instance, clusters: list[set[int]], min_size: int, log: list):
    while len(clusters) > 1:
        clusters.sort(key=min)
        small = next((k for k, c in enumerate(clusters) if len(c) < min_size), None)
        if small is None:
            break
        lab = np.full(inst.n, -1, dtype=np.int64)
        for k, c in enumerate(clusters):
            lab[list(c)] = k
        a, b = lab[inst.edge_i], lab[inst.edge_j]
        links = np.zeros(len(clusters), dtype=np.int64)
        np.add.at(links, b[a == small], 1)
        np.add.at(links, a[b == small], 1)
        links[small] = -1
        target = int(np.argmax(links))  # ties -> lowest index
        log.append({"absorbed": sorted(clusters[small]), "into": min(clusters[target])})
        clusters[target] |= clusters[small]
        del clusters[small]


def clusters_from_droplets(inst: Instance, droplets: Iterable[Iterable[int]],
                           min_size: int = 1) -> Partition:
    """Non-overlapping droplets become clusters, the rest of the lattice one more.

    Droplets are taken in list order; one overlapping an earlier accepted
    droplet is skipped (recorded in ``meta["skipped"]``). Clusters below
    ``min_size`` are absorbed by the neighbouring cluster sharing most bonds.
    """
    used: set[int] = set()
    clusters: list[set[int]] = []
    skipped = []
    for k, drop in enumerate(droplets):
        ds = {int(s) for s in drop}
        if not ds:
            continue
        if min(ds) < 0 or max(ds) >= inst.n:
            raise ValueError(f"droplet {k} has sites outside the instance")
        if ds & used:
            skipped.append(k)
            continue
        used |= ds
        clusters.append(ds)
    rest = set(range(inst.n)) - used
    if rest:
        clusters.append(rest)
    merges: list = []
    _merge_small(inst, clusters, min_size, merges)
    return Partition(tuple(tuple(c) for c in clusters),
                     {"skipped": skipped, "merges": merges, "source": "droplets"})


def random_clusters(inst: Instance, k: int, seed: int, min_size: int = 1) -> Partition:
    """``k`` connected chunks grown breadth-first from random centres."""
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, inst.n)
    rng = make_rng(seed)
    lab = np.full(inst.n, -1, dtype=np.int64)
    starts = rng.choice(inst.n, size=k, replace=False)
    fronts = []
    for c, s in enumerate(starts):
        lab[s] = c
        fronts.append([int(s)])
    # Round-robin growth keeps chunk sizes comparable.
    while any(fronts):
        for c in range(k):
            nxt = []
            for v in fronts[c]:
                for u in inst.neighbors(v):
                    if lab[u] < 0:
                        lab[u] = c
                        nxt.append(int(u))
            fronts[c] = nxt
    # Sites unreachable from any centre (disconnected graphs) join chunk 0.
    lab[lab < 0] = 0
    clusters = [set(np.flatnonzero(lab == c).tolist()) for c in range(k)]
    clusters = [c for c in clusters if c]
    merges: list = []
    _merge_small(inst, clusters, min_size, merges)
    return Partition(tuple(tuple(c) for c in clusters),
                     {"merges": merges, "source": "random", "k": k, "seed": seed})


def random_portfolio_schedule(inst: Instance, partition: Partition, alphas: Sequence[float],
                              t_a: float, seed: int,
                              homogeneous_share: float = HOMOGENEOUS_SHARE) -> Schedule:
    """One restart's protocol: homogeneous with probability ``homogeneous_share``,
    otherwise an independent alpha per cluster drawn from ``alphas``."""
    if len(alphas) == 0:
        raise ValueError("alphas must be nonempty")
    rng = make_rng(seed)
    if rng.random() < homogeneous_share:
        sched = homogeneous(inst, t_a)
        sched.meta.update({"protocol": "portfolio", "homogeneous_draw": True, "drawn_alphas": [0.0]})
        return sched
    draws = [float(alphas[i]) for i in rng.integers(0, len(alphas), size=partition.M)]
    return build_schedule(inst, partition, draws, t_a, protocol="portfolio",
                          homogeneous_draw=False, drawn_alphas=draws)
