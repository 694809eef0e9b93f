"""Low-energy spectra within an approximation ratio.

Two routes produce the same :class:`LowEnergySet`:

* :func:`brute_force_spectrum` enumerates all ``2**n`` configurations.
* :func:`bnb_spectrum` scans the sites in a strip order (row after row on a
  lattice). Partial configurations that agree on the boundary (assigned spins
  still coupled to unassigned ones) are equivalent as seen from the rest of
  the system; within such a class only branches whose best completion stays
  under the cutoff are kept. The best completion energy of every boundary
  configuration comes from an exact backward transfer-matrix pass, so each
  surviving branch extends to at least one state in the output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, energies, spins_from_str, spins_to_str, write_text

BRUTE_FORCE_LIMIT = 26
BANDWIDTH_MODES = ("exact", "bound")


class SpectrumTooLargeError(ValueError):
    pass


class BoundaryTooWideError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumRequest:
    """``a_r`` is the fraction of the energy bandwidth kept above the ground state.

    ``bandwidth_mode="exact"`` uses E_max - E_min; ``"bound"`` replaces E_max
    by sum|J| + sum|h|, which can only enlarge the window.
    """

    a_r: float
    max_states: int = 200_000
    bandwidth_mode: str = "exact"

    def __post_init__(self):
        if not (0.0 < self.a_r < 1.0):
            raise ValueError("a_r must lie in (0, 1)")
        if self.max_states < 1:
            raise ValueError("max_states must be >= 1")
        if self.bandwidth_mode not in BANDWIDTH_MODES:
            raise ValueError(f"bandwidth_mode must be one of {BANDWIDTH_MODES}")


@dataclass
class LowEnergySet:
    states: np.ndarray          # (K, n) int8, rows sorted by (energy, spins)
    energies: np.ndarray        # (K,) ascending
    e_min: float
    cutoff: float
    complete: bool
    a_r: float
    bandwidth_mode: str
    bandwidth: float
    droplets: list[frozenset[int]] = field(default_factory=list)

    def __len__(self):
        return len(self.energies)

    @property
    def n(self) -> int:
        return self.states.shape[1]


def _canonical(inst: Instance, S: np.ndarray, cutoff: float, max_states: int,
               e_min: float, complete: bool, req: SpectrumRequest, bandwidth: float,
               droplets=()) -> LowEnergySet:
    """Filter by cutoff, sort by (energy, lexicographic spins), drop duplicates."""
    S = np.ascontiguousarray(S, dtype=np.int8)
    if len(S):
        S = np.unique(S, axis=0)
    E = energies(inst, S)
    keep = E <= cutoff
    S, E = S[keep], E[keep]
    order = np.lexsort(tuple(S[:, j] for j in range(S.shape[1] - 1, -1, -1)) + (E,))
    S, E = S[order], E[order]
    if len(E) > max_states:
        S, E, complete = S[:max_states], E[:max_states], False
    S.setflags(write=False)
    E.setflags(write=False)
    return LowEnergySet(S, E, float(e_min), float(cutoff), bool(complete), req.a_r,
                        req.bandwidth_mode, float(bandwidth), list(droplets))


def _all_configs(n: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def brute_force_spectrum(inst: Instance, req: SpectrumRequest, limit: int = BRUTE_FORCE_LIMIT,
                         chunk: int = 1 << 16) -> LowEnergySet:
    """Exhaustive reference: every configuration with E <= cutoff."""
    n = inst.n
    if n > limit:
        raise SpectrumTooLargeError(
            f"n={n} exceeds the brute-force limit {limit}; use bnb_spectrum for strip geometries")
    total = 1 << n
    e_lo, e_hi = np.inf, -np.inf
    for start in range(0, total, chunk):
        E = energies(inst, _all_configs(n, start, min(total, start + chunk)))
        e_lo = min(e_lo, float(E.min()))
        e_hi = max(e_hi, float(E.max()))
    bandwidth = (e_hi if req.bandwidth_mode == "exact" else inst.abs_weight) - e_lo
    cutoff = e_lo + req.a_r * bandwidth
    found = []
    count = 0
    for start in range(0, total, chunk):
        S = _all_configs(n, start, min(total, start + chunk))
        sel = S[energies(inst, S) <= cutoff]
        count += len(sel)
        found.append(sel)
    S = np.concatenate(found) if found else np.zeros((0, n), dtype=np.int8)
    return _canonical(inst, S, cutoff, req.max_states, e_lo, True, req, bandwidth)


# -- strip geometry ---------------------------------------------------------------

@dataclass
class StripPlan:
    """Site order and per-step boundaries for the row-by-row scan."""

    order: np.ndarray                   # position -> site
    boundaries: list[np.ndarray]        # boundaries[k]: positions assigned before step k still coupled forward
    back_nbrs: list[np.ndarray]         # earlier neighbour positions of position k
    back_J: list[np.ndarray]
    h: np.ndarray                       # fields by position

    @property
    def width(self) -> int:
        return max(len(b) for b in self.boundaries)


def plan_strip(inst: Instance, order=None) -> StripPlan:
    """Boundaries for a given site order (default: the narrower of row- and column-major)."""
    if order is None:
        candidates = [np.arange(inst.n)]
        c = inst.coords
        if c is not None and c.shape[1] == 2:
            candidates.append(np.lexsort((c[:, 0], c[:, 1])))
        plans = [plan_strip(inst, o) for o in candidates]
        return min(plans, key=lambda p: p.width)
    order = np.asarray(order, dtype=np.int64)
    n = inst.n
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError("order must be a permutation of the sites")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    pi, pj = pos[inst.edge_i], pos[inst.edge_j]
    lo, hi = np.minimum(pi, pj), np.maximum(pi, pj)
    last = np.full(n, -1, dtype=np.int64)
    np.maximum.at(last, lo, hi)
    back_nbrs = [[] for _ in range(n)]
    back_J = [[] for _ in range(n)]
    for a, b, v in zip(lo, hi, inst.edge_J):
        back_nbrs[b].append(a)
        back_J[b].append(v)
    boundaries = [np.zeros(0, dtype=np.int64)]
    cur: list[int] = []
    for k in range(n):
        cur = [q for q in cur + [k] if last[q] >= k + 1]
        boundaries.append(np.array(cur, dtype=np.int64))
    return StripPlan(order, boundaries,
                     [np.array(b, dtype=np.int64) for b in back_nbrs],
                     [np.array(v, dtype=np.float64) for v in back_J],
                     np.asarray(inst.h)[order].astype(np.float64))


def _boundary_spins(w: int) -> np.ndarray:
    b = np.arange(1 << w, dtype=np.int64)
    return (2 * ((b[:, None] >> np.arange(w, dtype=np.int64)) & 1) - 1).astype(np.float64)


def completion_tables(plan: StripPlan, sign: float = 1.0) -> list[np.ndarray]:
    """``G[k][b]``: minimum energy of all terms touching positions >= k, given boundary ``b``.

    ``sign=-1`` gives the tables for the negated Hamiltonian (for E_max).
    """
    n = len(plan.order)
    G: list[np.ndarray] = [None] * (n + 1)  # type: ignore[list-item]
    G[n] = np.zeros(1)
    for k in range(n - 1, -1, -1):
        B, Bn = plan.boundaries[k], plan.boundaries[k + 1]
        w = len(B)
        slot = {int(q): t for t, q in enumerate(B)}
        Sb = _boundary_spins(w)
        f = np.full(1 << w, sign * plan.h[k])
        for q, v in zip(plan.back_nbrs[k], plan.back_J[k]):
            f += sign * v * Sb[:, slot[int(q)]]
        b = np.arange(1 << w, dtype=np.int64)
        best = np.full(1 << w, np.inf)
        for s in (-1, 1):
            nxt = np.zeros(1 << w, dtype=np.int64)
            for u, q in enumerate(Bn):
                bit = ((b >> slot[int(q)]) & 1) if int(q) != k else np.int64(s > 0)
                nxt |= bit << u
            best = np.minimum(best, s * f + G[k + 1][nxt])
        G[k] = best
    return G


def _enumerate(plan: StripPlan, G: list[np.ndarray], cutoff: float, cap: int,
               sign: float = 1.0, droplet_min: int | None = None, max_droplets: int = 10_000):
    """Forward scan keeping every branch whose best completion is <= cutoff.

    Returns ``(X, complete, droplets)`` with ``X`` in position order.
    """
    n = len(plan.order)
    X = np.zeros((1, n), dtype=np.int8)
    Ep = np.zeros(1)
    complete = True
    seen: set[bytes] = set()
    droplets: list[frozenset[int]] = []
    for k in range(n):
        f = np.full(len(X), sign * plan.h[k])
        for q, v in zip(plan.back_nbrs[k], plan.back_J[k]):
            f += sign * v * X[:, q]
        X = np.repeat(X, 2, axis=0)
        Ep = np.repeat(Ep, 2)
        s = np.tile(np.array([-1, 1], dtype=np.int8), len(X) // 2)
        X[:, k] = s
        Ep = Ep + s * np.repeat(f, 2)
        Bn = plan.boundaries[k + 1]
        bidx = np.zeros(len(X), dtype=np.int64)
        for u, q in enumerate(Bn):
            bidx |= (X[:, q] > 0).astype(np.int64) << u
        bound = Ep + G[k + 1][bidx]
        keep = bound <= cutoff
        X, Ep, bidx, bound = X[keep], Ep[keep], bidx[keep], bound[keep]
        if len(X) > cap:
            sel = np.sort(np.argsort(bound, kind="stable")[:cap])
            X, Ep, bidx = X[sel], Ep[sel], bidx[sel]
            complete = False
        if droplet_min is not None and len(droplets) < max_droplets and len(X) > 1:
            _record_droplets(X, Ep, bidx, plan.order, droplet_min, seen, droplets, max_droplets)
    return X, complete, droplets


def _record_droplets(X, Ep, bidx, order, droplet_min, seen, out, max_droplets):
    # Members of a boundary class agree on the boundary; their difference to the
    # class minimum is a flip set that no longer interacts with unassigned sites.
    grp = np.lexsort((Ep, bidx))
    b_sorted = bidx[grp]
    first = np.ones(len(grp), dtype=bool)
    first[1:] = b_sorted[1:] != b_sorted[:-1]
    base = grp[np.maximum.accumulate(np.where(first, np.arange(len(grp)), 0))]
    others = ~first
    if not others.any():
        return
    diff = X[grp[others]] != X[base[others]]
    big = diff.sum(axis=1) >= droplet_min
    if not big.any():
        return
    packed = np.unique(np.packbits(diff[big], axis=1), axis=0)
    for row in packed:
        key = row.tobytes()
        if key in seen:
            continue
        seen.add(key)
        flips = np.flatnonzero(np.unpackbits(row)[: len(order)])
        out.append(frozenset(int(order[p]) for p in flips))
        if len(out) >= max_droplets:
            return


def _to_sites(plan: StripPlan, X: np.ndarray) -> np.ndarray:
    S = np.empty_like(X)
    S[:, plan.order] = X
    return S


def bnb_spectrum(inst: Instance, req: SpectrumRequest, strip_width_limit: int = 14,
                 order=None, droplet_min: int | None = 1) -> LowEnergySet:
    """Exact low-energy spectrum by strip scanning with boundary-class merging.

    ``droplet_min`` sets the smallest flip set recorded in ``droplets``
    (``None`` disables recording).
    """
    plan = plan_strip(inst, order)
    if plan.width > strip_width_limit:
        raise BoundaryTooWideError(
            f"scan boundary reaches {plan.width} spins (limit {strip_width_limit})")
    tol = 1e-9 * max(1.0, inst.abs_weight)
    G = completion_tables(plan)
    e_min_dp = float(G[0][0])
    if req.bandwidth_mode == "exact":
        Gneg = completion_tables(plan, sign=-1.0)
        Xmax, _, _ = _enumerate(plan, Gneg, float(Gneg[0][0]) + tol, 64, sign=-1.0)
        e_max = float(energies(inst, _to_sites(plan, Xmax)).max())
    else:
        e_max = inst.abs_weight
    cutoff_dp = e_min_dp + req.a_r * (e_max - e_min_dp)
    X, complete, droplets = _enumerate(plan, G, cutoff_dp + tol, req.max_states,
                                       droplet_min=droplet_min)
    S = _to_sites(plan, X)
    E = energies(inst, S)
    e_min = float(E.min())
    bandwidth = e_max - e_min
    cutoff = e_min + req.a_r * bandwidth
    return _canonical(inst, S, cutoff, req.max_states, e_min, complete, req, bandwidth, droplets)


def ground_state(inst: Instance, strip_width_limit: int = 14) -> tuple[np.ndarray, float]:
    """Lowest configuration (lexicographically first among ties) and its energy."""
    plan = plan_strip(inst)
    if plan.width > strip_width_limit:
        raise BoundaryTooWideError(
            f"scan boundary reaches {plan.width} spins (limit {strip_width_limit})")
    G = completion_tables(plan)
    tol = 1e-9 * max(1.0, inst.abs_weight)
    X, _, _ = _enumerate(plan, G, float(G[0][0]) + tol, 1024)
    S = _to_sites(plan, X)
    E = energies(inst, S)
    order = np.lexsort(tuple(S[:, j] for j in range(S.shape[1] - 1, -1, -1)) + (E,))
    return S[order[0]].copy(), float(E[order[0]])


# -- report file --------------------------------------------------------------

def write_spectrum(low: LowEnergySet, path: str | os.PathLike) -> None:
    lines = [
        f"e_min {low.e_min!r}",
        f"cutoff {low.cutoff!r}",
        f"complete {str(low.complete).lower()}",
        f"a_r {low.a_r!r}",
        f"bandwidth_mode {low.bandwidth_mode}",
        f"bandwidth {low.bandwidth!r}",
        f"states {len(low)}",
    ]
    lines += [f"{float(e)!r} {spins_to_str(s)}" for e, s in zip(low.energies, low.states)]
    write_text("\n".join(lines) + "\n", path)


def read_spectrum(path: str | os.PathLike) -> LowEnergySet:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    head = {}
    for lineno, ln in enumerate(lines[:7], start=1):
        key, _, val = ln.partition(" ")
        head[key] = val
    try:
        count = int(head["states"])
        states, ens = [], []
        for ln in lines[7:7 + count]:
            e, s = ln.split()
            ens.append(float(e))
            states.append(spins_from_str(s))
        req = SpectrumRequest(float(head["a_r"]), max(1, count), head["bandwidth_mode"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed spectrum file {path}: {exc}") from None
    if len(states) != count:
        raise ValueError(f"spectrum file {path} announces {count} states, found {len(states)}")
    S = np.array(states, dtype=np.int8).reshape(count, -1)
    E = np.array(ens)
    S.setflags(write=False)
    E.setflags(write=False)
    return LowEnergySet(S, E, float(head["e_min"]), float(head["cutoff"]),
                        head["complete"] == "true", req.a_r, req.bandwidth_mode,
                        float(head["bandwidth"]))
