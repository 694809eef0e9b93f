"""Path-integral Monte Carlo for the driven transverse-field Ising model.

The quantum partition function at inverse temperature ``beta`` is mapped to
``P`` classical replicas (Trotter slices, ``dtau = beta / P``) with action

    S = dtau * sum_p H_P^{(p)}(t) - sum_{i,p} K_i(t) s_{i,p} s_{i,p+1}
    K_i = -1/2 ln tanh(dtau * g_i(t))

and periodic imaginary time. Each sweep tries one Metropolis flip per
(site, slice) and one flip of every whole imaginary-time line. A site whose
field has reached zero has infinite K: its line is collapsed to a single
value (heat-bath choice given its environment) and from then on only moves
as a whole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._rng import derive_seed
from .instance import Instance, energies, energy
from .schedule import Schedule

READOUTS = {"lowest": 0, "slice": 1, "majority": 2}
KERNEL_RNG = "numba.MT19937 (np.random in nopython mode)"


@dataclass(frozen=True)
class PimcParams:
    beta: float = 24.0
    slices: int | None = None       # default: smallest P with dtau <= 0.25
    sweeps: int = 1000
    seed: int = 0
    readout: str = "lowest"
    readout_slice: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.slices is None:
            object.__setattr__(self, "slices", max(2, math.ceil(self.beta / 0.25)))
        if self.slices < 2:
            raise ValueError("need at least two Trotter slices")
        if self.beta / self.slices > 0.5:
            raise ValueError(f"dtau = {self.beta / self.slices:g} exceeds 0.5; use more slices")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {sorted(READOUTS)}")
        if not (0 <= self.readout_slice < self.slices):
            raise ValueError("readout_slice out of range")

    @property
    def dtau(self) -> float:
        return self.beta / self.slices

    def to_dict(self) -> dict:
        return {"beta": self.beta, "slices": self.slices, "sweeps": self.sweeps,
                "seed": self.seed, "readout": self.readout}


@dataclass
class RunRecord:
    config: np.ndarray
    energy: float
    seed: int
    sweeps: int
    schedule_meta: dict = field(default_factory=dict)


def imaginary_time_coupling(g, dtau: float):
    """K = -1/2 ln tanh(dtau * g); ``inf`` at g = 0."""
    g = np.asarray(g, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(g > 0, -0.5 * np.log(np.tanh(dtau * np.maximum(g, 1e-300))), np.inf)


# -- kernels ------------------------------------------------------------------------

@njit(cache=True)
def _local_field(spins, i, p, indptr, indices, Jw, ht):
    f = ht[i]
    for q in range(indptr[i], indptr[i + 1]):
        f += Jw[q] * spins[indices[q], p]
    return f


@njit(cache=True)
def _sweep(spins, indptr, indices, Jw, ht, K, frozen, dtau):
    N, P = spins.shape
    for i in range(N):
        if frozen[i]:
            continue
        Ki = K[i]
        for p in range(P):
            s = spins[i, p]
            f = _local_field(spins, i, p, indptr, indices, Jw, ht)
            nb = spins[i, p - 1] + spins[i, (p + 1) % P]
            dS = 2.0 * s * (Ki * nb - dtau * f)
            if dS <= 0.0 or np.random.random() < math.exp(-dS):
                spins[i, p] = -s
    for i in range(N):
        dS = 0.0
        for p in range(P):
            dS -= 2.0 * dtau * spins[i, p] * _local_field(spins, i, p, indptr, indices, Jw, ht)
        if dS <= 0.0 or np.random.random() < math.exp(-dS):
            for p in range(P):
                spins[i, p] = -spins[i, p]


@njit(cache=True)
def _collapse_line(spins, i, indptr, indices, Jw, ht, dtau):
    # Heat-bath choice between the two uniform lines.
    P = spins.shape[1]
    A = 0.0
    for p in range(P):
        A += _local_field(spins, i, p, indptr, indices, Jw, ht)
    x = 2.0 * dtau * A
    p_up = 1.0 / (1.0 + math.exp(x)) if x < 700.0 else 0.0
    v = 1 if np.random.random() < p_up else -1
    for p in range(P):
        spins[i, p] = v


@njit(cache=True)
def _fields_at(alpha, d, v, t, t_a, g):
    N = len(alpha)
    for i in range(N):
        if t >= t_a:
            g[i] = 0.0
            continue
        if alpha[i] == 0.0:
            x = 1.0 - t / t_a
        else:
            x = 1.0 + alpha[i] * (d[i] - v[i] * t)
        g[i] = min(1.0, max(0.0, x))


@njit(cache=True)
def _anneal_kernel(indptr, indices, w, h, alpha, d, v, t_a, sweeps, P, dtau, seed):
    np.random.seed(seed)
    N = len(h)
    spins = np.empty((N, P), dtype=np.int8)
    for i in range(N):
        for p in range(P):
            spins[i, p] = 1 if np.random.random() < 0.5 else -1
    g = np.empty(N)
    K = np.empty(N)
    frozen = np.zeros(N, dtype=np.bool_)
    Jw = np.empty(len(w))
    ht = np.empty(N)
    for m in range(sweeps):
        t = t_a * m / sweeps
        _fields_at(alpha, d, v, t, t_a, g)
        for i in range(N):
            ht[i] = (1.0 - g[i]) * h[i]
            for q in range(indptr[i], indptr[i + 1]):
                Jw[q] = (1.0 - 0.5 * g[i] - 0.5 * g[indices[q]]) * w[q]
        for i in range(N):
            if g[i] > 0.0:
                K[i] = -0.5 * math.log(math.tanh(dtau * g[i]))
            elif not frozen[i]:
                _collapse_line(spins, i, indptr, indices, Jw, ht, dtau)
                frozen[i] = True
        _sweep(spins, indptr, indices, Jw, ht, K, frozen, dtau)
    return spins


@njit(cache=True)
def _equilibrium_kernel(indptr, indices, w, h, ei, ej, g, P, dtau, burn_in, sweeps, n_bins,
                        seed):
    np.random.seed(seed)
    N = len(h)
    spins = np.empty((N, P), dtype=np.int8)
    frozen = np.zeros(N, dtype=np.bool_)
    K = np.empty(N)
    for i in range(N):
        if g > 0.0:
            K[i] = -0.5 * math.log(math.tanh(dtau * g))
            for p in range(P):
                spins[i, p] = 1 if np.random.random() < 0.5 else -1
        else:
            frozen[i] = True
            K[i] = 0.0
            v = 1 if np.random.random() < 0.5 else -1
            for p in range(P):
                spins[i, p] = v
    for m in range(burn_in):
        _sweep(spins, indptr, indices, w, h, K, frozen, dtau)
    per_bin = sweeps // n_bins
    sums = np.zeros((n_bins, len(ei)))
    for b in range(n_bins):
        for m in range(per_bin):
            _sweep(spins, indptr, indices, w, h, K, frozen, dtau)
            for e in range(len(ei)):
                c = 0
                for p in range(P):
                    c += spins[ei[e], p] * spins[ej[e], p]
                sums[b, e] += c / P
        for e in range(len(ei)):
            sums[b, e] /= per_bin
    return sums


@njit(cache=True)
def _sample_kernel(indptr, indices, w, h, g, P, dtau, burn_in, n_samples, thin, seed):
    np.random.seed(seed)
    N = len(h)
    spins = np.empty((N, P), dtype=np.int8)
    frozen = np.zeros(N, dtype=np.bool_)
    K = np.zeros(N)
    for i in range(N):
        if g > 0.0:
            K[i] = -0.5 * math.log(math.tanh(dtau * g))
            for p in range(P):
                spins[i, p] = 1 if np.random.random() < 0.5 else -1
        else:
            frozen[i] = True
            v = 1 if np.random.random() < 0.5 else -1
            for p in range(P):
                spins[i, p] = v
    for m in range(burn_in):
        _sweep(spins, indptr, indices, w, h, K, frozen, dtau)
    out = np.empty((n_samples, N), dtype=np.int8)
    for k in range(n_samples):
        for m in range(thin):
            _sweep(spins, indptr, indices, w, h, K, frozen, dtau)
        for i in range(N):
            out[k, i] = spins[i, 0]
    return out


@njit(cache=True)
def _gibbs_kernel(indptr, indices, w, h, beta, burn_in, n_samples, thin, seed):
    np.random.seed(seed)
    N = len(h)
    s = np.empty(N, dtype=np.int8)
    for i in range(N):
        s[i] = 1 if np.random.random() < 0.5 else -1
    out = np.empty((n_samples, N), dtype=np.int8)
    total = burn_in + n_samples * thin
    k = 0
    for m in range(total):
        for i in range(N):
            f = h[i]
            for q in range(indptr[i], indptr[i + 1]):
                f += w[q] * s[indices[q]]
            # Heat-bath acceptance; Metropolis would flip every spin at beta = 0.
            x = -2.0 * beta * s[i] * f
            if x < 700.0 and np.random.random() * (1.0 + math.exp(x)) < 1.0:
                s[i] = -s[i]
        if m >= burn_in and (m - burn_in) % thin == thin - 1:
            out[k] = s
            k += 1
    return out


# -- public API -------------------------------------------------------------------

def _readout(inst: Instance, spins: np.ndarray, p: PimcParams) -> np.ndarray:
    slices = np.ascontiguousarray(spins.T)               # (P, N)
    if p.readout == "slice":
        return slices[p.readout_slice].copy()
    if p.readout == "majority":
        tot = slices.astype(np.int64).sum(axis=0)
        return np.where(tot > 0, 1, np.where(tot < 0, -1, slices[0])).astype(np.int8)
    E = energies(inst, slices)
    return slices[int(np.argmin(E))].copy()               # argmin: ties -> lowest slice


def pimc_anneal(inst: Instance, sched: Schedule, p: PimcParams) -> RunRecord:
    """One annealing restart; sweep m runs at t = (m / sweeps) * t_a, readout at t_a."""
    if sched.n != inst.n:
        raise ValueError("schedule and instance sizes differ")
    indptr, indices, w = inst.csr
    kseed = derive_seed(p.seed)
    spins = _anneal_kernel(indptr, indices, w, inst.h, sched.site_alpha, sched.site_d,
                           sched.site_v, float(sched.t_a), int(p.sweeps), int(p.slices),
                           float(p.dtau), kseed)
    s = _readout(inst, spins, p)
    s.setflags(write=False)
    meta = dict(sched.meta)
    meta.update({"alphas": [c.alpha for c in sched.clusters], "t_a": sched.t_a,
                 "clusters": len(sched.clusters), "readout": p.readout})
    return RunRecord(s, energy(inst, s), p.seed, p.sweeps, meta)


@dataclass
class EquilibriumEstimate:
    mean: np.ndarray        # per edge <s_i s_j>
    stderr: np.ndarray      # jackknife over bins
    bins: np.ndarray


def jackknife(bins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and jackknife standard error along axis 0."""
    bins = np.asarray(bins, dtype=np.float64)
    n = len(bins)
    mean = bins.mean(axis=0)
    loo = (bins.sum(axis=0) - bins) / (n - 1)
    err = np.sqrt((n - 1) / n * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return mean, err


def pimc_equilibrium(inst: Instance, g: float, p: PimcParams, burn_in: int | None = None,
                     n_bins: int = 50) -> EquilibriumEstimate:
    """Static-field PIMC estimate of <sz_i sz_j> for every edge (full couplings)."""
    if g < 0:
        raise ValueError("g must be >= 0")
    if n_bins < 2 or p.sweeps < n_bins:
        raise ValueError("need sweeps >= n_bins >= 2")
    indptr, indices, w = inst.csr
    burn = p.sweeps // 10 if burn_in is None else burn_in
    bins = _equilibrium_kernel(indptr, indices, w, inst.h, inst.edge_i, inst.edge_j, float(g),
                               int(p.slices), float(p.dtau), int(burn), int(p.sweeps), int(n_bins),
                               derive_seed(p.seed))
    mean, err = jackknife(bins)
    return EquilibriumEstimate(mean, err, bins)


def pimc_samples(inst: Instance, g: float, p: PimcParams, n_samples: int, burn_in: int = 1000,
                 thin: int = 1) -> np.ndarray:
    """Slice-0 configurations of the static-field Trotter chain, one every ``thin`` sweeps.

    Their distribution is the diagonal of the (Trotterized) thermal density matrix.
    """
    if g < 0 or n_samples < 1 or burn_in < 0 or thin < 1:
        raise ValueError("need g >= 0, n_samples >= 1, burn_in >= 0, thin >= 1")
    indptr, indices, w = inst.csr
    return _sample_kernel(indptr, indices, w, inst.h, float(g), int(p.slices), float(p.dtau),
                          int(burn_in), int(n_samples), int(thin), derive_seed(p.seed))


def gibbs_sample(inst: Instance, beta: float, sweeps: int, burn_in: int = 0, thin: int = 1,
                 seed: int = 0) -> np.ndarray:
    """Single-spin heat-bath chain at ``beta``; returns ``sweeps // thin`` samples."""
    if beta < 0 or sweeps < 1 or burn_in < 0 or thin < 1:
        raise ValueError("need beta >= 0, sweeps >= 1, burn_in >= 0, thin >= 1")
    indptr, indices, w = inst.csr
    return _gibbs_kernel(indptr, indices, w, inst.h, float(beta), int(burn_in),
                         int(sweeps // thin), int(thin), derive_seed(seed))
