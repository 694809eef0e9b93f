"""Benchmark pipeline: ground truth, droplet portfolios, PIMC restarts, TTS/TTD.

All randomness flows from ``ExperimentSpec.seed``: restart ``r`` of protocol
``p`` at time setting ``k`` on instance ``i`` uses the stream
``(seed, i, p, k, r)``, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from ._rng import RNG_VERSION, derive_seed, make_rng
from .diversity import BasinSeeds, DiversityParams, assign_basins, greedy_seeds
from .instance import (Instance, generate_2d, generate_quasi_1d, read_instance, spins_to_str,
                       write_instance, write_text)
from .metrics import (TIMED_OUT, SuccessStats, TimeEstimate, nearest_rank, optimize_over_times,
                      tts, ttd)
from .schedule import (DEFAULT_ALPHAS, Partition, clusters_from_droplets, homogeneous,
                       random_clusters, random_portfolio_schedule)
from .solver import KERNEL_RNG, PimcParams, pimc_anneal
from .spectrum import LowEnergySet, SpectrumRequest, bnb_spectrum, write_spectrum

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

PROTOCOLS = ("homogeneous", "portfolio")
QUANTILES = (0.2, 0.5, 0.8)
DEFAULT_DR_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass
class ExperimentSpec:
    """Flat experiment description; every key maps to a TOML key of the same name."""

    ensemble: str = "2d"                 # "2d", "quasi1d" or "files"
    L: int = 6
    n: int = 32
    r: int = 3
    count: int = 2
    instance_seed: int = 0
    instance_files: list[str] = field(default_factory=list)

    seed_a_r: float = 0.001
    solver_a_r: float = 0.002
    R: float = 0.125
    merge_spin_flip: str = "auto"        # "auto", "true", "false"
    max_states: int = 200_000
    strip_width_limit: int = 14

    sweeps: list[int] = field(default_factory=lambda: [200, 500])
    restarts: int = 20
    beta: float = 24.0
    slices: int = 0                      # 0: smallest count with dtau <= 0.25
    readout: str = "lowest"
    t_a: float = 1.0

    alphas: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    homogeneous_share: float = 0.2
    cluster_mode: str = "droplets"       # "droplets" or "random"
    cluster_min_size: int = 4
    portfolio_size: int = 4
    random_k: int = 4
    max_droplets: int = 8

    d_r: list[float] = field(default_factory=lambda: list(DEFAULT_DR_GRID))
    seed: int = 0
    workers: int = 1
    output: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.ensemble not in ("2d", "quasi1d", "files"):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.ensemble == "files" and not self.instance_files:
            raise ValueError("ensemble 'files' needs instance_files")
        if self.count < 1 and self.ensemble != "files":
            raise ValueError("count must be >= 1")
        if not (0 < self.seed_a_r <= self.solver_a_r < 1):
            raise ValueError("need 0 < seed_a_r <= solver_a_r < 1")
        if not (0 < self.R <= 1):
            raise ValueError("R must lie in (0, 1]")
        if self.merge_spin_flip not in ("auto", "true", "false"):
            raise ValueError("merge_spin_flip must be auto, true or false")
        if not self.sweeps or any(int(s) < 1 for s in self.sweeps):
            raise ValueError("sweeps must be a nonempty list of positive integers")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if not self.alphas or any(a < 0 for a in self.alphas):
            raise ValueError("alphas must be a nonempty list of non-negative slopes")
        if not (0 <= self.homogeneous_share <= 1):
            raise ValueError("homogeneous_share must lie in [0, 1]")
        if self.cluster_mode not in ("droplets", "random"):
            raise ValueError("cluster_mode must be droplets or random")
        if not self.d_r or any(not (0 < d <= 1) for d in self.d_r):
            raise ValueError("d_r values must lie in (0, 1]")
        self.pimc_params(0, 1)  # raises on inconsistent beta/slices

    def pimc_params(self, sweeps: int, seed: int) -> PimcParams:
        return PimcParams(beta=self.beta, slices=self.slices or None, sweeps=max(1, int(sweeps)),
                          seed=seed, readout=self.readout)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"unknown experiment keys: {', '.join(unknown)}")
        kw = dict(data)
        if "merge_spin_flip" in kw and isinstance(kw["merge_spin_flip"], bool):
            kw["merge_spin_flip"] = str(kw["merge_spin_flip"]).lower()
        return cls(**kw)

    @classmethod
    def from_toml(cls, path: str | os.PathLike) -> "ExperimentSpec":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        spec = cls.from_dict(data)
        base = Path(path).parent
        spec.instance_files = [str(base / f) if not os.path.isabs(f) else f
                               for f in spec.instance_files]
        return spec

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("workers")
        d.pop("output")
        return d


def load_instances(spec: ExperimentSpec) -> list[Instance]:
    if spec.ensemble == "files":
        return [read_instance(p) for p in spec.instance_files]
    gen = (lambda k: generate_2d(spec.L, k)) if spec.ensemble == "2d" else \
        (lambda k: generate_quasi_1d(spec.n, spec.r, k))
    return [gen(derive_seed(spec.instance_seed, k)) for k in range(spec.count)]


def _merge_flag(spec: ExperimentSpec, inst: Instance) -> bool:
    if spec.merge_spin_flip == "auto":
        return not np.any(inst.h)
    return spec.merge_spin_flip == "true"


# -- clusters ---------------------------------------------------------------------

def _components(inst: Instance, sites: set[int]) -> list[frozenset[int]]:
    out, seen = [], set()
    for s in sorted(sites):
        if s in seen:
            continue
        comp, stack = {s}, [s]
        seen.add(s)
        while stack:
            v = stack.pop()
            for u in inst.neighbors(v):
                u = int(u)
                if u in sites and u not in seen:
                    seen.add(u)
                    comp.add(u)
                    stack.append(u)
        out.append(frozenset(comp))
    return out


def basin_droplets(inst: Instance, seeds: BasinSeeds, low: LowEnergySet, min_size: int,
                   limit: int) -> list[frozenset[int]]:
    """Connected flip clusters separating the basin seeds from the ground state,
    topped up with droplets recorded by the spectrum scan.

    A flip set and its complement induce the same two-cluster split, so each
    set is replaced by its smaller side before splitting into components.
    Seed-derived droplets rank first, largest first.
    """
    every = set(range(inst.n))

    def pieces(sites: set[int]) -> list[frozenset[int]]:
        if len(sites) > inst.n // 2:
            sites = every - sites
        return [c for c in _components(inst, sites) if min_size <= len(c) <= inst.n // 2]

    def ranked(found):
        return sorted(set(found), key=lambda d: (-len(d), sorted(d)))

    ground = seeds.seeds[0]
    primary = ranked(c for s in seeds.seeds[1:]
                     for c in pieces(set(np.flatnonzero(s != ground).tolist())))
    extra = ranked(c for d in low.droplets for c in pieces(set(d)))
    out = primary + [d for d in extra if d not in set(primary)]
    return out[:limit]


def droplet_portfolio(inst: Instance, droplets: Sequence[frozenset[int]], min_size: int,
                      size: int) -> list[Partition]:
    """All droplets together, then each of the largest droplets on its own."""
    if not droplets:
        return [clusters_from_droplets(inst, [], min_size)]
    cands = [clusters_from_droplets(inst, droplets, min_size)]
    cands += [clusters_from_droplets(inst, [d], min_size) for d in droplets]
    out, keys = [], set()
    for p in cands:
        if p.key() not in keys:
            keys.add(p.key())
            out.append(p)
        if len(out) >= size:
            break
    return out


def baseline_random_clusters(inst: Instance, k: int, seed: int, min_size: int = 1) -> Partition:
    """Negative control: ``k`` random connected chunks instead of droplet-shaped clusters."""
    return random_clusters(inst, k, seed, min_size)


# -- restarts ---------------------------------------------------------------------

def _one_restart(inst: Instance, spec: ExperimentSpec, partitions: list[Partition], inst_idx: int,
                 proto: int, setting: int, sweeps: int, restart: int) -> dict:
    key = (inst_idx, proto, setting, restart)
    pseed = derive_seed(spec.seed, *key)
    if PROTOCOLS[proto] == "homogeneous":
        sched = homogeneous(inst, spec.t_a)
        part_id = -1
    else:
        rng = make_rng(spec.seed, *key, 1)
        part_id = int(rng.integers(0, len(partitions)))
        sched = random_portfolio_schedule(inst, partitions[part_id], spec.alphas, spec.t_a,
                                          derive_seed(spec.seed, *key, 2), spec.homogeneous_share)
    rec = pimc_anneal(inst, sched, spec.pimc_params(sweeps, pseed))
    alphas = [c.alpha for c in sched.clusters]
    return {"protocol": PROTOCOLS[proto], "sweeps": sweeps, "restart": restart, "seed": pseed,
            "partition": part_id, "alphas": alphas, "energy": rec.energy,
            "config": spins_to_str(rec.config)}


def _run_cells(inst, spec, partitions, inst_idx, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_one_restart, inst, spec, partitions, inst_idx, *j) for j in jobs]
            return [f.result() for f in futs]
    return [_one_restart(inst, spec, partitions, inst_idx, *j) for j in jobs]


# -- per-instance evaluation ------------------------------------------------------------

def _est(e: TimeEstimate):
    return e.value


def _from_est(v) -> TimeEstimate:
    return TIMED_OUT if v is None else TimeEstimate(float(v))


def cell_metrics(hits: Sequence[int], restarts: int, sweeps: int, D: int,
                 d_r: Sequence[float]) -> dict:
    """TTS (any basin) and TTD per d_r from one cell's hit counts."""
    if restarts == 0:
        return {"tts": None, "ttd": {str(d): None for d in d_r}}
    st = SuccessStats(np.asarray(hits), restarts, float(sweeps))
    return {"tts": _est(tts(st.any_rate, st.t_s)),
            "ttd": {str(d): _est(ttd(st, D, d)) for d in d_r}}


def evaluate_instance(inst: Instance, spec: ExperimentSpec, inst_idx: int,
                      out_dir: Path | None = None) -> dict:
    merge = _merge_flag(spec, inst)
    low = bnb_spectrum(inst, SpectrumRequest(spec.seed_a_r, spec.max_states),
                       strip_width_limit=spec.strip_width_limit)
    seeds = greedy_seeds(inst, low, DiversityParams(spec.R, merge))
    D = seeds.D
    solver_cutoff = low.e_min + spec.solver_a_r * low.bandwidth
    if spec.cluster_mode == "droplets":
        drops = basin_droplets(inst, seeds, low, spec.cluster_min_size, spec.max_droplets)
        partitions = droplet_portfolio(inst, drops, spec.cluster_min_size, spec.portfolio_size)
    else:
        partitions = [baseline_random_clusters(inst, spec.random_k,
                                               derive_seed(spec.seed, inst_idx, 99, j),
                                               spec.cluster_min_size)
                      for j in range(spec.portfolio_size)]

    jobs = [(p, k, int(sw), r) for p in range(len(PROTOCOLS))
            for k, sw in enumerate(spec.sweeps) for r in range(spec.restarts)]
    runs = _run_cells(inst, spec, partitions, inst_idx, jobs, spec.workers)

    configs = np.array([[1 if c == "+" else -1 for c in run["config"]] for run in runs],
                       dtype=np.int8).reshape(len(runs), inst.n)
    hit = np.array([run["energy"] <= solver_cutoff for run in runs], dtype=bool)
    basin = np.full(len(runs), -1, dtype=np.int64)
    if hit.any():
        basin[hit] = assign_basins(inst, configs[hit], seeds)
    for run, h, b in zip(runs, hit, basin):
        run["hit"] = bool(h)
        run["basin"] = int(b)

    cells = []
    protocols: dict[str, Any] = {}
    for p, name in enumerate(PROTOCOLS):
        union = np.zeros(D, dtype=bool)
        for k, sw in enumerate(spec.sweeps):
            sel = [j for j, (pp, kk, _, _) in enumerate(jobs) if pp == p and kk == k]
            hits = np.bincount(basin[sel][basin[sel] >= 0], minlength=D).astype(int)
            union |= hits > 0
            cells.append({"protocol": name, "sweeps": int(sw), "restarts": spec.restarts,
                          "hits": hits.tolist(), "D_solver": int((hits > 0).sum()),
                          **cell_metrics(hits, spec.restarts, sw, D, spec.d_r)})
        mine = [c for c in cells if c["protocol"] == name]
        best_sw, best = optimize_over_times({c["sweeps"]: _from_est(c["tts"]) for c in mine})
        ttd_opt = {}
        for d in spec.d_r:
            sw_d, est = optimize_over_times({c["sweeps"]: _from_est(c["ttd"][str(d)]) for c in mine})
            ttd_opt[str(d)] = {"sweeps": sw_d, "value": _est(est)}
        protocols[name] = {"tts": {"sweeps": best_sw, "value": _est(best)}, "ttd": ttd_opt,
                           "D_solver": int(union.sum())}

    digest = hashlib.sha256("\n".join(spins_to_str(s) for s in seeds.seeds).encode()).hexdigest()
    entry = {
        "index": inst_idx, "n": inst.n, "meta": {k: v for k, v in inst.meta.items()},
        "e_min": low.e_min, "bandwidth": low.bandwidth, "states": len(low),
        "spectrum_complete": low.complete, "solver_cutoff": solver_cutoff,
        "D": D, "seed_indices": seeds.indices.tolist(), "seeds_digest": digest,
        "merge_spin_flip": merge,
        "partitions": [{"clusters": [len(c) for c in part.clusters], "meta": part.meta}
                       for part in partitions],
        "cells": cells, "protocols": protocols,
    }
    if out_dir is not None:
        _write_instance_dir(out_dir / f"instance_{inst_idx:03d}", inst, low, seeds, runs, entry, spec)
    return entry


# -- files ---------------------------------------------------------------------------

def write_seeds(seeds: BasinSeeds, path: str | os.PathLike) -> None:
    lines = [f"R {seeds.R_used!r}", f"merge_spin_flip {str(seeds.merge_spin_flip).lower()}",
             f"a_r {seeds.a_r_used!r}", f"D {seeds.D}",
             "indices " + " ".join(str(int(i)) for i in seeds.indices)]
    lines += [f"{float(e)!r} {spins_to_str(s)}" for e, s in zip(seeds.energies, seeds.seeds)]
    write_text("\n".join(lines) + "\n", path)


def read_seeds(path: str | os.PathLike) -> BasinSeeds:
    from .instance import spins_from_str
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = {ln.split(" ", 1)[0]: ln.split(" ", 1)[1] if " " in ln else "" for ln in lines[:5]}
    D = int(head["D"])
    rows = [ln.split() for ln in lines[5:5 + D]]
    seeds = np.array([spins_from_str(s) for _, s in rows], dtype=np.int8)
    return BasinSeeds(seeds, np.array([int(x) for x in head["indices"].split()], dtype=np.int64),
                      float(head["R"]), float(head["a_r"]), head["merge_spin_flip"] == "true",
                      np.array([float(e) for e, _ in rows]))


def _fmt(v) -> str:
    return "TIMED_OUT" if v is None else repr(float(v))


def _write_instance_dir(d: Path, inst, low, seeds, runs, entry, spec):
    d.mkdir(parents=True, exist_ok=True)
    write_instance(inst, d / "instance.txt")
    write_spectrum(low, d / "spectrum.txt")
    write_seeds(seeds, d / "seeds.txt")
    with open(d / "runs.log", "w") as fh:
        for run in runs:
            fh.write(json.dumps(run, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["protocol", "sweeps", "restarts", "hits_any", "D_solver", "tts"]
               + [f"ttd_{d}" for d in spec.d_r] + ["basin_hits"])
    for c in entry["cells"]:
        w.writerow([c["protocol"], c["sweeps"], c["restarts"], sum(c["hits"]), c["D_solver"],
                    _fmt(c["tts"])] + [_fmt(c["ttd"][str(x)]) for x in spec.d_r]
                   + [";".join(map(str, c["hits"]))])
    (d / "summary.csv").write_text(buf.getvalue())


# -- ensemble ------------------------------------------------------------------------

def _q(values: list, q: float):
    """Nearest-rank quantile with timeouts (None) ranked above every finite time."""
    key = [float("inf") if v is None else v for v in values]
    x = nearest_rank(key, q)
    return None if x == float("inf") else x


def ensemble_summary(instances: list[dict], d_r: Sequence[float]) -> dict:
    out: dict[str, Any] = {"D": {str(q): nearest_rank([e["D"] for e in instances], q)
                                 for q in QUANTILES}}
    for name in PROTOCOLS:
        prot = [e["protocols"][name] for e in instances]
        out[name] = {
            "D_solver": {str(q): nearest_rank([p["D_solver"] for p in prot], q) for q in QUANTILES},
            "tts": {str(q): _q([p["tts"]["value"] for p in prot], q) for q in QUANTILES},
            "ttd": {str(d): {str(q): _q([p["ttd"][str(d)]["value"] for p in prot], q)
                             for q in QUANTILES} for d in d_r},
            "timeouts_tts": sum(p["tts"]["value"] is None for p in prot),
            "timeouts_ttd": {str(d): sum(p["ttd"][str(d)]["value"] is None for p in prot)
                             for d in d_r},
        }
    return out


@dataclass
class BenchReport:
    spec: dict
    instances: list[dict]
    ensemble: dict
    metadata: dict

    def body(self) -> str:
        """Canonical JSON; contains no timestamps, so identical specs give identical bytes."""
        return json.dumps({"spec": self.spec, "metadata": self.metadata,
                           "instances": self.instances, "ensemble": self.ensemble},
                          sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        data = json.loads(text)
        return cls(data["spec"], data["instances"], data["ensemble"], data["metadata"])


def _metadata() -> dict:
    import numba
    return {"package": f"divanneal {__version__}", "rng": RNG_VERSION, "kernel_rng": KERNEL_RNG,
            "numpy": np.__version__, "numba": numba.__version__,
            "quantile_rule": "nearest-rank", "time_unit": "sweeps"}


def render_report(report: BenchReport, out_dir: str | os.PathLike) -> None:
    """Write the ensemble CSV tables and plot-data files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d_r = report.spec["d_r"]
    ens = report.ensemble

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "protocol"] + [f"q{int(q * 100)}" for q in QUANTILES])
    w.writerow(["D", "ground_truth"] + [ens["D"][str(q)] for q in QUANTILES])
    for name in PROTOCOLS:
        w.writerow(["D_solver", name] + [ens[name]["D_solver"][str(q)] for q in QUANTILES])
        w.writerow(["tts", name] + [_fmt(ens[name]["tts"][str(q)]) for q in QUANTILES])
        for d in d_r:
            w.writerow([f"ttd_{d}", name] + [_fmt(ens[name]["ttd"][str(d)][str(q)]) for q in QUANTILES])
    (out / "quantiles.csv").write_text(buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "metric", "homogeneous", "portfolio"])
    for e in report.instances:
        ph, pp = e["protocols"]["homogeneous"], e["protocols"]["portfolio"]
        w.writerow([e["index"], "D_solver", ph["D_solver"], pp["D_solver"]])
        w.writerow([e["index"], "tts", _fmt(ph["tts"]["value"]), _fmt(pp["tts"]["value"])])
        for d in d_r:
            w.writerow([e["index"], f"ttd_{d}", _fmt(ph["ttd"][str(d)]["value"]),
                        _fmt(pp["ttd"][str(d)]["value"])])
    (out / "scatter.csv").write_text(buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["protocol", "quantile", "d_r", "ttd"])
    for name in PROTOCOLS:
        for q in QUANTILES:
            for d in d_r:
                w.writerow([name, q, d, _fmt(ens[name]["ttd"][str(d)][str(q)])])
    (out / "ttd_curves.csv").write_text(buf.getvalue())


def run_experiment(spec: ExperimentSpec, out_dir: str | os.PathLike | None = None) -> BenchReport:
    out = Path(out_dir or spec.output) if (out_dir or spec.output) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    instances = load_instances(spec)
    entries: list[dict] = []
    meta = _metadata()
    try:
        for k, inst in enumerate(instances):
            log.info("instance %d/%d (n=%d)", k + 1, len(instances), inst.n)
            entries.append(evaluate_instance(inst, spec, k, out))
    except Exception as exc:
        if out is not None:
            partial = BenchReport(spec.to_dict(), entries, {}, {**meta, "error": repr(exc),
                                                                "partial": True})
            (out / "report.json").write_text(partial.body())
        raise
    report = BenchReport(spec.to_dict(), entries, ensemble_summary(entries, spec.d_r), meta)
    if out is not None:
        (out / "report.json").write_text(report.body())
        render_report(report, out)
    return report


def verify_report(report: BenchReport) -> list[str]:
    """Re-derive every TTS/TTD from stored hit counts; return a list of problems."""
    problems = []
    d_r = report.spec["d_r"]
    for e in report.instances:
        for c in e["cells"]:
            if sum(c["hits"]) > c["restarts"]:
                problems.append(f"instance {e['index']}: more hits than restarts")
                continue
            again = cell_metrics(c["hits"], c["restarts"], c["sweeps"], e["D"], d_r)
            if again["tts"] != c["tts"] or again["ttd"] != c["ttd"]:
                problems.append(f"instance {e['index']} {c['protocol']}@{c['sweeps']}: "
                                "stored estimates do not match hit counts")
        ph = e["protocols"]["homogeneous"]
        t = float("inf") if ph["tts"]["value"] is None else ph["tts"]["value"]
        for d in d_r:
            v = ph["ttd"][str(d)]["value"]
            if (float("inf") if v is None else v) < t:
                problems.append(f"instance {e['index']}: homogeneous TTD({d}) below TTS")
    return problems
