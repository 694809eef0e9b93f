"""Command-line entry point: ``divanneal {gen,spectrum,diversity,anneal,bench,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import (BenchReport, ExperimentSpec, render_report, run_experiment, verify_report,
                    write_seeds)
from .diversity import DiversityParams, greedy_seeds
from .instance import (InstanceFormatError, generate_2d, generate_quasi_1d, read_instance,
                       spins_to_str, write_instance)
from .schedule import homogeneous, schedule_from_dict
from .solver import READOUTS, PimcParams, pimc_anneal
from .spectrum import (BoundaryTooWideError, SpectrumRequest, SpectrumTooLargeError, bnb_spectrum,
                       read_spectrum, write_spectrum)



def cmd_gen(a) -> int:
    if (a.two_d is None) == (a.quasi1d is None):
        raise SystemExit("gen: give exactly one of --2d L or --quasi1d N")
    inst = generate_2d(a.two_d, a.seed) if a.two_d is not None else \
        generate_quasi_1d(a.quasi1d, a.r, a.seed)
    write_instance(inst, a.output or sys.stdout)
    return 0


def cmd_spectrum(a) -> int:
    inst = read_instance(a.instance)
    req = SpectrumRequest(a.ar, a.max_states, a.mode)
    low = bnb_spectrum(inst, req, strip_width_limit=a.strip_limit)
    write_spectrum(low, a.output or sys.stdout)
    if not low.complete:
        print(f"warning: truncated at {len(low)} states", file=sys.stderr)
    return 0


def cmd_diversity(a) -> int:
    inst = read_instance(a.instance)
    low = read_spectrum(a.spectrum)
    merge = a.merge_spin_flip if a.merge_spin_flip is not None else False
    seeds = greedy_seeds(inst, low, DiversityParams(a.R, merge))
    write_seeds(seeds, a.output or sys.stdout)
    return 0


def cmd_anneal(a) -> int:
    inst = read_instance(a.instance)
    if a.schedule:
        sched = schedule_from_dict(inst, json.loads(Path(a.schedule).read_text()))
    else:
        sched = homogeneous(inst, a.t_a)
    lines = []
    for k in range(a.restarts):
        p = PimcParams(beta=a.beta, slices=a.slices, sweeps=a.sweeps, seed=a.seed + k,
                       readout=a.readout)
        rec = pimc_anneal(inst, sched, p)
        lines.append(json.dumps({"seed": rec.seed, "sweeps": rec.sweeps, "energy": rec.energy,
                                 "config": spins_to_str(rec.config),
                                 "schedule": rec.schedule_meta}, sort_keys=True))
    text = "\n".join(lines) + ("\n" if lines else "")
    if a.output:
        with open(a.output, "a") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(a) -> int:
    spec = ExperimentSpec.from_toml(a.spec)
    if a.workers:
        spec.workers = a.workers
    out = a.output or spec.output or "bench_out"
    report = run_experiment(spec, out)
    problems = verify_report(report)
    for p in problems:
        print(f"inconsistent: {p}", file=sys.stderr)
    print(f"wrote {out} ({len(report.instances)} instances)")
    return 1 if problems else 0


def cmd_report(a) -> int:
    d = Path(a.outdir)
    path = d / "report.json"
    if not path.exists():
        raise SystemExit(f"report: no report.json in {d}")
    report = BenchReport.from_json(path.read_text())
    if report.metadata.get("partial"):
        raise SystemExit(f"report: {path} is a partial report ({report.metadata.get('error')})")
    render_report(report, a.output or d)
    problems = verify_report(report)
    for p in problems:
        print(f"inconsistent: {p}", file=sys.stderr)
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divanneal", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--2d", dest="two_d", type=int, metavar="L", help="open L x L lattice")
    g.add_argument("--quasi1d", type=int, metavar="N", help="chain of N spins")
    g.add_argument("--r", type=int, default=3, help="coupling range for --quasi1d")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("spectrum", help="low-energy states within a_r of the ground state")
    s.add_argument("instance")
    s.add_argument("--ar", type=float, required=True)
    s.add_argument("--mode", choices=["exact", "bound"], default="exact")
    s.add_argument("--max-states", type=int, default=200_000)
    s.add_argument("--strip-limit", type=int, default=14)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("diversity", help="greedy basin seeds of a spectrum")
    d.add_argument("instance")
    d.add_argument("spectrum")
    d.add_argument("--R", type=float, default=0.125)
    d.add_argument("--merge-spin-flip", action=argparse.BooleanOptionalAction, default=None)
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_diversity)

    n = sub.add_parser("anneal", help="PIMC annealing restarts (NDJSON records)")
    n.add_argument("instance")
    n.add_argument("--schedule", help="JSON schedule block; default homogeneous")
    n.add_argument("--t-a", type=float, default=1.0)
    n.add_argument("--sweeps", type=int, default=1000)
    n.add_argument("--restarts", type=int, default=1)
    n.add_argument("--beta", type=float, default=24.0)
    n.add_argument("--slices", type=int, default=None)
    n.add_argument("--readout", choices=sorted(READOUTS), default="lowest")
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("-o", "--output", help="record log to append to")
    n.set_defaults(func=cmd_anneal)

    b = sub.add_parser("bench", help="run an experiment file")
    b.add_argument("spec")
    b.add_argument("--workers", type=int, default=0)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="re-render CSV tables from a report directory")
    r.add_argument("outdir")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except (InstanceFormatError, SpectrumTooLargeError, BoundaryTooWideError, ValueError,
            OSError) as exc:
        print(f"divanneal {a.cmd}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
