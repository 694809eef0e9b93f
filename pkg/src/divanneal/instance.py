"""Ising problem instances: data model, generators, energy, text format.

The problem Hamiltonian is

    H(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i,   s_i = +-1

with the convention h_i = J_ii in the coupling file.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from ._rng import make_rng


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Instance:
    """Sparse Ising instance on ``n`` spins.

    ``edge_i < edge_j`` holds for every edge, pairs are unique, and all
    couplings and fields are bounded by 1 in magnitude. ``coords`` is an
    ``(n, d)`` array of site coordinates (d = 1 for chains, 2 for lattices)
    or ``None`` when the instance has no geometry.
    """

    n: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_J: np.ndarray
    h: np.ndarray
    coords: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError("instance needs at least one spin")
        ei = np.asarray(self.edge_i, dtype=np.int64).ravel()
        ej = np.asarray(self.edge_j, dtype=np.int64).ravel()
        eJ = np.asarray(self.edge_J, dtype=np.float64).ravel()
        h = np.asarray(self.h, dtype=np.float64).ravel()
        if not (len(ei) == len(ej) == len(eJ)):
            raise ValueError("edge arrays differ in length")
        if len(h) != n:
            raise ValueError(f"expected {n} fields, got {len(h)}")
        if len(ei) and (ei.min() < 0 or ej.max() >= n):
            raise ValueError("edge index out of range")
        if np.any(ei >= ej):
            raise ValueError("edges must satisfy i < j")
        keys = ei * n + ej
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate edge")
        if np.any(np.abs(eJ) > 1.0) or np.any(np.abs(h) > 1.0):
            raise ValueError("|J_ij| and |h_i| must not exceed 1")
        if not (np.all(np.isfinite(eJ)) and np.all(np.isfinite(h))):
            raise ValueError("non-finite coupling or field")
        coords = self.coords
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise ValueError("coords must have one row per spin")
            coords = _frozen(coords.copy())
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edge_i", _frozen(ei.copy()))
        object.__setattr__(self, "edge_j", _frozen(ej.copy()))
        object.__setattr__(self, "edge_J", _frozen(eJ.copy()))
        object.__setattr__(self, "h", _frozen(h.copy()))
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]],
                   fields: Sequence[float] | None = None, coords=None, **meta) -> "Instance":
        """Build from ``(i, j, J)`` triples; ``i > j`` is swapped, ``i == j`` is a field."""
        h = np.zeros(n) if fields is None else np.array(fields, dtype=np.float64)
        ei, ej, eJ = [], [], []
        for i, j, v in edges:
            i, j = int(i), int(j)
            if i == j:
                h[i] += float(v)
                continue
            if i > j:
                i, j = j, i
            ei.append(i)
            ej.append(j)
            eJ.append(float(v))
        return cls(n, np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64),
                   np.array(eJ), h, coords, dict(meta))

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.edge_i, self.edge_j, self.edge_J)]

    @property
    def m(self) -> int:
        return len(self.edge_J)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency as ``(indptr, indices, weights)``."""
        rows = np.concatenate([self.edge_i, self.edge_j])
        cols = np.concatenate([self.edge_j, self.edge_i])
        w = np.concatenate([self.edge_J, self.edge_J])
        order = np.lexsort((cols, rows))
        rows, cols, w = rows[order], cols[order], w[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return _frozen(indptr), _frozen(cols.astype(np.int64)), _frozen(w.astype(np.float64))

    def neighbors(self, i: int) -> np.ndarray:
        indptr, indices, _ = self.csr
        return indices[indptr[i]:indptr[i + 1]]

    @cached_property
    def abs_weight(self) -> float:
        """sum |J_ij| + sum |h_i|; bounds |H(s)| for every s."""
        return float(np.abs(self.edge_J).sum() + np.abs(self.h).sum())

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        same_geom = (self.coords is None and other.coords is None) or (
            self.coords is not None and other.coords is not None
            and self.coords.shape == other.coords.shape
            and np.array_equal(self.coords, other.coords))
        return (self.n == other.n and np.array_equal(self.edge_i, other.edge_i)
                and np.array_equal(self.edge_j, other.edge_j)
                and np.array_equal(self.edge_J, other.edge_J)
                and np.array_equal(self.h, other.h) and same_geom)

    __hash__ = None


# -- spin configurations ------------------------------------------------------

def spin_config(values, n: int | None = None) -> np.ndarray:
    """Validate and return a read-only int8 vector of +-1 spins."""
    s = np.asarray(values)
    if s.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if n is not None and len(s) != n:
        raise ValueError(f"configuration has length {len(s)}, expected {n}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be +1 or -1")
    return _frozen(s.astype(np.int8))


def spins_to_str(s) -> str:
    return "".join("+" if v > 0 else "-" for v in s)


def spins_from_str(text: str) -> np.ndarray:
    try:
        return spin_config([1 if c == "+" else {"-": -1}[c] for c in text.strip()])
    except KeyError:
        raise ValueError(f"bad spin string {text!r}") from None


@njit(cache=True)
def _energy_rows(S, ei, ej, J, h):
    # Fixed summation order: edges in stored order, then fields.
    out = np.empty(S.shape[0])
    for r in range(S.shape[0]):
        e = 0.0
        for k in range(len(J)):
            e += J[k] * S[r, ei[k]] * S[r, ej[k]]
        for i in range(len(h)):
            e += h[i] * S[r, i]
        out[r] = e
    return out


def energies(inst: Instance, S) -> np.ndarray:
    """Energies of a batch of configurations, ``S`` of shape ``(m, n)``."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[1] != inst.n:
        raise ValueError(f"expected configurations of length {inst.n}")
    return _energy_rows(np.ascontiguousarray(S, dtype=np.int8), inst.edge_i, inst.edge_j,
                        inst.edge_J, inst.h)


def energy(inst: Instance, s) -> float:
    """Classical energy of one configuration."""
    s = np.asarray(s)
    if s.ndim != 1 or len(s) != inst.n:
        raise ValueError(f"configuration length {np.size(s)} does not match n={inst.n}")
    return float(energies(inst, s[None, :])[0])


def overlap(a, b) -> float:
    """q_ab = (1/N) sum_i a_i b_i."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("overlap needs two configurations of equal length")
    return float(np.dot(a.astype(np.int64), b.astype(np.int64))) / len(a)


def hamming(a, b) -> int:
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


# -- generators ---------------------------------------------------------------

def generate_quasi_1d(n: int, r: int, seed: int) -> Instance:
    """Chain with couplings for every pair 1 <= |i-j| <= r, J ~ U[-1, 1], no fields."""
    if n < 2 or r < 1:
        raise ValueError("need n >= 2 and r >= 1")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, min(i + r, n - 1) + 1)]
    rng = make_rng(seed)
    J = rng.uniform(-1.0, 1.0, size=len(pairs))
    ei = np.array([p[0] for p in pairs], dtype=np.int64)
    ej = np.array([p[1] for p in pairs], dtype=np.int64)
    return Instance(n, ei, ej, J, np.zeros(n), np.arange(n, dtype=np.float64)[:, None],
                    {"generator": "quasi1d", "r": r, "seed": seed})


def generate_2d(L: int, seed: int, cols: int | None = None) -> Instance:
    """Open L x L square lattice (L x cols if given), J ~ U[-1, 1] on bonds, h ~ U[-0.1, 0.1].

    Sites are numbered row-major, ``index = row * cols + col``.
    """
    C = L if cols is None else cols
    if L < 2 or C < 2:
        raise ValueError("need at least 2 rows and 2 columns")
    ei, ej = [], []
    for r in range(L):
        for c in range(C):
            k = r * C + c
            if c + 1 < C:
                ei.append(k)
                ej.append(k + 1)
            if r + 1 < L:
                ei.append(k)
                ej.append(k + C)
    rng = make_rng(seed)
    J = rng.uniform(-1.0, 1.0, size=len(ei))
    h = rng.uniform(-0.1, 0.1, size=L * C)
    rows, cc = np.divmod(np.arange(L * C), C)
    coords = np.stack([rows, cc], axis=1).astype(np.float64)
    meta = {"generator": "2d", "L": L, "seed": seed}
    if cols is not None:
        meta["cols"] = C
    return Instance(L * C, np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64), J, h,
                    coords, meta)


# -- text format ----------------------------------------------------------------
#
#   # free comment
#   #@ geometry chain            (coords are 0..n-1)
#   #@ geometry grid <rows> <cols>
#   #@ site <i> <x> [<y> ...]    (explicit coordinates, one line per site)
#   n m
#   i j value                    (i == j encodes the field h_i)

def _geometry_lines(inst: Instance) -> list[str]:
    c = inst.coords
    if c is None:
        return []
    n = inst.n
    if c.shape[1] == 1 and np.array_equal(c[:, 0], np.arange(n)):
        return ["#@ geometry chain"]
    if c.shape[1] == 2:
        rows = int(c[:, 0].max()) + 1 if n else 0
        cols = n // rows if rows else 0
        if rows * cols == n:
            rr, cc = np.divmod(np.arange(n), cols)
            if np.array_equal(c[:, 0], rr) and np.array_equal(c[:, 1], cc):
                return [f"#@ geometry grid {rows} {cols}"]
    return ["#@ site " + " ".join([str(i)] + [repr(float(x)) for x in row])
            for i, row in enumerate(c)]


def write_instance(inst: Instance, path: str | os.PathLike) -> None:
    lines = ["# Ising instance: H = sum_{i<j} J_ij s_i s_j + sum_i J_ii s_i"]
    lines += _geometry_lines(inst)
    body = [f"{i} {j} {float(v)!r}" for i, j, v in zip(inst.edge_i, inst.edge_j, inst.edge_J)]
    body += [f"{i} {i} {float(v)!r}" for i, v in enumerate(inst.h) if v != 0.0]
    lines.append(f"{inst.n} {len(body)}")
    lines += body
    write_text("\n".join(lines) + "\n", path)


def write_text(text: str, dest) -> None:
    """Write to a path, or to an open text stream such as ``sys.stdout``."""
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)


def read_instance(path: str | os.PathLike) -> Instance:
    with open(path) as fh:
        return parse_instance(fh.read())


def parse_instance(text: str) -> Instance:
    header = None
    geometry = None
    sites: dict[int, list[float]] = {}
    seen: dict[tuple[int, int], int] = {}
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#@"):
            parts = line[2:].split()
            try:
                if parts[0] == "geometry" and parts[1] == "chain":
                    geometry = ("chain",)
                elif parts[0] == "geometry" and parts[1] == "grid":
                    geometry = ("grid", int(parts[2]), int(parts[3]))
                elif parts[0] == "site":
                    sites[int(parts[1])] = [float(x) for x in parts[2:]]
                else:
                    raise InstanceFormatError(f"unknown directive {parts[0]!r}", lineno)
            except (IndexError, ValueError) as exc:
                if isinstance(exc, InstanceFormatError):
                    raise
                raise InstanceFormatError(f"malformed directive {line!r}", lineno) from None
            continue
        if line.startswith("#"):
            continue
        line = line.split("#", 1)[0]
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise InstanceFormatError(f"expected header 'n m', got {raw!r}", lineno)
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise InstanceFormatError(f"expected header 'n m', got {raw!r}", lineno) from None
            if header[0] < 1 or header[1] < 0:
                raise InstanceFormatError("header values out of range", lineno)
            continue
        if len(parts) != 3:
            raise InstanceFormatError(f"expected 'i j value', got {raw!r}", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise InstanceFormatError(f"expected 'i j value', got {raw!r}", lineno) from None
        n = header[0]
        if not (0 <= i < n and 0 <= j < n):
            raise InstanceFormatError(f"index out of range for n={n}: {raw!r}", lineno)
        if not math.isfinite(v) or abs(v) > 1.0:
            raise InstanceFormatError(f"value {v} outside [-1, 1]", lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InstanceFormatError(f"duplicate entry for {key} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        triples.append((i, j, v))
    if header is None:
        raise InstanceFormatError("missing header line 'n m'")
    n, m = header
    if len(triples) != m:
        raise InstanceFormatError(f"header announces {m} entries, found {len(triples)}")
    coords = None
    if geometry == ("chain",):
        coords = np.arange(n, dtype=np.float64)[:, None]
    elif geometry is not None:
        rows, cols = geometry[1], geometry[2]
        if rows * cols != n:
            raise InstanceFormatError(f"grid {rows}x{cols} does not match n={n}")
        rr, cc = np.divmod(np.arange(n), cols)
        coords = np.stack([rr, cc], axis=1).astype(np.float64)
    elif sites:
        if sorted(sites) != list(range(n)):
            raise InstanceFormatError("site directives must cover every spin exactly once")
        coords = np.array([sites[i] for i in range(n)], dtype=np.float64)
    return Instance.from_edges(n, triples, coords=coords)
