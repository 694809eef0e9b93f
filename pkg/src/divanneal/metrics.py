"""Time-to-solution and time-to-diversity estimators.

For a solver that succeeds with probability ``r`` per run of length ``t_s``,
the time to succeed at least once with 99% confidence is

    TTS = t_s * ln(0.01) / ln(1 - r).

A portfolio of solvers combines the per-run log-failure rates with an equal
weight mean. TTD targets ``l = ceil(D * d_r)`` basins and uses the l-th
largest per-basin rate in place of ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

CONFIDENCE = 0.99
_LOG_MISS = math.log(1.0 - CONFIDENCE)


@dataclass(frozen=True, order=False)
class TimeEstimate:
    """A time in the run's unit; ``value is None`` marks a timed-out cell."""

    value: float | None
    confidence: float = CONFIDENCE

    @property
    def timed_out(self) -> bool:
        return self.value is None

    def sort_key(self) -> float:
        return math.inf if self.value is None else self.value

    def __str__(self):
        return "TIMED_OUT" if self.value is None else f"{self.value:.6g}"


TIMED_OUT = TimeEstimate(None)


@dataclass
class SuccessStats:
    per_basin_hits: np.ndarray
    restarts: int
    t_s: float

    def __post_init__(self):
        self.per_basin_hits = np.asarray(self.per_basin_hits, dtype=np.int64)
        if self.restarts < 0 or np.any(self.per_basin_hits < 0):
            raise ValueError("counts must be non-negative")
        if self.per_basin_hits.sum() > self.restarts:
            raise ValueError("more basin hits than restarts")
        if not self.t_s > 0:
            raise ValueError("t_s must be positive")

    @property
    def rates(self) -> np.ndarray:
        if self.restarts == 0:
            return np.zeros(len(self.per_basin_hits))
        return self.per_basin_hits / self.restarts

    @property
    def any_rate(self) -> float:
        return 0.0 if self.restarts == 0 else float(self.per_basin_hits.sum()) / self.restarts


def _check_rate(r: float, t_s: float):
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"rate {r} outside [0, 1]")
    if not t_s > 0:
        raise ValueError("t_s must be positive")


def _log_rate(r: float, t_s: float) -> float:
    """ln(1 - r) / t_s with r capped at the target confidence."""
    return math.log1p(-min(r, CONFIDENCE)) / t_s


def tts(r: float, t_s: float) -> TimeEstimate:
    """99%-confidence time to solution; ``r >= 0.99`` costs one run, ``r = 0`` times out."""
    _check_rate(r, t_s)
    if r == 0.0:
        return TIMED_OUT
    if r >= CONFIDENCE:
        return TimeEstimate(float(t_s))
    return TimeEstimate(t_s * _LOG_MISS / math.log1p(-r))


def tts_portfolio(entries: Sequence[tuple[float, float]]) -> TimeEstimate:
    """TTS of an equal-weight portfolio of ``(rate, t_s)`` solvers."""
    if len(entries) == 0:
        raise ValueError("empty portfolio")
    for r, t in entries:
        _check_rate(r, t)
    if all(r == 0.0 for r, _ in entries):
        return TIMED_OUT
    mean = sum(_log_rate(r, t) for r, t in entries) / len(entries)
    return TimeEstimate(_LOG_MISS / mean)


def target_rank(D: int, d_r: float) -> int:
    if D < 1:
        raise ValueError("D must be >= 1")
    if not (0.0 < d_r <= 1.0):
        raise ValueError("d_r must lie in (0, 1]")
    # Guard against 0.8 * 5 = 4.000000000000001.
    return max(1, math.ceil(round(D * d_r, 9)))


def ttd(stats: SuccessStats, D: int, d_r: float) -> TimeEstimate:
    """Time to observe ``ceil(D * d_r)`` distinct basins, via the l-th largest rate."""
    l = target_rank(D, d_r)
    rates = np.sort(np.asarray(stats.rates, dtype=np.float64))[::-1]
    if len(rates) < D:
        rates = np.concatenate([rates, np.zeros(D - len(rates))])
    return tts(float(rates[l - 1]), stats.t_s)


def ttd_portfolio(stats: Sequence[SuccessStats], D: int, d_r: float) -> TimeEstimate:
    """Portfolio TTD: per-basin log-failure rates averaged over solvers, then ranked."""
    if len(stats) == 0:
        raise ValueError("empty portfolio")
    l = target_rank(D, d_r)
    per_basin = np.zeros(D)
    for st in stats:
        r = np.zeros(D)
        r[: len(st.rates)] = st.rates[:D]
        per_basin += np.log1p(-np.minimum(r, CONFIDENCE)) / st.t_s
    per_basin /= len(stats)
    lam = np.sort(per_basin)[l - 1]   # most negative first == most likely basin
    if lam == 0.0:
        return TIMED_OUT
    return TimeEstimate(float(_LOG_MISS / lam))


def optimize_over_times(results: Mapping[Hashable, TimeEstimate]):
    """Setting with the smallest estimate; timeouts count as +inf, ties go to the smaller setting.

    Returns ``(setting, estimate)`` or ``(None, TIMED_OUT)``.
    """
    if not results:
        raise ValueError("no results")
    best = min(sorted(results), key=lambda k: results[k].sort_key())
    if results[best].timed_out:
        return None, TIMED_OUT
    return best, results[best]


def nearest_rank(values: Iterable[float], q: float) -> float:
    """Nearest-rank quantile: the ceil(q * n)-th smallest value."""
    v = sorted(values)
    if not v:
        raise ValueError("no values")
    if not (0.0 < q <= 1.0):
        raise ValueError("q must lie in (0, 1]")
    return v[max(1, math.ceil(round(q * len(v), 9))) - 1]
