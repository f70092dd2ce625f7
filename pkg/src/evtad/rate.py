"""Binned event rate and its percentile-robust normalization (the actioness signal)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from evtad.events import EventStream, _bin_index, n_bins_for


@dataclass(frozen=True)
class RateConfig:
    bin_width: float = 0.033
    percentile: float = 1.0

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if not 0 <= self.percentile < 50:
            raise ValueError("percentile must lie in [0, 50)")


@dataclass(frozen=True, eq=False)
class RateSeries:
    """Rate samples over consecutive half-open bins starting at ``t0`` (µs).

    ``values`` are events/s, or dimensionless in [0, 1] when ``normalized``.
    """

    values: np.ndarray
    bin_width: float
    t0: int
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if len(v) and v.min() < 0:
            raise ValueError("rate values must be non-negative")
        if self.normalized and len(v) and v.max() > 1:
            raise ValueError("normalized rate values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def t0_s(self) -> float:
        return self.t0 / 1e6

    @property
    def t_stop_s(self) -> float:
        return self.t0_s + len(self.values) * self.bin_width

    def bin_starts_us(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) * self.bin_width * 1e6


def event_rate(s: EventStream, bin_width: float) -> RateSeries:
    """Events per second in bins of ``bin_width`` seconds starting at ``s.t_begin``.

    Polarity is ignored. The bin count is ``ceil(duration / bin_width)`` (at
    least one); the last bin is closed on the right so an event at exactly
    ``t_end`` is counted, and a partial last bin is still divided by the
    nominal width. Hence ``sum(values) * bin_width == len(s)`` exactly.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    bin_us = bin_width * 1e6
    n_bins = n_bins_for(s.t_begin, s.t_end, bin_us)
    if len(s):
        counts = np.bincount(_bin_index(s.t, s.t_begin, bin_us, n_bins), minlength=n_bins)
    else:
        counts = np.zeros(n_bins, dtype=np.int64)
    return RateSeries(counts / bin_width, bin_width, s.t_begin)


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile ``q`` (percent) of an ascending array.

    The value at 1-based rank ``ceil(q/100 * n)``, with rank 0 mapped to the
    minimum.
    """
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n / 100.0 - 1e-9))
    return float(sorted_values[min(rank, n) - 1])


def robust_bounds(values: np.ndarray, p: float) -> tuple[float, float]:
    ordered = np.sort(np.asarray(values, dtype=float))
    return nearest_rank(ordered, p), nearest_rank(ordered, 100.0 - p)


def robust_normalize(r: RateSeries, p: float = 1.0) -> RateSeries:
    """Clip to the p-th/(100-p)-th nearest-rank percentiles and rescale to [0, 1].

    A flat signal (upper bound equal to lower bound) maps to all zeros.
    """
    if r.normalized:
        raise ValueError("series is already normalized")
    if not 0 <= p < 50:
        raise ValueError("percentile must lie in [0, 50)")
    v = r.values
    lo, hi = robust_bounds(v, p)
    if hi <= lo:
        out = np.zeros_like(v)
    else:
        out = (np.clip(v, lo, hi) - lo) / (hi - lo)
    return RateSeries(out, r.bin_width, r.t0, normalized=True)
