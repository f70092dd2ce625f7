"""Fixed-size 2D snapshots of events around a timestamp."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from evtad.events import EventStream

KINDS = ("histogram", "timemap")
# time map search horizon in units of tau; exp(-5) < 0.7 %
TIMEMAP_HORIZON = 5.0


@dataclass(frozen=True)
class RepresentConfig:
    kind: str = "histogram"
    window: float = 1.0
    tau: float = 0.2
    out_h: int = 32
    out_w: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown representation {self.kind!r}; expected one of {KINDS}")
        if self.window <= 0 or self.tau <= 0:
            raise ValueError("window and tau must be positive")
        if self.out_h < 1 or self.out_w < 1:
            raise ValueError("output dimensions must be at least 1")


@dataclass(frozen=True, eq=False)
class Grid:
    values: np.ndarray
    t_center: float
    kind: str

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


def event_histogram(s: EventStream, t_center: float, window: float) -> Grid:
    """Per-pixel event counts in ``[t_center - window/2, t_center + window/2)``."""
    if window <= 0:
        raise ValueError("window must be positive")
    sl = s.time_slice((t_center - window / 2) * 1e6, (t_center + window / 2) * 1e6)
    pix = s.y[sl].astype(np.int64) * s.width + s.x[sl]
    counts = np.bincount(pix, minlength=s.width * s.height).reshape(s.height, s.width)
    return Grid(counts.astype(float), t_center, "histogram")


def time_map(s: EventStream, t_center: float, tau: float) -> Grid:
    """Exponential decay of the time since each pixel's latest event at or before ``t_center``.

    Only events within ``5 * tau`` before ``t_center`` are searched; older
    pixels read 0.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    tc_us = round(t_center * 1e6)
    sl = s.time_slice(tc_us - TIMEMAP_HORIZON * tau * 1e6, tc_us + 1)
    out = np.zeros(s.height * s.width)
    if sl.stop > sl.start:
        pix = s.y[sl].astype(np.int64) * s.width + s.x[sl]
        last = np.full(s.height * s.width, np.iinfo(np.int64).min)
        np.maximum.at(last, pix, s.t[sl])
        hit = last > np.iinfo(np.int64).min
        out[hit] = np.exp(-(tc_us - last[hit]) / (tau * 1e6))
    return Grid(out.reshape(s.height, s.width), t_center, "timemap")


@lru_cache(maxsize=64)
def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Corner-aligned linear interpolation weights, shape (n_out, n_in). Read-only (cached)."""
    m = np.zeros((n_out, n_in))
    if n_in == 1:
        m[:, 0] = 1.0
        m.flags.writeable = False
        return m
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(pos).astype(int), n_in - 2)
    frac = pos - lo
    rows = np.arange(n_out)
    m[rows, lo] = 1.0 - frac
    m[rows, lo + 1] += frac
    m.flags.writeable = False
    return m


def resize_grid(g: Grid, out_h: int, out_w: int) -> Grid:
    """Bilinear resize with corner-aligned sampling; output stays within the input range."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be at least 1")
    v = g.values
    if v.shape == (out_h, out_w):
        return g
    out = _interp_matrix(v.shape[0], out_h) @ v @ _interp_matrix(v.shape[1], out_w).T
    out = np.clip(out, v.min(), v.max())
    return Grid(out, g.t_center, g.kind)


def snapshot(s: EventStream, t_center: float, cfg: RepresentConfig) -> Grid:
    """Representation of ``cfg.kind`` at ``t_center``, resized to the configured grid."""
    if cfg.kind == "histogram":
        g = event_histogram(s, t_center, cfg.window)
    else:
        g = time_map(s, t_center, cfg.tau)
    return resize_grid(g, cfg.out_h, cfg.out_w)
