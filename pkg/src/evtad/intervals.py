"""Time intervals, scored proposals/detections, tIoU and interval NMS.

Intervals are in seconds. All ranking in the package (NMS, top-N selection,
AP) uses :func:`rank_key`: score descending, then longer duration, then
earlier start, then provenance text.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np


@dataclass(frozen=True, order=True)
class Interval:
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"interval end {self.t_end} must exceed start {self.t_start}")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Proposal:
    interval: Interval
    score: float
    provenance: str = ""

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"proposal score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class Detection:
    roi_id: str
    interval: Interval
    score: float
    label: str = "ED"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")

    @property
    def provenance(self) -> str:
        return f"{self.roi_id}/{self.label}"


def tiou_scalar(s1: float, e1: float, s2: float, e2: float) -> float:
    inter = min(e1, e2) - max(s1, s2)
    if inter <= 0.0:
        return 0.0
    return inter / ((e1 - s1) + (e2 - s2) - inter)


def tiou(a: Interval, b: Interval) -> float:
    """Temporal intersection over union of two intervals."""
    return tiou_scalar(a.t_start, a.t_end, b.t_start, b.t_end)


def tiou_matrix(starts_a, ends_a, starts_b, ends_b) -> np.ndarray:
    """Pairwise tIoU, shape (len(a), len(b))."""
    sa = np.asarray(starts_a, dtype=float)[:, None]
    ea = np.asarray(ends_a, dtype=float)[:, None]
    sb = np.asarray(starts_b, dtype=float)[None, :]
    eb = np.asarray(ends_b, dtype=float)[None, :]
    inter = np.minimum(ea, eb) - np.maximum(sa, sb)
    pos = inter > 0
    inter = np.where(pos, inter, 0.0)
    union = (ea - sa) + (eb - sb) - inter
    return np.where(pos, inter / np.where(pos, union, 1.0), 0.0)


def rank_key(item) -> tuple:
    iv = item.interval
    return (-item.score, -(iv.t_end - iv.t_start), iv.t_start, getattr(item, "provenance", ""))


T = TypeVar("T", Proposal, Detection)


def rank(items: Sequence[T]) -> list[T]:
    return sorted(items, key=rank_key)


def interval_nms(items: Sequence[T], thr: float) -> list[T]:
    """Greedy temporal non-maximum suppression.

    Items are visited in :func:`rank_key` order; one is kept iff its tIoU
    with every already kept item is below ``thr``. Output is in rank order.
    """
    if not 0.0 < thr <= 1.0:
        raise ValueError(f"NMS threshold must lie in (0, 1], got {thr}")
    kept: list[T] = []
    # kept intervals indexed by start so only plausible suppressors are checked
    k_starts: list[float] = []
    k_ends: list[float] = []
    for item in rank(items):
        s, e = item.interval.t_start, item.interval.t_end
        # tIoU >= thr forces the other length into [thr*d, d/thr] and overlap > 0
        lo = bisect.bisect_left(k_starts, s - (e - s) / thr)
        hi = bisect.bisect_left(k_starts, e)
        suppressed = False
        for j in range(lo, hi):
            if tiou_scalar(s, e, k_starts[j], k_ends[j]) >= thr:
                suppressed = True
                break
        if suppressed:
            continue
        kept.append(item)
        pos = bisect.bisect_right(k_starts, s)
        k_starts.insert(pos, s)
        k_ends.insert(pos, e)
    return kept
