"""Bottom-up baseline: classify fixed-stride snapshots, close gaps, extract runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from evtad.atsn import encode_snapshot
from evtad.events import EventStream
from evtad.intervals import Detection, Interval
from evtad.model import Model
from evtad.represent import Grid, RepresentConfig, event_histogram, resize_grid


@dataclass(frozen=True, eq=False)
class BinarySeries:
    values: np.ndarray
    stride: float
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values).astype(np.int8)
        if np.any((v != 0) & (v != 1)):
            raise ValueError("binary series values must be 0 or 1")
        if self.stride <= 0:
            raise ValueError("stride must be positive")
        object.__setattr__(self, "values", v)


def snapshot_times(s: EventStream, stride: float) -> np.ndarray:
    t0 = s.t_begin / 1e6
    n = math.floor(s.duration_s / stride + 1e-9) + 1
    return t0 + np.arange(n) * stride


def snapshot_series(s: EventStream, window: float, stride: float) -> list[Grid]:
    """Histograms centered at ``t_begin + k * stride`` up to and including the stream end."""
    if stride <= 0:
        raise ValueError("stride must be positive")
    return [event_histogram(s, float(t), window) for t in snapshot_times(s, stride)]


def morphological_close(b: BinarySeries, kernel: int) -> BinarySeries:
    """Dilation then erosion with a centered window of ``kernel`` samples.

    Out-of-range samples are neutral for both steps (the window is truncated
    at the borders), so runs touching the ends are not eroded.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("kernel must be an odd positive count")
    dil = maximum_filter1d(b.values, kernel, mode="constant", cval=0)
    closed = minimum_filter1d(dil, kernel, mode="constant", cval=1)
    return BinarySeries(closed, b.stride, b.t0)


def extract_regions(b: BinarySeries, roi_id: str = "roi", label: str = "ED") -> list[Detection]:
    """Maximal runs of ones as detections with score 1.0."""
    edges = np.diff(np.concatenate(([0], b.values.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [
        Detection(roi_id, Interval(b.t0 + s * b.stride, b.t0 + e * b.stride), 1.0, label)
        for s, e in zip(starts.tolist(), ends.tolist())
    ]


def regions_to_series(dets: Sequence[Detection], n: int, stride: float, t0: float = 0.0) -> BinarySeries:
    v = np.zeros(n, dtype=np.int8)
    for d in dets:
        s = round((d.interval.t_start - t0) / stride)
        e = round((d.interval.t_end - t0) / stride)
        v[s:e] = 1
    return BinarySeries(v, stride, t0)


def snapshot_features(
    s: EventStream,
    window: float,
    stride: float,
    rep: RepresentConfig = RepresentConfig(),
    blocks: int = 4,
) -> np.ndarray:
    grids = snapshot_series(s, window, stride)
    return np.stack([encode_snapshot(resize_grid(g, rep.out_h, rep.out_w), blocks) for g in grids])


def snapshot_labels(times: np.ndarray, gt: Sequence[Interval]) -> np.ndarray:
    y = np.zeros(len(times), dtype=int)
    for g in gt:
        y[(times >= g.t_start) & (times < g.t_end)] = 1
    return y


def bottomup_detect(
    s: EventStream,
    model: Model,
    window: float = 5.0,
    stride: float = 0.033,
    kernel: int | None = 15,
    roi_id: str = "roi",
    rep: RepresentConfig = RepresentConfig(),
    blocks: int = 4,
    threshold: float = 0.5,
) -> list[Detection]:
    """Per-snapshot classification, optional closing (``kernel=None`` skips it), run extraction."""
    X = snapshot_features(s, window, stride, rep, blocks)
    positive = (model.predict_proba(X) >= threshold).astype(np.int8)
    b = BinarySeries(positive, stride, s.t_begin / 1e6)
    if kernel is not None:
        b = morphological_close(b, kernel)
    return extract_regions(b, roi_id)
