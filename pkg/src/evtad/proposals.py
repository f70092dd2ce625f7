"""Proposal generation on the actioness signal.

``retag`` floods the robustly normalized event rate at a grid of water
levels, merges nearby runs at a grid of merge ratios and collapses the union
of all cells with NMS. ``event_tag``, ``watershed_proposals`` and
``sliding_window`` are the comparison baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from evtad.intervals import Interval, Proposal, interval_nms
from evtad.rate import RateSeries, robust_normalize

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))
RANKINGS = ("contrast", "mean")


@dataclass(frozen=True)
class ProposalConfig:
    lambda_grid: tuple[float, ...] = DEFAULT_GRID
    mu_grid: tuple[float, ...] = DEFAULT_GRID
    nms_tiou: float = 0.95
    min_duration: float = 2.0
    # "contrast": mean minus the brighter flank of width duration * context;
    # "mean": plain mean normalized rate
    ranking: str = "contrast"
    context: float = 1.0 / 3.0

    def __post_init__(self):
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        object.__setattr__(self, "mu_grid", tuple(float(v) for v in self.mu_grid))
        for v in self.lambda_grid + self.mu_grid:
            if not 0 < v < 1:
                raise ValueError(f"threshold {v} outside (0, 1)")
        if not 0 < self.nms_tiou <= 1:
            raise ValueError("nms_tiou must lie in (0, 1]")
        if self.min_duration < 0:
            raise ValueError("min_duration must be non-negative")
        if self.ranking not in RANKINGS:
            raise ValueError(f"ranking must be one of {RANKINGS}")
        if self.context <= 0:
            raise ValueError("context must be positive")


def watershed_runs(values: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Start (inclusive) and end (exclusive) bin indices of maximal runs above ``lam``."""
    above = np.asarray(values) > lam
    edges = np.diff(np.concatenate(([0], above.view(np.int8), [0])))
    return np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)


def _bins_to_interval(r: RateSeries, s: int, e: int) -> Interval:
    return Interval(r.t0_s + s * r.bin_width, r.t0_s + e * r.bin_width)


def watershed_intervals(r: RateSeries, lam: float) -> list[Interval]:
    """Maximal runs of bins with value above ``lam`` as time intervals."""
    starts, ends = watershed_runs(r.values, lam)
    return [_bins_to_interval(r, s, e) for s, e in zip(starts.tolist(), ends.tolist())]


def _merge_runs(starts: Sequence, ends: Sequence, mu: float) -> list[tuple]:
    out = []
    if not len(starts):
        return out
    g_start, g_end = starts[0], ends[0]
    covered = ends[0] - starts[0]
    for s, e in zip(starts[1:], ends[1:]):
        total = covered + (e - s)
        if total >= mu * (e - g_start):
            g_end = e
            covered = total
        else:
            out.append((g_start, g_end))
            g_start, g_end, covered = s, e, e - s
    out.append((g_start, g_end))
    return out


def merge_intervals(intervals: Sequence[Interval], mu: float) -> list[Interval]:
    """Greedy left-to-right merge of sorted, disjoint intervals.

    The next interval joins the current group when the summed member
    durations (including it) cover at least ``mu`` of the span from the
    group start to its end.
    """
    merged = _merge_runs([i.t_start for i in intervals], [i.t_end for i in intervals], mu)
    return [Interval(s, e) for s, e in merged]


def _overlap_weights(r: RateSeries, i: Interval) -> tuple[np.ndarray, np.ndarray]:
    n = len(r)
    a = (i.t_start - r.t0_s) / r.bin_width
    b = (i.t_end - r.t0_s) / r.bin_width
    tol = 1e-6
    if a < -tol or b > n + tol:
        raise ValueError(
            f"interval ({i.t_start}, {i.t_end}) outside series extent ({r.t0_s}, {r.t_stop_s})"
        )
    a, b = max(a, 0.0), min(b, float(n))
    k = np.arange(int(math.floor(a)), min(int(math.ceil(b)), n))
    w = np.minimum(b, k + 1) - np.maximum(a, k)
    keep = w > 0
    return k[keep], w[keep]


def score_proposal(r: RateSeries, i: Interval) -> float:
    """Overlap-weighted mean of the normalized rate over ``i``."""
    if not r.normalized:
        raise ValueError("score_proposal expects a normalized series")
    k, w = _overlap_weights(r, i)
    if not len(k):
        return 0.0
    return float(min(1.0, max(0.0, np.dot(w, r.values[k]) / w.sum())))


def _prefix(values: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(values, dtype=np.float64)))


def bin_scores(
    values: np.ndarray, spans: Sequence[tuple[int, int]], ranking: str = "contrast", context: float = 1.0 / 3.0
) -> np.ndarray:
    """Ranking scores for bin spans ``[s, e)`` of a normalized signal.

    ``contrast`` subtracts the larger of the two flank means from the span
    mean; flanks are ``context`` times the span length, cut at the series
    ends, and a missing flank counts as zero. A span that is brighter than
    its surroundings outranks a fragment of a longer bright stretch.
    """
    if ranking not in RANKINGS:
        raise ValueError(f"ranking must be one of {RANKINGS}")
    csum = _prefix(values)
    n = len(values)
    if not len(spans):
        return np.zeros(0)
    s, e = (np.asarray(a, dtype=np.int64) for a in zip(*spans))
    score = (csum[e] - csum[s]) / (e - s)
    if ranking == "contrast":
        c = np.maximum(1, np.round((e - s) * context).astype(np.int64))
        lo = np.maximum(0, s - c)
        hi = np.minimum(n, e + c)
        with np.errstate(invalid="ignore", divide="ignore"):
            left = np.where(s > lo, (csum[s] - csum[lo]) / (s - lo), 0.0)
            right = np.where(hi > e, (csum[hi] - csum[e]) / (hi - e), 0.0)
        score = score - np.maximum(left, right)
    return np.clip(score, 0.0, 1.0)


def _tag(r: RateSeries, cfg: ProposalConfig, tag: str) -> list[Proposal]:
    v = r.values
    min_bins = cfg.min_duration / r.bin_width
    cells: dict[tuple[int, int], str] = {}
    for lam in cfg.lambda_grid:
        starts, ends = watershed_runs(v, lam)
        if not len(starts):
            continue
        starts, ends = starts.tolist(), ends.tolist()
        for mu in cfg.mu_grid:
            for s, e in _merge_runs(starts, ends, mu):
                # tolerance guards float error of min_duration / bin_width
                if e - s >= min_bins - 1e-9 and (s, e) not in cells:
                    cells[(s, e)] = f"{tag}(lambda={lam:.2f},mu={mu:.2f})"
    if not cells:
        return []
    spans = list(cells)
    scores = bin_scores(v, spans, cfg.ranking, cfg.context)
    props = [
        Proposal(_bins_to_interval(r, s, e), float(sc), cells[(s, e)])
        for (s, e), sc in zip(spans, scores.tolist())
    ]
    return interval_nms(props, cfg.nms_tiou)


def retag(r: RateSeries, cfg: ProposalConfig = ProposalConfig()) -> list[Proposal]:
    """Robust event-rate temporal actioness grouping.

    Every (lambda, mu) cell floods ``r`` at lambda, merges the runs at mu and
    drops spans shorter than ``cfg.min_duration``. The union over cells is
    scored with ``bin_scores`` under ``cfg.ranking`` and reduced by NMS at
    ``cfg.nms_tiou``. Identical spans from several cells are kept once,
    tagged with the first cell in grid order.
    """
    if not r.normalized:
        raise ValueError("retag expects a robustly normalized series")
    return _tag(r, cfg, "retag")


def event_tag(r: RateSeries, cfg: ProposalConfig = ProposalConfig()) -> list[Proposal]:
    """Non-robust TAG baseline: min/max normalization (p = 0), then the same grouping."""
    if r.normalized:
        raise ValueError("event_tag normalizes the raw rate itself")
    return _tag(robust_normalize(r, 0.0), cfg, "etag")


def watershed_proposals(
    r: RateSeries, lam: float = 0.2, min_duration: float = 2.0, ranking: str = "contrast"
) -> list[Proposal]:
    """Single-threshold flooding without merging."""
    if not r.normalized:
        raise ValueError("watershed_proposals expects a normalized series")
    starts, ends = watershed_runs(r.values, lam)
    spans = [
        (s, e)
        for s, e in zip(starts.tolist(), ends.tolist())
        if (e - s) * r.bin_width >= min_duration - 1e-9
    ]
    scores = bin_scores(r.values, spans, ranking)
    prov = f"watershed(lambda={lam:.2f})"
    return [Proposal(_bins_to_interval(r, s, e), float(sc), prov) for (s, e), sc in zip(spans, scores.tolist())]


def window_widths(n_widths: int, w_min: float, w_max: float) -> np.ndarray:
    k = np.arange(n_widths)
    return w_min * (w_max / w_min) ** (k / (n_widths - 1))


def sliding_window(
    t_begin: float,
    t_end: float,
    n_widths: int = 30,
    w_min: float = 2.0,
    w_max: float = 40.0,
    stride: float = 0.1,
) -> list[Proposal]:
    """Dense windows of geometrically spaced widths; every score is 0.5."""
    if not w_min < w_max:
        raise ValueError("w_min must be below w_max")
    if n_widths < 2:
        raise ValueError("n_widths must be at least 2")
    if stride <= 0:
        raise ValueError("stride must be positive")
    out = []
    for w in window_widths(n_widths, w_min, w_max).tolist():
        n_starts = math.floor((t_end - t_begin - w) / stride + 1e-9) + 1
        prov = f"sliding(width={w:.3f})"
        for k in range(max(0, n_starts)):
            s = t_begin + k * stride
            out.append(Proposal(Interval(s, s + w), 0.5, prov))
    return out
