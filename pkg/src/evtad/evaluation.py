"""Matching-based evaluation: average recall at top-N and average precision at tIoU thresholds.

Inputs are mappings from a group key (ROI id, or (recording, ROI id)) to the
scored items and ground-truth intervals of that group. Items only ever match
ground truth of their own group.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from evtad.intervals import Interval, rank, rank_key, tiou_scalar


@dataclass(frozen=True)
class EvalConfig:
    tiou_thresholds: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7)
    top_n: tuple[int, ...] = (20, 30, 50)

    def __post_init__(self):
        object.__setattr__(self, "tiou_thresholds", tuple(float(t) for t in self.tiou_thresholds))
        object.__setattr__(self, "top_n", tuple(int(n) for n in self.top_n))
        if any(not 0 < t <= 1 for t in self.tiou_thresholds):
            raise ValueError("tIoU thresholds must lie in (0, 1]")
        if any(n < 1 for n in self.top_n):
            raise ValueError("top_n values must be positive")


def group_by_roi(items: Iterable, recording: str | None = None) -> dict:
    """Group detections by ``roi_id`` (or by ``(recording, roi_id)``)."""
    out: dict = defaultdict(list)
    for d in items:
        out[d.roi_id if recording is None else (recording, d.roi_id)].append(d)
    return dict(out)


def _total_gt(gt: Mapping[Hashable, Sequence[Interval]]) -> int:
    return sum(len(v) for v in gt.values())


def recall_at(
    proposals: Mapping[Hashable, Sequence],
    gt: Mapping[Hashable, Sequence[Interval]],
    top_n: int,
    thresholds: Sequence[float],
) -> dict[float, float]:
    """Pooled recall per threshold using the ``top_n`` best-ranked proposals of each group."""
    n_gt = _total_gt(gt)
    if n_gt == 0:
        raise ValueError("recall is undefined without ground-truth instances")
    best = {}
    for key, gts in gt.items():
        kept = rank(proposals.get(key, ()))[:top_n]
        for j, g in enumerate(gts):
            best[(key, j)] = max(
                (tiou_scalar(p.interval.t_start, p.interval.t_end, g.t_start, g.t_end) for p in kept),
                default=0.0,
            )
    values = np.fromiter(best.values(), dtype=float, count=len(best))
    return {t: float(np.count_nonzero(values >= t)) / n_gt for t in thresholds}


def average_recall(
    proposals: Mapping[Hashable, Sequence],
    gt: Mapping[Hashable, Sequence[Interval]],
    cfg: EvalConfig = EvalConfig(),
) -> dict[int, float]:
    """AR per top-N: recall pooled over groups, then averaged over the tIoU thresholds."""
    out = {}
    for n in cfg.top_n:
        rec = recall_at(proposals, gt, n, cfg.tiou_thresholds)
        out[n] = float(np.mean([rec[t] for t in cfg.tiou_thresholds]))
    return out


def match_detections(
    detections: Mapping[Hashable, Sequence],
    gt: Mapping[Hashable, Sequence[Interval]],
    t: float,
) -> np.ndarray:
    """True-positive flags of all detections in global rank order.

    A detection takes the unmatched ground truth of its group with the
    highest tIoU (ties: earlier start, then listing order) if that tIoU is at
    least ``t``.
    """
    pooled = [(rank_key(d), str(key), key, d) for key, ds in detections.items() for d in ds]
    pooled.sort(key=lambda row: (row[0], row[1]))
    used = {key: np.zeros(len(g), dtype=bool) for key, g in gt.items()}
    tp = np.zeros(len(pooled), dtype=bool)
    for i, (_, _, key, d) in enumerate(pooled):
        gts = gt.get(key, ())
        best_j, best_iou = -1, -1.0
        for j, g in enumerate(gts):
            if used[key][j]:
                continue
            iou = tiou_scalar(d.interval.t_start, d.interval.t_end, g.t_start, g.t_end)
            if iou < t:
                continue
            if iou > best_iou or (iou == best_iou and g.t_start < gts[best_j].t_start):
                best_j, best_iou = j, iou
        if best_j >= 0:
            used[key][best_j] = True
            tp[i] = True
    return tp


def ap_at_tiou(
    detections: Mapping[Hashable, Sequence],
    gt: Mapping[Hashable, Sequence[Interval]],
    t: float,
    interpolated: bool = False,
) -> float:
    """Average precision at matching threshold ``t``.

    Default is the non-interpolated area under the precision-recall curve:
    the sum of precision at each true-positive rank divided by the number of
    ground-truth instances. ``interpolated=True`` uses the monotone precision
    envelope instead.
    """
    n_gt = _total_gt(gt)
    if n_gt == 0:
        raise ValueError("average precision is undefined without ground-truth instances")
    tp = match_detections(detections, gt, t)
    if not tp.any():
        return 0.0
    precision = np.cumsum(tp) / np.arange(1, len(tp) + 1)
    if interpolated:
        precision = np.maximum.accumulate(precision[::-1])[::-1]
    return float(precision[tp].sum() / n_gt)


def mean_ap(
    detections: Mapping[Hashable, Sequence],
    gt: Mapping[Hashable, Sequence[Interval]],
    cfg: EvalConfig = EvalConfig(),
    interpolated: bool = False,
) -> dict:
    """AP per threshold plus their unweighted mean under key ``"average"``."""
    table: dict = {t: ap_at_tiou(detections, gt, t, interpolated) for t in cfg.tiou_thresholds}
    table["average"] = float(np.mean([table[t] for t in cfg.tiou_thresholds]))
    return table


def _roi_of(key) -> str:
    return key[-1] if isinstance(key, tuple) else key


def per_roi_report(
    detections: Mapping[Hashable, Sequence],
    gt: Mapping[Hashable, Sequence[Interval]],
    cfg: EvalConfig = EvalConfig(),
) -> list[dict]:
    """One row per ROI: instance count and AP per threshold.

    ROIs without ground truth get ``"n/a"`` values and are left out of the
    final ``"mean"`` row.
    """
    rois = sorted({_roi_of(k) for k in list(gt) + list(detections)})
    rows = []
    for roi in rois:
        g = {k: v for k, v in gt.items() if _roi_of(k) == roi}
        d = {k: v for k, v in detections.items() if _roi_of(k) == roi}
        n = _total_gt(g)
        row: dict = {"roi_id": roi, "n_gt": n}
        if n == 0:
            row.update({f"ap@{t:g}": "n/a" for t in cfg.tiou_thresholds})
            row["average"] = "n/a"
        else:
            table = mean_ap(d, g, cfg)
            row.update({f"ap@{t:g}": table[t] for t in cfg.tiou_thresholds})
            row["average"] = table["average"]
        rows.append(row)
    scored = [r for r in rows if r["n_gt"] > 0]
    if scored:
        mean_row: dict = {"roi_id": "mean", "n_gt": sum(r["n_gt"] for r in scored)}
        for col in [f"ap@{t:g}" for t in cfg.tiou_thresholds] + ["average"]:
            mean_row[col] = float(np.mean([r[col] for r in scored]))
        rows.append(mean_row)
    return rows


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return out.getvalue()
