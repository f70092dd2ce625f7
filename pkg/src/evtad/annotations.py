"""JSON documents: ROI/ground-truth annotations, detections and proposals.

Times are integer microseconds on disk and float seconds in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from evtad.errors import FormatError
from evtad.events import BoundingBox
from evtad.intervals import Detection, Interval, Proposal


@dataclass(frozen=True)
class Instance:
    roi_id: str
    interval: Interval
    label: str = "ED"


@dataclass(frozen=True)
class AnnotationSet:
    rois: tuple[BoundingBox, ...] = ()
    instances: tuple[Instance, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "rois", tuple(self.rois))
        object.__setattr__(self, "instances", tuple(self.instances))
        ids = [b.roi_id for b in self.rois]
        if len(set(ids)) != len(ids):
            raise FormatError("duplicate roi id in annotation set")
        known = set(ids)
        per_roi: dict[str, list[Interval]] = {}
        for inst in self.instances:
            if inst.roi_id not in known:
                raise FormatError(f"instance references unknown roi id {inst.roi_id!r}")
            per_roi.setdefault(inst.roi_id, []).append(inst.interval)
        for roi, ivs in per_roi.items():
            ivs = sorted(ivs)
            for a, b in zip(ivs, ivs[1:]):
                if b.t_start < a.t_end:
                    raise FormatError(f"overlapping instances in roi {roi!r}")

    def roi(self, roi_id: str) -> BoundingBox:
        for b in self.rois:
            if b.roi_id == roi_id:
                return b
        raise KeyError(roi_id)

    def intervals(self, roi_id: str) -> list[Interval]:
        return sorted(i.interval for i in self.instances if i.roi_id == roi_id)

    def by_roi(self) -> dict[str, list[Interval]]:
        return {b.roi_id: self.intervals(b.roi_id) for b in self.rois}


def _us(seconds: float) -> int:
    return int(round(seconds * 1e6))


def _interval_from(obj: dict, where: str) -> Interval:
    try:
        a, b = int(obj["t_start_us"]), int(obj["t_end_us"])
    except (KeyError, TypeError, ValueError):
        raise FormatError(f"{where}: needs integer t_start_us and t_end_us") from None
    if b <= a:
        raise FormatError(f"{where}: t_end_us ({b}) must exceed t_start_us ({a})")
    return Interval(a / 1e6, b / 1e6)


def _load(source) -> object:
    text = source if isinstance(source, str) else source.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None


def parse_annotations(source) -> AnnotationSet:
    """Parse ``{"rois": [{id, x, y, w, h}], "instances": [{roi_id, t_start_us, t_end_us, label}]}``."""
    doc = _load(source)
    if not isinstance(doc, dict) or "rois" not in doc:
        raise FormatError("annotation document needs a top-level 'rois' array")
    rois = []
    for k, r in enumerate(doc["rois"]):
        try:
            rois.append(BoundingBox(str(r["id"]), int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"])))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"rois[{k}]: missing or invalid field {exc}") from None
        except ValueError as exc:
            raise FormatError(f"rois[{k}]: {exc}") from None
    instances = []
    for k, obj in enumerate(doc.get("instances", [])):
        if not isinstance(obj, dict) or "roi_id" not in obj:
            raise FormatError(f"instances[{k}]: needs roi_id")
        instances.append(Instance(str(obj["roi_id"]), _interval_from(obj, f"instances[{k}]"), str(obj.get("label", "ED"))))
    return AnnotationSet(tuple(rois), tuple(instances))


def write_annotations(a: AnnotationSet) -> str:
    doc = {
        "rois": [{"id": b.roi_id, "x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in a.rois],
        "instances": [
            {
                "roi_id": i.roi_id,
                "t_start_us": _us(i.interval.t_start),
                "t_end_us": _us(i.interval.t_end),
                "label": i.label,
            }
            for i in a.instances
        ],
    }
    return json.dumps(doc, indent=1)


def write_detections(dets: Sequence[Detection]) -> str:
    """JSON array of ``{roi_id, t_start_us, t_end_us, score, label}``."""
    return json.dumps(
        [
            {
                "roi_id": d.roi_id,
                "t_start_us": _us(d.interval.t_start),
                "t_end_us": _us(d.interval.t_end),
                "score": d.score,
                "label": d.label,
            }
            for d in dets
        ],
        indent=1,
    )


def parse_detections(source) -> list[Detection]:
    doc = _load(source)
    if not isinstance(doc, list):
        raise FormatError("detection document must be a JSON array")
    out = []
    for k, obj in enumerate(doc):
        if not isinstance(obj, dict) or "roi_id" not in obj or "score" not in obj:
            raise FormatError(f"detections[{k}]: needs roi_id and score")
        try:
            out.append(
                Detection(str(obj["roi_id"]), _interval_from(obj, f"detections[{k}]"), float(obj["score"]), str(obj.get("label", "ED")))
            )
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"detections[{k}]: {exc}") from None
    return out


def write_proposals(props: dict[str, Sequence[Proposal]]) -> str:
    """Proposals per ROI in the detection schema without ``label`` (plus ``provenance``)."""
    rows = []
    for roi_id, ps in props.items():
        for p in ps:
            rows.append(
                {
                    "roi_id": roi_id,
                    "t_start_us": _us(p.interval.t_start),
                    "t_end_us": _us(p.interval.t_end),
                    "score": p.score,
                    "provenance": p.provenance,
                }
            )
    return json.dumps(rows, indent=1)


def parse_proposals(source) -> dict[str, list[Proposal]]:
    doc = _load(source)
    if not isinstance(doc, list):
        raise FormatError("proposal document must be a JSON array")
    out: dict[str, list[Proposal]] = {}
    for k, obj in enumerate(doc):
        if not isinstance(obj, dict) or "roi_id" not in obj or "score" not in obj:
            raise FormatError(f"proposals[{k}]: needs roi_id and score")
        p = Proposal(_interval_from(obj, f"proposals[{k}]"), float(obj["score"]), str(obj.get("provenance", "")))
        out.setdefault(str(obj["roi_id"]), []).append(p)
    return out


def read_text(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")
