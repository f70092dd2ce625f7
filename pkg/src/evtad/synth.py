"""Seeded synthetic event scenes with scripted high-rate actions.

Background pixels fire as independent homogeneous Poisson processes. During
an action, pixels of its ROI fire additionally at ``background_rate *
multiplier`` on average, either uniformly or concentrated in a Gaussian blob
that swings horizontally (a wing-flap stand-in). Every component draws from
its own Philox stream spawned from the scene seed, so adding an action never
changes the background events.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from evtad.annotations import AnnotationSet, Instance
from evtad.events import BoundingBox, EventStream
from evtad.intervals import Interval

PATTERNS = ("uniform", "oscillating-blob")


@dataclass(frozen=True)
class ActionSpec:
    roi_id: str
    t_start: float
    t_end: float
    multiplier: float = 10.0
    pattern: str = "oscillating-blob"
    frequency: float = 2.0
    # slow amplitude modulation of the burst rate, 0 disables it
    modulation_depth: float = 0.0
    modulation_freq: float = 0.5

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if not self.t_end > self.t_start:
            raise ValueError("action must have positive duration")
        if self.multiplier <= 1:
            raise ValueError("burst multiplier must exceed 1")
        if not 0 <= self.modulation_depth <= 1:
            raise ValueError("modulation_depth must lie in [0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    width: int
    height: int
    duration: float
    rois: tuple[BoundingBox, ...]
    background_rate: float = 0.05
    actions: tuple[ActionSpec, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rois", tuple(self.rois))
        object.__setattr__(self, "actions", tuple(self.actions))
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.background_rate < 0:
            raise ValueError("background_rate must be non-negative")
        ids = {b.roi_id for b in self.rois}
        for b in self.rois:
            if not b.fits(self.width, self.height):
                raise ValueError(f"roi {b.roi_id!r} exceeds the sensor")
        spans: dict[str, list[tuple[float, float]]] = {}
        for a in self.actions:
            if a.roi_id not in ids:
                raise ValueError(f"action references unknown roi {a.roi_id!r}")
            if a.t_start < 0 or a.t_end > self.duration:
                raise ValueError("action interval must lie within the scene duration")
            spans.setdefault(a.roi_id, []).append((a.t_start, a.t_end))
        for roi, ss in spans.items():
            ss.sort()
            for (_, e1), (s2, _) in zip(ss, ss[1:]):
                if s2 < e1:
                    raise ValueError(f"overlapping actions in roi {roi!r}")

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "duration": self.duration,
            "background_rate": self.background_rate,
            "seed": self.seed,
            "rois": [{"id": b.roi_id, "x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in self.rois],
            "actions": [asdict(a) for a in self.actions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        rois = tuple(BoundingBox(str(r["id"]), int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"])) for r in d["rois"])
        actions = tuple(ActionSpec(**a) for a in d.get("actions", []))
        return cls(
            int(d["width"]),
            int(d["height"]),
            float(d["duration"]),
            rois,
            float(d.get("background_rate", 0.05)),
            actions,
            int(d.get("seed", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _rng(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seq))


def _background(cfg: SceneConfig, rng: np.random.Generator):
    dur_us = int(round(cfg.duration * 1e6))
    npix = cfg.width * cfg.height
    counts = rng.poisson(cfg.background_rate * cfg.duration, size=npix)
    pix = np.repeat(np.arange(npix, dtype=np.int64), counts)
    t = rng.integers(0, dur_us, size=len(pix))
    return t, (pix % cfg.width), (pix // cfg.width), rng.integers(0, 2, size=len(pix))


def _action_events(cfg: SceneConfig, a: ActionSpec, box: BoundingBox, rng: np.random.Generator):
    rate = cfg.background_rate * a.multiplier * box.w * box.h
    dur = a.t_end - a.t_start
    peak = 1.0 + a.modulation_depth
    n = rng.poisson(rate * dur * peak)
    t_rel = rng.uniform(0.0, dur, size=n)
    if a.modulation_depth > 0:
        gain = 1.0 + a.modulation_depth * np.cos(2 * np.pi * a.modulation_freq * t_rel)
        t_rel = t_rel[rng.uniform(0.0, peak, size=n) < gain]
        n = len(t_rel)
    if a.pattern == "uniform":
        x = box.x + rng.integers(0, box.w, size=n)
        y = box.y + rng.integers(0, box.h, size=n)
    else:
        amp = box.w / 4.0
        sigma = max(min(box.w, box.h) / 6.0, 0.5)
        cx = box.x + box.w / 2.0 + amp * np.sin(2 * np.pi * a.frequency * t_rel)
        cy = box.y + box.h / 2.0
        x = np.empty(n, dtype=np.int64)
        y = np.empty(n, dtype=np.int64)
        todo = np.arange(n)
        while len(todo):
            xs = np.floor(rng.normal(cx[todo], sigma)).astype(np.int64)
            ys = np.floor(rng.normal(cy, sigma, size=len(todo))).astype(np.int64)
            ok = (xs >= box.x) & (xs < box.x + box.w) & (ys >= box.y) & (ys < box.y + box.h)
            x[todo[ok]] = xs[ok]
            y[todo[ok]] = ys[ok]
            todo = todo[~ok]
    t_us = np.floor((a.t_start + t_rel) * 1e6).astype(np.int64)
    return t_us, x, y, rng.integers(0, 2, size=n)


def _merge(parts, width: int, height: int, t_begin: int, t_end: int) -> EventStream:
    cols = [np.concatenate([np.asarray(p[i], dtype=np.int64) for p in parts]) for i in range(4)]
    order = np.argsort(cols[0], kind="stable")
    return EventStream.from_arrays(*(c[order] for c in cols), width, height, t_begin, t_end)


def generate_scene(cfg: SceneConfig) -> tuple[EventStream, AnnotationSet]:
    """Events and exact ground truth (label "ED") for a scene; deterministic per ``cfg.seed``."""
    seqs = np.random.SeedSequence(cfg.seed).spawn(1 + len(cfg.actions))
    parts = [_background(cfg, _rng(seqs[0]))]
    boxes = {b.roi_id: b for b in cfg.rois}
    for a, seq in zip(cfg.actions, seqs[1:]):
        parts.append(_action_events(cfg, a, boxes[a.roi_id], _rng(seq)))
    dur_us = int(round(cfg.duration * 1e6))
    stream = _merge(parts, cfg.width, cfg.height, 0, dur_us)
    instances = tuple(
        Instance(a.roi_id, Interval(a.t_start, a.t_end), "ED")
        for a in sorted(cfg.actions, key=lambda a: (a.roi_id, a.t_start))
    )
    return stream, AnnotationSet(cfg.rois, instances)


def add_hot_pixels(s: EventStream, n: int, rate: float, seed: int = 0) -> EventStream:
    """Superimpose ``n`` distinct pixels firing as Poisson processes at ``rate`` ev/s."""
    if n <= 0:
        return s
    npix = s.width * s.height
    if n > npix:
        raise ValueError("more hot pixels than sensor pixels")
    rng = _rng(np.random.SeedSequence([seed, 0x407]))
    chosen = np.sort(rng.choice(npix, size=n, replace=False))
    counts = rng.poisson(rate * s.duration_s, size=n)
    pix = np.repeat(chosen, counts)
    t = rng.integers(s.t_begin, s.t_end + 1, size=len(pix))
    extra = (t, pix % s.width, pix // s.width, rng.integers(0, 2, size=len(pix)))
    return _merge([(s.t, s.x, s.y, s.p), extra], s.width, s.height, s.t_begin, s.t_end)


def add_rate_spikes(
    s: EventStream,
    box: BoundingBox,
    n_spikes: int,
    events_per_spike: int,
    seed: int = 0,
    spike_width: float = 0.02,
) -> EventStream:
    """Inject short, dense event bursts (flash-like outliers) at random times inside ``box``."""
    rng = _rng(np.random.SeedSequence([seed, 0x5E1]))
    parts = [(s.t, s.x, s.y, s.p)]
    width_us = int(spike_width * 1e6)
    for _ in range(n_spikes):
        t0 = int(rng.integers(s.t_begin, max(s.t_begin + 1, s.t_end - width_us)))
        t = t0 + rng.integers(0, width_us, size=events_per_spike)
        x = box.x + rng.integers(0, box.w, size=events_per_spike)
        y = box.y + rng.integers(0, box.h, size=events_per_spike)
        parts.append((t, x, y, rng.integers(0, 2, size=events_per_spike)))
    return _merge(parts, s.width, s.height, s.t_begin, s.t_end)


def layout_rois(n: int, roi_size: int, margin: int = 4) -> tuple[int, int, list[BoundingBox]]:
    """Place ``n`` square ROIs on a row-major grid; returns (width, height, boxes)."""
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    step = roi_size + margin
    boxes = [
        BoundingBox(f"roi{k}", margin + (k % cols) * step, margin + (k // cols) * step, roi_size, roi_size)
        for k in range(n)
    ]
    return margin + cols * step, margin + rows * step, boxes


def random_scene(
    seed: int,
    n_rois: int = 5,
    bursts: tuple[int, int] = (3, 8),
    burst_duration: tuple[float, float] = (3.0, 12.0),
    gap: tuple[float, float] = (6.0, 20.0),
    multiplier: tuple[float, float] = (8.0, 12.0),
    background_rate: float = 0.05,
    roi_size: int = 24,
    pattern: str = "oscillating-blob",
    modulation_depth: float = 0.0,
) -> SceneConfig:
    """Random multi-ROI scene: per ROI a sequence of bursts separated by quiet gaps.

    The scene duration is the longest ROI timeline plus a final gap.
    """
    rng = _rng(np.random.SeedSequence([seed, 0x5CE]))
    width, height, boxes = layout_rois(n_rois, roi_size)
    actions: list[ActionSpec] = []
    horizon = 0.0
    for b in boxes:
        t = float(rng.uniform(*gap))
        for _ in range(int(rng.integers(bursts[0], bursts[1] + 1))):
            d = float(rng.uniform(*burst_duration))
            actions.append(
                ActionSpec(
                    b.roi_id,
                    round(t, 3),
                    round(t + d, 3),
                    float(rng.uniform(*multiplier)),
                    pattern,
                    float(rng.uniform(1.0, 4.0)),
                    modulation_depth,
                    float(rng.uniform(0.3, 0.8)),
                )
            )
            t += d + float(rng.uniform(*gap))
        horizon = max(horizon, t)
    return SceneConfig(width, height, round(horizon, 3), tuple(boxes), background_rate, tuple(actions), seed)


def contaminate(
    s: EventStream,
    cfg: SceneConfig,
    n_spikes: int = 2,
    spike_factor: float = 40.0,
    bin_width: float = 0.033,
    seed: int = 0,
) -> EventStream:
    """Add ``n_spikes`` flash-like spikes to every ROI of a generated scene.

    Each spike carries ``spike_factor`` times the events an average action
    puts into one ``bin_width`` bin of that ROI.
    """
    for k, box in enumerate(cfg.rois):
        mults = [a.multiplier for a in cfg.actions if a.roi_id == box.roi_id] or [10.0]
        per_bin = cfg.background_rate * float(np.mean(mults)) * box.w * box.h * bin_width
        n = int(round(spike_factor * per_bin))
        s = add_rate_spikes(s, box, n_spikes, n, seed=seed * 1009 + k, spike_width=min(0.02, bin_width))
    return s
