"""Event streams: container type, CSV reading/writing, cleaning filters, ROI crops.

Timestamps are integer microseconds throughout this module. Streams are
immutable: every operation returns a new :class:`EventStream` whose arrays
are read-only views or fresh copies.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator, NamedTuple

import numpy as np
import pandas as pd

from evtad.errors import FormatError

CSV_HEADER = "t_us,x,y,p"
_META_RE = re.compile(r"(\w+)\s*=\s*(-?\d+)")


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned region of interest; membership is half-open on both axes."""

    roi_id: str
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box {self.roi_id!r} must have positive extent, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box {self.roi_id!r} has negative origin ({self.x}, {self.y})")

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-sorted events of one sensor (or one ROI crop).

    Attributes:
        t: int64 timestamps in microseconds, non-decreasing.
        x, y: int32 pixel coordinates.
        p: int8 polarity in {0, 1}.
        width, height: sensor extent in pixels.
        t_begin, t_end: recording extent in microseconds. Filters keep the
            extent of their input even when they remove boundary events.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    width: int
    height: int
    t_begin: int
    t_end: int

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event arrays must have equal length")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"sensor dimensions must be positive, got {self.width}x{self.height}")
        if self.t_end < self.t_begin:
            raise ValueError(f"t_end ({self.t_end}) precedes t_begin ({self.t_begin})")
        if n:
            if self.t[0] < self.t_begin or self.t[-1] > self.t_end:
                raise ValueError("events fall outside [t_begin, t_end]")
            if np.any(np.diff(self.t) < 0):
                raise ValueError("events must be sorted by timestamp; use EventStream.from_arrays")
            if self.x.min() < 0 or self.x.max() >= self.width or self.y.min() < 0 or self.y.max() >= self.height:
                raise ValueError("event coordinates outside the sensor rectangle")
            if np.any((self.p != 0) & (self.p != 1)):
                raise ValueError("polarity must be 0 or 1")

    @classmethod
    def from_arrays(
        cls,
        t,
        x,
        y,
        p,
        width: int,
        height: int,
        t_begin: int | None = None,
        t_end: int | None = None,
    ) -> "EventStream":
        """Build a validated stream, stably sorting by time when needed.

        ``t_begin``/``t_end`` default to the first/last timestamp (0 for an
        empty stream).
        """
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int32)
        y = np.asarray(y, dtype=np.int32)
        p = np.asarray(p, dtype=np.int8)
        if len(t) and np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        if t_begin is None:
            t_begin = int(t[0]) if len(t) else 0
        if t_end is None:
            t_end = int(t[-1]) if len(t) else t_begin
        return cls(
            _readonly(np.ascontiguousarray(t)),
            _readonly(np.ascontiguousarray(x)),
            _readonly(np.ascontiguousarray(y)),
            _readonly(np.ascontiguousarray(p)),
            int(width),
            int(height),
            int(t_begin),
            int(t_end),
        )

    @classmethod
    def from_events(cls, events, width: int, height: int, **extent) -> "EventStream":
        events = list(events)
        cols = np.array(events, dtype=np.int64).reshape(-1, 4)
        return cls.from_arrays(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3], width, height, **extent)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for row in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(*row)

    @property
    def duration_s(self) -> float:
        return (self.t_end - self.t_begin) / 1e6

    def select(self, mask: np.ndarray) -> "EventStream":
        """Subset of events by boolean mask; keeps extent and dimensions."""
        return EventStream(
            _readonly(self.t[mask]),
            _readonly(self.x[mask]),
            _readonly(self.y[mask]),
            _readonly(self.p[mask]),
            self.width,
            self.height,
            self.t_begin,
            self.t_end,
        )

    def time_slice(self, t0_us: float, t1_us: float) -> slice:
        """Index range of events with ``t0_us <= t < t1_us``.

        Bounds are rounded to the nearest microsecond first, so times derived
        from float seconds do not lose boundary events to representation error.
        """
        lo = np.searchsorted(self.t, round(t0_us), side="left")
        hi = np.searchsorted(self.t, round(t1_us), side="left")
        return slice(int(lo), int(hi))

    def equals(self, other: "EventStream") -> bool:
        return (
            (self.width, self.height, self.t_begin, self.t_end)
            == (other.width, other.height, other.t_begin, other.t_end)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _parse_meta(line: str) -> dict[str, int]:
    return {k: int(v) for k, v in _META_RE.findall(line)}


def _parse_lines_strict(lines: list[str], first_lineno: int, width, height):
    """Slow line-by-line parser; used to pinpoint the offending line."""
    rows = []
    for offset, raw in enumerate(lines):
        lineno = first_lineno + offset
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"expected 4 fields, got {len(parts)}: {line!r}", lineno)
        try:
            t, x, y, p = (int(v) for v in parts)
        except ValueError:
            raise FormatError(f"non-integer field in {line!r}", lineno) from None
        if t < 0:
            raise FormatError(f"negative timestamp {t}", lineno)
        if p not in (0, 1):
            raise FormatError(f"polarity must be 0 or 1, got {p}", lineno)
        if x < 0 or y < 0 or (width is not None and x >= width) or (height is not None and y >= height):
            raise FormatError(f"pixel ({x}, {y}) outside sensor {width}x{height}", lineno)
        rows.append((t, x, y, p))
    return rows


def parse_event_csv(
    source: str | IO[str],
    width: int | None = None,
    height: int | None = None,
) -> EventStream:
    """Parse the ``t_us,x,y,p`` text format into a validated stream.

    Sensor dimensions come from the arguments when given, otherwise from a
    ``# width=W height=H`` metadata line, otherwise from the largest
    coordinates seen. Optional ``t_begin=``/``t_end=`` metadata keys set the
    recording extent.

    Raises:
        FormatError: malformed line, out-of-bounds pixel, bad polarity or a
            missing header. The message carries the 1-based line number.
    """
    text = source if isinstance(source, str) else source.read()
    buf = io.StringIO(text)
    meta: dict[str, int] = {}
    lineno = 0
    header_seen = False
    while True:
        line = buf.readline()
        if not line:
            break
        lineno += 1
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            meta.update(_parse_meta(stripped))
            continue
        if stripped.replace(" ", "") != CSV_HEADER:
            raise FormatError(f"expected header {CSV_HEADER!r}, got {stripped!r}", lineno)
        header_seen = True
        break
    if not header_seen:
        if text.strip() and not all(l.strip().startswith("#") for l in text.splitlines() if l.strip()):
            raise FormatError("missing header line", 1)
    width = width if width is not None else meta.get("width")
    height = height if height is not None else meta.get("height")

    body_start = lineno + 1
    body = buf.read()
    cols = None
    if body.strip():
        try:
            df = pd.read_csv(
                io.StringIO(body),
                header=None,
                names=["t", "x", "y", "p"],
                comment="#",
                dtype=np.int64,
                skip_blank_lines=True,
                engine="c",
            )
            cols = df.to_numpy(dtype=np.int64, copy=False)
            bad = (
                (cols[:, 0] < 0)
                | ((cols[:, 3] != 0) & (cols[:, 3] != 1))
                | (cols[:, 1] < 0)
                | (cols[:, 2] < 0)
            )
            if width is not None:
                bad |= cols[:, 1] >= width
            if height is not None:
                bad |= cols[:, 2] >= height
            if bad.any():
                cols = None
        except (ValueError, pd.errors.ParserError):
            cols = None
        if cols is None:
            rows = _parse_lines_strict(body.splitlines(), body_start, width, height)
            cols = np.array(rows, dtype=np.int64).reshape(-1, 4)
    if cols is None:
        cols = np.zeros((0, 4), dtype=np.int64)

    if width is None:
        width = int(cols[:, 1].max()) + 1 if len(cols) else 1
    if height is None:
        height = int(cols[:, 2].max()) + 1 if len(cols) else 1
    t_begin = meta.get("t_begin")
    t_end = meta.get("t_end")
    if len(cols):
        if t_begin is not None and cols[:, 0].min() < t_begin:
            raise FormatError(f"event before declared t_begin={t_begin}")
        if t_end is not None and cols[:, 0].max() > t_end:
            raise FormatError(f"event after declared t_end={t_end}")
    return EventStream.from_arrays(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3], width, height, t_begin, t_end)


def read_event_csv(path: str | Path, width: int | None = None, height: int | None = None) -> EventStream:
    with open(path, encoding="utf-8") as fh:
        return parse_event_csv(fh, width, height)


def write_event_csv(s: EventStream, dest: str | Path | IO[str] | None = None) -> str | None:
    """Serialize a stream with its metadata line. Returns the text if ``dest`` is None."""
    out = io.StringIO()
    out.write(f"# width={s.width} height={s.height} t_begin={s.t_begin} t_end={s.t_end}\n")
    out.write(CSV_HEADER + "\n")
    if len(s):
        frame = pd.DataFrame({"t": s.t, "x": s.x, "y": s.y, "p": s.p})
        frame.to_csv(out, header=False, index=False, lineterminator="\n")
    text = out.getvalue()
    if dest is None:
        return text
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)
    return None


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------


# Calibrated on generated scenes: the busiest genuine pixel averages < 1 ev/s
# there, so 10 ev/s leaves a >10x margin while stuck pixels sit far above.
HOT_PIXEL_RATE = 10.0


def hot_pixel_filter(s: EventStream, rate_threshold: float = HOT_PIXEL_RATE) -> EventStream:
    """Drop every event of pixels whose mean rate over the stream exceeds ``rate_threshold`` (ev/s)."""
    if rate_threshold <= 0:
        raise ValueError("rate_threshold must be positive")
    duration = s.duration_s
    if duration <= 0:
        raise ValueError("hot pixel filter needs a stream of positive duration")
    if not len(s):
        return s
    pix = s.y.astype(np.int64) * s.width + s.x
    counts = np.bincount(pix, minlength=s.width * s.height)
    hot = counts / duration > rate_threshold
    if not hot.any():
        return s
    return s.select(~hot[pix])


def _bin_index(t: np.ndarray, t_begin: int, bin_us: float, n_bins: int) -> np.ndarray:
    idx = np.floor((t - t_begin) / bin_us).astype(np.int64)
    # events at exactly t_end belong to the last (closed) bin
    return np.minimum(idx, n_bins - 1)


def n_bins_for(t_begin: int, t_end: int, bin_us: float) -> int:
    return max(1, math.ceil((t_end - t_begin) / bin_us))


def ir_flash_filter(
    s: EventStream,
    bin_width: float,
    burst_factor: float,
    coverage_fraction: float,
) -> EventStream:
    """Remove time bins that look like whole-scene illumination flashes.

    A bin is a flash when its event count exceeds ``burst_factor`` times the
    median bin count *and* more than ``coverage_fraction`` of all pixels are
    active in it. Removing flash bins lowers the median, so the rule is
    re-applied until no new bin qualifies; the result is therefore a fixed
    point and a second application is a no-op.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if burst_factor <= 1:
        raise ValueError("burst_factor must exceed 1")
    if not 0 < coverage_fraction <= 1:
        raise ValueError("coverage_fraction must lie in (0, 1]")
    if not len(s):
        return s
    bin_us = bin_width * 1e6
    n_bins = n_bins_for(s.t_begin, s.t_end, bin_us)
    bins = _bin_index(s.t, s.t_begin, bin_us, n_bins)
    npix = s.width * s.height
    pix = s.y.astype(np.int64) * s.width + s.x
    counts = np.bincount(bins, minlength=n_bins)
    distinct = np.bincount(np.unique(bins * npix + pix) // npix, minlength=n_bins)
    flagged = np.zeros(n_bins, dtype=bool)
    while True:
        live = np.where(flagged, 0, counts)
        median = float(np.median(live))
        new = ~flagged & (live > burst_factor * median) & (distinct / npix > coverage_fraction)
        if not new.any():
            break
        flagged |= new
    if not flagged.any():
        return s
    return s.select(~flagged[bins])


def crop_to_roi(s: EventStream, b: BoundingBox) -> EventStream:
    """Events inside ``b`` with coordinates re-based to the box corner."""
    if not b.fits(s.width, s.height):
        raise ValueError(f"box {b.roi_id!r} exceeds sensor {s.width}x{s.height}")
    if (b.x, b.y, b.w, b.h) == (0, 0, s.width, s.height):
        return s
    mask = (s.x >= b.x) & (s.x < b.x + b.w) & (s.y >= b.y) & (s.y < b.y + b.h)
    return EventStream(
        _readonly(s.t[mask]),
        _readonly((s.x[mask] - b.x).astype(np.int32)),
        _readonly((s.y[mask] - b.y).astype(np.int32)),
        _readonly(s.p[mask]),
        b.w,
        b.h,
        s.t_begin,
        s.t_end,
    )
