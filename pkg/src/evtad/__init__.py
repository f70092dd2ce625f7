"""Temporal action detection on event-camera streams.

Two-stage detector: robust event-rate proposals (reTAG) followed by
classification of temporally augmented proposals, plus baselines,
tIoU-based evaluation and a synthetic scene generator.
"""

from evtad.events import EventStream, BoundingBox, parse_event_csv, write_event_csv
from evtad.intervals import Interval, Proposal, Detection, tiou, interval_nms
from evtad.rate import RateSeries, RateConfig, event_rate, robust_normalize
from evtad.proposals import ProposalConfig, retag, event_tag, sliding_window

__all__ = [
    "EventStream",
    "BoundingBox",
    "parse_event_csv",
    "write_event_csv",
    "Interval",
    "Proposal",
    "Detection",
    "tiou",
    "interval_nms",
    "RateSeries",
    "RateConfig",
    "event_rate",
    "robust_normalize",
    "ProposalConfig",
    "retag",
    "event_tag",
    "sliding_window",
]

__version__ = "0.1.0"
