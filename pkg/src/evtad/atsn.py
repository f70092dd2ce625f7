"""Proposal classification: temporal augmentation, sparse sampling, encoding, scoring, detection.

A proposal (t_a, t_b) of duration d is extended by start and end stages of
width d / W. Snapshots are sampled at sub-interval midpoints of each stage,
encoded with a pooled-patch encoder, averaged within each stage and
concatenated start-core-end. A :class:`~evtad.model.Model` (or any callable
scorer) turns the result into a probability; detections are the proposals
scored this way, reduced by NMS.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from evtad.events import EventStream
from evtad.intervals import Detection, Interval, Proposal, interval_nms, tiou_matrix
from evtad.model import Model
from evtad.proposals import ProposalConfig, retag
from evtad.rate import RateConfig, event_rate, robust_normalize
from evtad.represent import Grid, RepresentConfig, snapshot


@dataclass(frozen=True)
class AugmentedProposal:
    core: Interval
    start_stage: Interval
    end_stage: Interval
    W: float


@dataclass(frozen=True)
class SamplingConfig:
    n_core: int = 3
    n_start: int = 1
    n_end: int = 1

    def __post_init__(self):
        if self.n_core < 1:
            raise ValueError("n_core must be at least 1")
        if self.n_start < 0 or self.n_end < 0:
            raise ValueError("stage sample counts must be non-negative")


FUSIONS = ("tiebreak", "product", "classifier")
TIEBREAK_WEIGHT = 0.01


def fuse_scores(probs: np.ndarray, proposal_scores: np.ndarray, fusion: str) -> np.ndarray:
    """Combine classifier probabilities with proposal scores.

    ``classifier`` keeps the probability. ``product`` multiplies both.
    ``tiebreak`` scales the probability by ``1 - w + w * q`` with a small
    ``w``, so probabilities further apart than ``w`` keep their order while
    equal probabilities (a binary oracle, say) are ordered by proposal score.
    """
    probs = np.asarray(probs, dtype=float)
    q = np.asarray(proposal_scores, dtype=float)
    if fusion == "classifier":
        return probs
    if fusion == "product":
        return probs * q
    if fusion == "tiebreak":
        return probs * (1.0 - TIEBREAK_WEIGHT + TIEBREAK_WEIGHT * q)
    raise ValueError(f"fusion must be one of {FUSIONS}")


@dataclass(frozen=True)
class DetectConfig:
    """Everything the top-down pipeline needs, in one serializable bundle."""

    rate: RateConfig = field(default_factory=RateConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    represent: RepresentConfig = field(default_factory=RepresentConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    aug_divisor: float = 3.0
    blocks: int = 4
    nms_tiou: float = 0.6
    min_score: float | None = None
    label: str = "ED"
    # how the proposal score enters the detection score, see fuse_scores
    fusion: str = "tiebreak"

    def __post_init__(self):
        if self.fusion not in FUSIONS:
            raise ValueError(f"fusion must be one of {FUSIONS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["proposals"]["lambda_grid"] = list(self.proposals.lambda_grid)
        d["proposals"]["mu_grid"] = list(self.proposals.mu_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectConfig":
        d = dict(d)
        sub = {"rate": RateConfig, "proposals": ProposalConfig, "represent": RepresentConfig, "sampling": SamplingConfig}
        for key, typ in sub.items():
            if key in d and isinstance(d[key], dict):
                d[key] = typ(**d[key])
        return cls(**d)

    @property
    def feature_length(self) -> int:
        return 3 * encoder_length(self.blocks)


def augment_proposal(p: Interval, W: float = 3.0) -> AugmentedProposal:
    """Attach start/end stages of width ``duration / W``; no clamping to the stream."""
    if W <= 0:
        raise ValueError("augmentation divisor W must be positive")
    pad = (p.t_end - p.t_start) / W
    return AugmentedProposal(
        p,
        Interval(p.t_start - pad, p.t_start),
        Interval(p.t_end, p.t_end + pad),
        W,
    )


def _midpoints(stage: Interval, n: int) -> list[float]:
    step = (stage.t_end - stage.t_start) / n if n else 0.0
    return [stage.t_start + (k + 0.5) * step for k in range(n)]


def stage_timestamps(a: AugmentedProposal, cfg: SamplingConfig) -> tuple[list, list, list]:
    return (
        _midpoints(a.start_stage, cfg.n_start),
        _midpoints(a.core, cfg.n_core),
        _midpoints(a.end_stage, cfg.n_end),
    )


def sample_timestamps(a: AugmentedProposal, cfg: SamplingConfig) -> list[float]:
    """Midpoints of equal sub-intervals per stage, ordered start, core, end."""
    start, core, end = stage_timestamps(a, cfg)
    return start + core + end


def encoder_length(blocks: int) -> int:
    return 2 * blocks * blocks + 3


def encode_snapshot(g: Grid, blocks: int = 4) -> np.ndarray:
    """Pooled-patch features: (mean, max) per block of a blocks x blocks partition,
    then global mean, max and fraction of nonzero cells."""
    v = g.values
    H, W = v.shape
    rows = (np.arange(blocks + 1) * H) // blocks
    cols = (np.arange(blocks + 1) * W) // blocks
    out = np.zeros(encoder_length(blocks))
    if H >= blocks and W >= blocks:
        sums = np.add.reduceat(np.add.reduceat(v, rows[:-1], axis=0), cols[:-1], axis=1)
        maxes = np.maximum.reduceat(np.maximum.reduceat(v, rows[:-1], axis=0), cols[:-1], axis=1)
        sizes = np.outer(np.diff(rows), np.diff(cols))
        out[0:-3:2] = (sums / sizes).ravel()
        out[1:-3:2] = maxes.ravel()
    else:
        # some blocks are empty and stay zero
        k = 0
        for i in range(blocks):
            for j in range(blocks):
                cell = v[rows[i]:rows[i + 1], cols[j]:cols[j + 1]]
                if cell.size:
                    out[k] = cell.mean()
                    out[k + 1] = cell.max()
                k += 2
    out[-3] = v.mean()
    out[-2] = v.max()
    out[-1] = np.count_nonzero(v) / v.size
    return out


def consensus(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise mean of equally long feature vectors."""
    if not len(vectors):
        raise ValueError("consensus needs at least one vector")
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise ValueError(f"feature vectors differ in length: {sorted(lengths)}")
    return np.mean(np.stack([np.asarray(v, dtype=float) for v in vectors]), axis=0)


def assemble_feature(start: np.ndarray, core: np.ndarray, end: np.ndarray) -> np.ndarray:
    return np.concatenate([start, core, end])


def _stage_feature(s: EventStream, times: list[float], cfg: DetectConfig) -> np.ndarray:
    if not times:
        return np.zeros(encoder_length(cfg.blocks))
    rep = cfg.represent
    t_lo, t_hi = s.t_begin / 1e6, s.t_end / 1e6
    feats = []
    for t in times:
        if t < t_lo or t > t_hi:
            feats.append(np.zeros(encoder_length(cfg.blocks)))
        else:
            feats.append(encode_snapshot(snapshot(s, t, rep), cfg.blocks))
    return consensus(feats)


def proposal_feature(s: EventStream, p: Interval, cfg: DetectConfig) -> np.ndarray:
    """Start-core-end feature of one proposal.

    Snapshots centered outside the stream extent are zero grids.
    """
    a = augment_proposal(p, cfg.aug_divisor)
    start, core, end = stage_timestamps(a, cfg.sampling)
    return assemble_feature(
        _stage_feature(s, start, cfg), _stage_feature(s, core, cfg), _stage_feature(s, end, cfg)
    )


def feature_matrix(s: EventStream, intervals: Sequence[Interval], cfg: DetectConfig) -> np.ndarray:
    X = np.zeros((len(intervals), cfg.feature_length))
    for i, iv in enumerate(intervals):
        X[i] = proposal_feature(s, iv, cfg)
    return X


def max_tiou(ps: Sequence[Proposal], gt: Sequence[Interval]) -> np.ndarray:
    if not ps:
        return np.zeros(0)
    if not gt:
        return np.zeros(len(ps))
    m = tiou_matrix(
        [p.interval.t_start for p in ps],
        [p.interval.t_end for p in ps],
        [g.t_start for g in gt],
        [g.t_end for g in gt],
    )
    return m.max(axis=1)


def label_proposals(
    ps: Sequence[Proposal],
    gt: Sequence[Interval],
    pos_thr: float = 0.7,
    neg_subsample: int = 1,
    seed: int = 0,
) -> tuple[list[Proposal], np.ndarray]:
    """Label proposals positive iff their best tIoU with ground truth exceeds ``pos_thr``.

    Negatives are thinned to ``ceil(n_neg / neg_subsample)`` by a seeded draw
    without replacement; input order is preserved.
    """
    if neg_subsample < 1:
        raise ValueError("neg_subsample must be a positive integer")
    labels = (max_tiou(ps, gt) > pos_thr).astype(int)
    keep = np.ones(len(ps), dtype=bool)
    neg = np.flatnonzero(labels == 0)
    if neg_subsample > 1 and len(neg):
        rng = np.random.default_rng(seed)
        chosen = rng.choice(neg, size=math.ceil(len(neg) / neg_subsample), replace=False)
        keep[neg] = False
        keep[chosen] = True
    idx = np.flatnonzero(keep)
    return [ps[i] for i in idx], labels[idx]


def perfect_classifier(ps: Sequence[Proposal], gt: Sequence[Interval], thr: float) -> np.ndarray:
    """1.0 for proposals whose best ground-truth tIoU exceeds ``thr``, else 0.0."""
    return (max_tiou(ps, gt) > thr).astype(float)


class PerfectClassifier:
    """Ground-truth oracle usable wherever :func:`detect` accepts a classifier."""

    def __init__(self, gt: Sequence[Interval], thr: float):
        self.gt = list(gt)
        self.thr = thr

    def __call__(self, s: EventStream, ps: Sequence[Proposal]) -> np.ndarray:
        return perfect_classifier(ps, self.gt, self.thr)


Scorer = Union[Model, Callable[[EventStream, Sequence[Proposal]], np.ndarray]]


def score_proposals(classifier: Scorer, s: EventStream, ps: Sequence[Proposal], cfg: DetectConfig) -> np.ndarray:
    if isinstance(classifier, Model):
        if not ps:
            return np.zeros(0)
        return classifier.predict_proba(feature_matrix(s, [p.interval for p in ps], cfg))
    return np.asarray(classifier(s, ps), dtype=float)


def generate_proposals(s: EventStream, cfg: DetectConfig) -> list[Proposal]:
    r = robust_normalize(event_rate(s, cfg.rate.bin_width), cfg.rate.percentile)
    return retag(r, cfg.proposals)


def detect(
    s: EventStream,
    classifier: Scorer,
    cfg: DetectConfig = DetectConfig(),
    roi_id: str = "roi",
    proposals: Sequence[Proposal] | None = None,
) -> list[Detection]:
    """Top-down detection on one ROI stream.

    rate -> robust normalization -> reTAG -> classifier probability per
    proposal -> optional ``min_score`` filter on that probability -> fusion
    with the proposal score -> NMS at ``cfg.nms_tiou``. Precomputed
    ``proposals`` skip the proposal stage.
    """
    ps = generate_proposals(s, cfg) if proposals is None else list(proposals)
    if not ps:
        return []
    probs = np.clip(score_proposals(classifier, s, ps, cfg), 0.0, 1.0)
    if cfg.min_score is not None:
        keep = probs >= cfg.min_score
        ps = [p for p, k in zip(ps, keep) if k]
        probs = probs[keep]
    probs = fuse_scores(probs, np.array([p.score for p in ps]), cfg.fusion)
    dets = [Detection(roi_id, p.interval, float(sc), cfg.label) for p, sc in zip(ps, probs)]
    return interval_nms(dets, cfg.nms_tiou)


def build_training_set(
    samples: Sequence[tuple[EventStream, Sequence[Interval]]],
    cfg: DetectConfig,
    pos_thr: float = 0.7,
    neg_subsample: int = 1,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Proposals of every (ROI stream, ground truth) pair, labeled and featurized."""
    blocks_X, blocks_y = [], []
    for i, (s, gt) in enumerate(samples):
        ps = generate_proposals(s, cfg)
        kept, labels = label_proposals(ps, gt, pos_thr, neg_subsample, seed + i)
        if kept:
            blocks_X.append(feature_matrix(s, [p.interval for p in kept], cfg))
            blocks_y.append(labels)
    if not blocks_X:
        return np.zeros((0, cfg.feature_length)), np.zeros(0, dtype=int)
    return np.vstack(blocks_X), np.concatenate(blocks_y)
