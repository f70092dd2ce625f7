"""Command-line entry point: ``evtad <subcommand> ...``.

Settings resolve as built-in defaults, then the ``--config`` JSON file, then
explicit flags (flags win). Every command prints one JSON summary line on
stdout; logs go to stderr.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 missing input
file, 4 malformed input or config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from evtad import __version__
from evtad.annotations import (
    AnnotationSet,
    parse_annotations,
    parse_detections,
    read_text,
    write_annotations,
    write_detections,
    write_proposals,
)
from evtad.atsn import DetectConfig, PerfectClassifier, SamplingConfig, build_training_set, detect
from evtad.bottomup import bottomup_detect, snapshot_features, snapshot_labels, snapshot_times
from evtad.errors import FormatError
from evtad.evaluation import EvalConfig, average_recall, group_by_roi, mean_ap, per_roi_report, rows_to_csv
from evtad.events import BoundingBox, EventStream, crop_to_roi, read_event_csv, write_event_csv
from evtad.model import Model, TrainConfig, train
from evtad.proposals import ProposalConfig, event_tag, retag, sliding_window, watershed_proposals
from evtad.rate import RateConfig, event_rate, robust_normalize
from evtad.represent import RepresentConfig, snapshot
from evtad.synth import SceneConfig, contaminate, generate_scene, random_scene

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_MISSING, EXIT_SCHEMA = 0, 1, 2, 3, 4

log = logging.getLogger("evtad")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError(f"config {path}: top level must be an object")
    return doc


def _section(conf: dict, name: str, typ, overrides: dict):
    """Build dataclass ``typ`` from ``conf[name]`` with non-None ``overrides`` on top."""
    values = dict(conf.get(name, {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return typ(**values)
    except TypeError as exc:
        raise FormatError(f"config section {name!r}: {exc}") from None


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _summary(**fields) -> None:
    sys.stdout.write(json.dumps(fields, sort_keys=True) + "\n")


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def _read_events(args) -> EventStream:
    return read_event_csv(args.events, getattr(args, "width", None), getattr(args, "height", None))


def _read_annotations(path: str | None) -> AnnotationSet | None:
    return None if path is None else parse_annotations(read_text(path))


def _rois(s: EventStream, ann: AnnotationSet | None, only: str | None = None) -> list[BoundingBox]:
    if ann is None:
        boxes = [BoundingBox("roi", 0, 0, s.width, s.height)]
    else:
        boxes = list(ann.rois)
    if only is not None:
        boxes = [b for b in boxes if b.roi_id == only]
        if not boxes:
            raise UsageError(f"unknown roi id {only!r}")
    return boxes


def _per_roi(jobs: int, boxes: Sequence[BoundingBox], s: EventStream, fn: Callable) -> list:
    """``fn(box, cropped_stream)`` for every ROI, in ROI order, on up to ``jobs`` threads."""
    def one(b):
        return fn(b, crop_to_roi(s, b))

    if jobs <= 1 or len(boxes) <= 1:
        return [one(b) for b in boxes]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, boxes))


def _floats(text: str | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str | None) -> tuple[int, ...] | None:
    vals = _floats(text)
    return None if vals is None else tuple(int(v) for v in vals)


def _rate_config(args, conf) -> RateConfig:
    return _section(conf, "rate", RateConfig, {"bin_width": args.bin_width, "percentile": args.percentile})


def _proposal_config(args, conf) -> ProposalConfig:
    return _section(
        conf,
        "proposals",
        ProposalConfig,
        {
            "lambda_grid": _floats(getattr(args, "lambda_grid", None)),
            "mu_grid": _floats(getattr(args, "mu_grid", None)),
            "nms_tiou": getattr(args, "proposal_nms", None),
            "min_duration": getattr(args, "min_dur", None),
            "ranking": getattr(args, "ranking", None),
        },
    )


def _represent_config(args, conf) -> RepresentConfig:
    size = getattr(args, "size", None)
    return _section(
        conf,
        "represent",
        RepresentConfig,
        {
            "kind": getattr(args, "kind", None),
            "window": getattr(args, "window", None),
            "tau": getattr(args, "tau", None),
            "out_h": size,
            "out_w": size,
        },
    )


def _detect_config(args, conf) -> DetectConfig:
    base = dict(conf.get("detect", {}))
    for key in ("rate", "proposals", "represent", "sampling"):
        base.pop(key, None)
    sampling = _section(
        conf,
        "sampling",
        SamplingConfig,
        {"n_core": getattr(args, "n_core", None), "n_start": getattr(args, "n_start", None), "n_end": getattr(args, "n_end", None)},
    )
    over = {
        "aug_divisor": getattr(args, "aug_divisor", None),
        "nms_tiou": getattr(args, "nms", None),
        "min_score": getattr(args, "min_score", None),
        "fusion": getattr(args, "fusion", None),
    }
    base.update({k: v for k, v in over.items() if v is not None})
    try:
        return DetectConfig(
            rate=_rate_config(args, conf),
            proposals=_proposal_config(args, conf),
            represent=_represent_config(args, conf),
            sampling=sampling,
            **base,
        )
    except TypeError as exc:
        raise FormatError(f"config section 'detect': {exc}") from None


def _sections_of(detect_dict: dict) -> dict:
    """Split a serialized DetectConfig into config-file sections."""
    d = dict(detect_dict)
    out = {key: d.pop(key) for key in ("rate", "proposals", "represent", "sampling") if key in d}
    out["detect"] = d
    return out


def _eval_config(args, conf) -> EvalConfig:
    return _section(conf, "eval", EvalConfig, {"tiou_thresholds": _floats(args.tiou), "top_n": _ints(args.top_n)})


# ---------------------------------------------------------------- commands


def cmd_synth(args, conf) -> dict:
    if {"rois", "actions"} <= set(conf):
        scene = SceneConfig.from_dict(conf)
        if args.seed is not None:
            scene = replace(scene, seed=args.seed)
    else:
        params = dict(conf.get("random", conf))
        if args.n_rois is not None:
            params["n_rois"] = args.n_rois
        if args.modulation is not None:
            params["modulation_depth"] = args.modulation
        for key in ("bursts", "burst_duration", "gap", "multiplier"):
            if key in params:
                params[key] = tuple(params[key])
        try:
            scene = random_scene(args.seed if args.seed is not None else 0, **params)
        except TypeError as exc:
            raise FormatError(f"scene config: {exc}") from None
    s, ann = generate_scene(scene)
    if args.spikes:
        s = contaminate(s, scene, args.spikes, args.spike_factor, seed=scene.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_event_csv(s, out / "events.csv")
    _write(out / "annotations.json", write_annotations(ann))
    _write(out / "scene.json", scene.to_json())
    log.info("wrote %d events, %d instances to %s", len(s), len(ann.instances), out)
    return {"events": len(s), "instances": len(ann.instances), "rois": len(ann.rois), "out": str(out)}


def cmd_rate(args, conf) -> dict:
    rc = _rate_config(args, conf)
    s = _read_events(args)
    box = _rois(s, _read_annotations(args.annotations), args.roi)[0]
    r = event_rate(crop_to_roi(s, box), rc.bin_width)
    if args.normalize:
        r = robust_normalize(r, rc.percentile)
    lines = ["bin_start_us,rate"]
    lines += [f"{int(round(t))},{_fmt(v)}" for t, v in zip(r.bin_starts_us().tolist(), r.values.tolist())]
    _write(args.out, "\n".join(lines) + "\n")
    return {"bins": len(r), "roi_id": box.roi_id, "normalized": r.normalized, "out": args.out}


def _propose_one(method: str, rc: RateConfig, pc: ProposalConfig, args) -> Callable:
    def run(box, c: EventStream):
        r = event_rate(c, rc.bin_width)
        if method == "retag":
            return retag(robust_normalize(r, rc.percentile), pc)
        if method == "etag":
            return event_tag(r, pc)
        if method == "watershed":
            lam = pc.lambda_grid[0] if args.lambda_grid else 0.2
            return watershed_proposals(robust_normalize(r, rc.percentile), lam, pc.min_duration, pc.ranking)
        return sliding_window(c.t_begin / 1e6, c.t_end / 1e6)

    return run


def cmd_propose(args, conf) -> dict:
    rc, pc = _rate_config(args, conf), _proposal_config(args, conf)
    s = _read_events(args)
    boxes = _rois(s, _read_annotations(args.annotations))
    results = _per_roi(args.jobs, boxes, s, _propose_one(args.method, rc, pc, args))
    props = {b.roi_id: ps for b, ps in zip(boxes, results)}
    _write(args.out, write_proposals(props))
    n = sum(len(v) for v in props.values())
    log.info("%s: %d proposals over %d rois", args.method, n, len(boxes))
    return {"method": args.method, "proposals": n, "rois": len(boxes), "out": args.out}


def cmd_snapshot(args, conf) -> dict:
    rep = _represent_config(args, conf)
    s = _read_events(args)
    box = _rois(s, _read_annotations(args.annotations), args.roi)[0]
    g = snapshot(crop_to_roi(s, box), args.time, rep)
    rows = [",".join(_fmt(v) for v in row) for row in g.values.tolist()]
    _write(args.out, "\n".join(rows) + "\n")
    return {"kind": g.kind, "shape": [g.h, g.w], "t_center": g.t_center, "out": args.out}


def _training_pairs(events: Sequence[str], annotations: Sequence[str]) -> list[tuple[EventStream, AnnotationSet]]:
    if len(events) != len(annotations):
        raise UsageError("--events and --annotations must be given the same number of times")
    return [(read_event_csv(e), parse_annotations(read_text(a))) for e, a in zip(events, annotations)]


def _bottomup_set(pairs, window, stride, rep, blocks):
    X, y = [], []
    for s, ann in pairs:
        for b in ann.rois:
            c = crop_to_roi(s, b)
            X.append(snapshot_features(c, window, stride, rep, blocks))
            y.append(snapshot_labels(snapshot_times(c, stride), ann.intervals(b.roi_id)))
    return np.vstack(X), np.concatenate(y)


def _atsn_set(pairs, cfg, args):
    samples = [(crop_to_roi(s, b), ann.intervals(b.roi_id)) for s, ann in pairs for b in ann.rois]
    return build_training_set(samples, cfg, args.pos_tiou, args.neg_subsample, args.seed or 0)


def cmd_train(args, conf) -> dict:
    tc = _section(
        conf,
        "train",
        TrainConfig,
        {"lr": args.lr, "epochs": args.epochs, "hidden": args.hidden, "batch_size": args.batch_size, "seed": args.seed},
    )
    pairs = _training_pairs(args.events, args.annotations)
    val_pairs = _training_pairs(args.val_events or [], args.val_annotations or [])
    if args.method == "bottomup":
        rep = _represent_config(args, conf)
        meta = {"method": "bottomup", "window": args.bu_window, "stride": args.bu_stride, "represent": asdict(rep), "blocks": 4}
        build = lambda ps: _bottomup_set(ps, args.bu_window, args.bu_stride, rep, 4)  # noqa: E731
    else:
        cfg = _detect_config(args, conf)
        meta = {"method": "atsn", "detect": cfg.to_dict()}
        build = lambda ps: _atsn_set(ps, cfg, args)  # noqa: E731
    X, y = build(pairs)
    val = build(val_pairs) if val_pairs else None
    log.info("training on %d samples (%d positive)", len(y), int(np.sum(y)))
    model = train(X, y, tc, val=val, meta=meta)
    model.save(args.out)
    return {"method": args.method, "samples": int(len(y)), "positives": int(np.sum(y)), "out": args.out}


def cmd_detect(args, conf) -> dict:
    s = _read_events(args)
    ann = _read_annotations(args.annotations)
    boxes = _rois(s, ann)
    if args.perfect:
        if ann is None:
            raise UsageError("--perfect needs --annotations with ground truth")
        method = "perfect"
        cfg = _detect_config(args, conf)

        def run(b, c):
            return detect(c, PerfectClassifier(ann.intervals(b.roi_id), args.perfect_tiou), cfg, b.roi_id)

    else:
        if args.model is None:
            raise UsageError("detect needs --model or --perfect")
        model = Model.load(args.model)
        method = model.meta.get("method", "atsn")
        if args.method is not None and args.method != method:
            raise UsageError(f"model was trained for {method!r}, not {args.method!r}")
        if method == "bottomup":
            rep = RepresentConfig(**model.meta["represent"])
            kernel = None if args.no_morph else args.morph_kernel

            def run(b, c):
                return bottomup_detect(
                    c, model, model.meta["window"], model.meta["stride"], kernel, b.roi_id, rep, model.meta["blocks"]
                )

        else:
            # features must match training: the stored config is the base,
            # the config file and flags may only change the later stages
            stored = _sections_of(model.meta.get("detect", {}))
            merged = {k: {**stored.get(k, {}), **conf.get(k, {})} for k in set(stored) | set(conf)}
            cfg = _detect_config(args, merged)
            if "represent" in stored:
                cfg = replace(
                    cfg,
                    represent=RepresentConfig(**stored["represent"]),
                    sampling=SamplingConfig(**stored["sampling"]),
                    blocks=stored["detect"].get("blocks", cfg.blocks),
                    aug_divisor=stored["detect"].get("aug_divisor", cfg.aug_divisor),
                )

            def run(b, c):
                return detect(c, model, cfg, b.roi_id)

    dets = [d for ds in _per_roi(args.jobs, boxes, s, run) for d in ds]
    _write(args.out, write_detections(dets))
    log.info("%s: %d detections", method, len(dets))
    return {"method": method, "detections": len(dets), "rois": len(boxes), "out": args.out}


def cmd_eval(args, conf) -> dict:
    ec = _eval_config(args, conf)
    dets = group_by_roi(parse_detections(read_text(args.pred)))
    gt = parse_annotations(read_text(args.gt)).by_roi()
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(metrics) - {"ar", "map"}
    if unknown:
        raise UsageError(f"unknown metrics {sorted(unknown)}; use ar and/or map")
    rows = []
    summary: dict = {}
    if "ar" in metrics:
        for n, v in average_recall(dets, gt, ec).items():
            rows.append({"metric": "ar", "param": f"top{n}", "value": v})
            summary[f"ar@{n}"] = v
    if "map" in metrics:
        table = mean_ap(dets, gt, ec, interpolated=args.interpolated)
        for t in ec.tiou_thresholds:
            rows.append({"metric": "map", "param": f"{t:g}", "value": table[t]})
            summary[f"map@{t:g}"] = table[t]
        rows.append({"metric": "map", "param": "average", "value": table["average"]})
        summary["map"] = table["average"]
    _write(args.out, rows_to_csv(rows))
    return {**summary, "out": args.out}


def cmd_report(args, conf) -> dict:
    rc, ec = _rate_config(args, conf), _eval_config(args, conf)
    s = _read_events(args)
    ann = parse_annotations(read_text(args.gt))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for b in ann.rois:
        r = event_rate(crop_to_roi(s, b), rc.bin_width)
        rn = robust_normalize(r, rc.percentile)
        lines = ["bin_start_us,rate,normalized"]
        lines += [
            f"{int(round(t))},{_fmt(v)},{_fmt(w)}"
            for t, v, w in zip(r.bin_starts_us().tolist(), r.values.tolist(), rn.values.tolist())
        ]
        _write(out / f"rate_{b.roi_id}.csv", "\n".join(lines) + "\n")
    written = [f"rate_{b.roi_id}.csv" for b in ann.rois]
    summary: dict = {"rois": len(ann.rois)}
    if args.pred is not None:
        dets = group_by_roi(parse_detections(read_text(args.pred)))
        rows = per_roi_report(dets, ann.by_roi(), ec)
        _write(out / "per_roi.csv", rows_to_csv(rows))
        written.append("per_roi.csv")
        if rows and rows[-1]["roi_id"] == "mean":
            summary["map"] = rows[-1]["average"]
    return {**summary, "files": written, "out": str(out)}


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="seed for every randomized step")
    p.add_argument("--jobs", type=int, default=1, help="ROIs processed concurrently")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_events(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--events", required=required, help="event CSV")
    p.add_argument("--width", type=int, help="sensor width if the CSV lacks metadata")
    p.add_argument("--height", type=int, help="sensor height if the CSV lacks metadata")


def _add_rate(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bin-width", type=float, help="rate bin width in seconds (0.033)")
    p.add_argument("--percentile", type=float, help="robust normalization percentile (1.0)")


def _add_proposal(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lambda_grid", help="comma-separated water levels")
    p.add_argument("--mu", dest="mu_grid", help="comma-separated merge ratios")
    p.add_argument("--min-dur", type=float, help="shortest proposal in seconds (2.0)")
    p.add_argument("--ranking", choices=("contrast", "mean"), help="proposal score (contrast)")


def _add_represent(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("histogram", "timemap"))
    p.add_argument("--window", type=float, help="histogram window in seconds")
    p.add_argument("--tau", type=float, help="time-map decay constant in seconds")
    p.add_argument("--size", type=int, help="grid side length after resizing")


def _add_detect(p: argparse.ArgumentParser) -> None:
    _add_rate(p)
    _add_proposal(p)
    _add_represent(p)
    p.add_argument("--proposal-nms", type=float, help="NMS threshold inside reTAG (0.95)")
    p.add_argument("--nms", type=float, help="detection NMS threshold (0.6)")
    p.add_argument("--aug-divisor", type=float, help="start/end stage width is duration / this (3)")
    p.add_argument("--n-core", type=int)
    p.add_argument("--n-start", type=int)
    p.add_argument("--n-end", type=int)
    p.add_argument("--fusion", choices=("tiebreak", "product", "classifier"))
    p.add_argument("--min-score", type=float, help="drop proposals whose probability is below this")


def _add_eval(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tiou", help="comma-separated tIoU thresholds (0.1,0.3,0.5,0.7)")
    p.add_argument("--top-n", help="comma-separated top-N values for AR (20,30,50)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evtad", description="Temporal action detection on event-camera streams.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic scene")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rois", dest="n_rois", type=int, help="number of ROIs of a random scene")
    p.add_argument("--modulation", type=float, help="slow rate modulation depth inside actions")
    p.add_argument("--spikes", type=int, default=0, help="flash-like spikes added per ROI")
    p.add_argument("--spike-factor", type=float, default=40.0, help="spike size in action bins")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rate", help="binned (optionally normalized) event rate as CSV")
    _add_common(p)
    _add_events(p)
    _add_rate(p)
    p.add_argument("--annotations", help="annotation JSON providing ROI boxes")
    p.add_argument("--roi", help="ROI id (default: first ROI or whole sensor)")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("propose", help="temporal proposals per ROI")
    _add_common(p)
    _add_events(p)
    _add_rate(p)
    _add_proposal(p)
    p.add_argument("--method", choices=("retag", "etag", "watershed", "sliding"), default="retag")
    p.add_argument("--nms", dest="proposal_nms", type=float, help="proposal NMS threshold (0.95)")
    p.add_argument("--annotations", help="annotation JSON providing ROI boxes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser("snapshot", help="dump one representation grid as CSV")
    _add_common(p)
    _add_events(p)
    _add_represent(p)
    p.add_argument("--time", type=float, required=True, help="grid center in seconds")
    p.add_argument("--annotations")
    p.add_argument("--roi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("train", help="train a proposal or snapshot classifier")
    _add_common(p)
    _add_detect(p)
    p.add_argument("--events", action="append", required=True, help="event CSV (repeatable)")
    p.add_argument("--annotations", action="append", required=True, help="matching annotations (repeatable)")
    p.add_argument("--val-events", action="append")
    p.add_argument("--val-annotations", action="append")
    p.add_argument("--method", choices=("atsn", "bottomup"), default="atsn")
    p.add_argument("--pos-tiou", type=float, default=0.7, help="proposals above this tIoU are positives")
    p.add_argument("--neg-subsample", type=int, default=1, help="keep every k-th negative")
    p.add_argument("--bu-window", type=float, default=5.0, help="bottom-up snapshot window (s)")
    p.add_argument("--bu-stride", type=float, default=0.033, help="bottom-up snapshot stride (s)")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out", required=True, help="model checkpoint (JSON)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect actions with a trained model or the ground-truth oracle")
    _add_common(p)
    _add_events(p)
    _add_detect(p)
    p.add_argument("--annotations", help="annotation JSON (ROI boxes; ground truth for --perfect)")
    p.add_argument("--model")
    p.add_argument("--method", choices=("atsn", "bottomup"))
    p.add_argument("--perfect", action="store_true", help="score proposals with the ground-truth oracle")
    p.add_argument("--perfect-tiou", type=float, default=0.5)
    p.add_argument("--morph-kernel", type=int, default=15)
    p.add_argument("--no-morph", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="AR / mAP report")
    _add_common(p)
    _add_eval(p)
    p.add_argument("--pred", required=True, help="detections or proposals JSON")
    p.add_argument("--gt", required=True, help="annotation JSON")
    p.add_argument("--metrics", default="ar,map")
    p.add_argument("--interpolated", action="store_true", help="interpolated AP")
    p.add_argument("--out", required=True, help="report CSV (metric,param,value)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="rate curves and per-ROI AP tables for plotting")
    _add_common(p)
    _add_events(p)
    _add_rate(p)
    _add_eval(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        conf = _load_config(args.config)
        result = args.func(args, conf)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        log.error("%s", exc)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc.filename or exc)
        return EXIT_MISSING
    except (FormatError, json.JSONDecodeError, KeyError) as exc:
        log.error("malformed input: %s", exc)
        return EXIT_SCHEMA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    _summary(command=args.command, **result)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
