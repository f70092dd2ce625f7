import json
import subprocess
import sys

import pytest

from evtad.annotations import parse_annotations, parse_detections, read_text, write_detections
from evtad.atsn import DetectConfig, detect
from evtad.cli import run
from evtad.events import crop_to_roi, read_event_csv
from evtad.model import Model

SINGLE = {
    "width": 16,
    "height": 16,
    "duration": 40.0,
    "background_rate": 0.2,
    "seed": 3,
    "rois": [{"id": "a", "x": 2, "y": 2, "w": 8, "h": 8}],
    "actions": [{"roi_id": "a", "t_start": 15.0, "t_end": 22.0, "multiplier": 12.0, "pattern": "uniform"}],
}


def summary(capsys) -> dict:
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


@pytest.fixture
def scene_dir(tmp_path, capsys):
    cfg = tmp_path / "scene.json"
    cfg.write_text(json.dumps(SINGLE))
    out = tmp_path / "scene"
    assert run(["synth", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    return out


def test_synth_propose_eval_single_burst(scene_dir, tmp_path, capsys):
    props = tmp_path / "props.json"
    ev, ann = str(scene_dir / "events.csv"), str(scene_dir / "annotations.json")
    assert run(["propose", "--events", ev, "--annotations", ann, "--out", str(props)]) == 0
    assert summary(capsys)["proposals"] > 0
    report = tmp_path / "ar.csv"
    code = run(["eval", "--pred", str(props), "--gt", ann, "--metrics", "ar", "--top-n", "20", "--out", str(report)])
    assert code == 0
    assert summary(capsys)["ar@20"] == 1.0
    assert report.read_text().splitlines()[0] == "metric,param,value"


def test_empty_predictions_score_zero(scene_dir, tmp_path, capsys):
    pred = tmp_path / "empty.json"
    pred.write_text(write_detections([]))
    code = run(["eval", "--pred", str(pred), "--gt", str(scene_dir / "annotations.json"), "--out", str(tmp_path / "r.csv")])
    assert code == 0
    out = summary(capsys)
    assert out["map"] == 0.0 and out["ar@50"] == 0.0


def test_exit_codes(scene_dir, tmp_path, capsys):
    assert run(["frobnicate"]) == 2
    assert run(["propose", "--events", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "p.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    ev = str(scene_dir / "events.csv")
    assert run(["propose", "--events", ev, "--config", str(bad), "--out", str(tmp_path / "p.json")]) == 4
    bad.write_text(json.dumps({"proposals": {"no_such_field": 1}}))
    assert run(["propose", "--events", ev, "--config", str(bad), "--out", str(tmp_path / "p.json")]) == 4
    garbage = tmp_path / "garbage.csv"
    garbage.write_text("hello\nworld\n")
    assert run(["propose", "--events", str(garbage), "--out", str(tmp_path / "p.json")]) == 4
    assert run(["detect", "--events", ev, "--out", str(tmp_path / "d.json")]) == 2


def test_module_entry_point_reports_usage():
    proc = subprocess.run([sys.executable, "-m", "evtad.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "evtad.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2


def test_flags_override_config(scene_dir, tmp_path, capsys):
    ev, ann = str(scene_dir / "events.csv"), str(scene_dir / "annotations.json")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"rate": {"bin_width": 0.5}}))
    out = tmp_path / "r.csv"
    assert run(["rate", "--events", ev, "--annotations", ann, "--config", str(cfg), "--out", str(out)]) == 0
    assert summary(capsys)["bins"] == 80
    assert run(["rate", "--events", ev, "--annotations", ann, "--config", str(cfg), "--bin-width", "1", "--out", str(out)]) == 0
    assert summary(capsys)["bins"] == 40


def test_outputs_are_deterministic(tmp_path, capsys):
    texts = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(["synth", "--seed", "7", "--rois", "2", "--out", str(d)]) == 0
        ev, ann = str(d / "events.csv"), str(d / "annotations.json")
        assert run(["propose", "--events", ev, "--annotations", ann, "--jobs", str(1 + k), "--out", str(d / "p.json")]) == 0
        texts.append([(d / n).read_bytes() for n in ("events.csv", "annotations.json", "p.json")])
    capsys.readouterr()
    assert texts[0] == texts[1]


def test_detect_matches_library_chain(scene_dir, tmp_path, capsys):
    ev, ann = str(scene_dir / "events.csv"), str(scene_dir / "annotations.json")
    model = tmp_path / "m.json"
    assert run(["train", "--events", ev, "--annotations", ann, "--epochs", "5", "--seed", "1", "--out", str(model)]) == 0
    dets = tmp_path / "d.json"
    assert run(["detect", "--events", ev, "--annotations", ann, "--model", str(model), "--out", str(dets)]) == 0
    capsys.readouterr()
    s = read_event_csv(ev)
    a = parse_annotations(read_text(ann))
    m = Model.load(str(model))
    cfg = DetectConfig.from_dict(m.meta["detect"])
    expected = [d for b in a.rois for d in detect(crop_to_roi(s, b), m, cfg, b.roi_id)]
    assert dets.read_text() == write_detections(expected)
    assert len(parse_detections(dets.read_text())) == len(expected)


def test_perfect_detect_and_report(scene_dir, tmp_path, capsys):
    ev, ann = str(scene_dir / "events.csv"), str(scene_dir / "annotations.json")
    dets = tmp_path / "d.json"
    assert run(["detect", "--events", ev, "--annotations", ann, "--perfect", "--out", str(dets)]) == 0
    assert summary(capsys)["detections"] >= 1
    assert run(["eval", "--pred", str(dets), "--gt", ann, "--tiou", "0.5", "--out", str(tmp_path / "e.csv")]) == 0
    assert summary(capsys)["map"] == 1.0
    rep = tmp_path / "rep"
    assert run(["report", "--events", ev, "--gt", ann, "--pred", str(dets), "--out-dir", str(rep)]) == 0
    assert sorted(p.name for p in rep.iterdir()) == ["per_roi.csv", "rate_a.csv"]
