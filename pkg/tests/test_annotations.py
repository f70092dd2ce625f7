import pytest

from evtad.annotations import (
    AnnotationSet,
    Instance,
    parse_annotations,
    parse_detections,
    parse_proposals,
    write_annotations,
    write_detections,
    write_proposals,
)
from evtad.errors import FormatError
from evtad.events import BoundingBox
from evtad.intervals import Detection, Interval, Proposal


def test_one_roi_no_instances():
    a = parse_annotations('{"rois": [{"id": "n1", "x": 0, "y": 0, "w": 4, "h": 4}], "instances": []}')
    assert len(a.rois) == 1 and a.instances == ()


def test_unknown_roi_named():
    doc = (
        '{"rois": [{"id": "n1", "x": 0, "y": 0, "w": 4, "h": 4}],'
        ' "instances": [{"roi_id": "n9", "t_start_us": 0, "t_end_us": 10, "label": "ED"}]}'
    )
    with pytest.raises(FormatError, match="n9"):
        parse_annotations(doc)


def test_bad_interval_rejected():
    doc = (
        '{"rois": [{"id": "n1", "x": 0, "y": 0, "w": 4, "h": 4}],'
        ' "instances": [{"roi_id": "n1", "t_start_us": 10, "t_end_us": 10, "label": "ED"}]}'
    )
    with pytest.raises(FormatError):
        parse_annotations(doc)


def test_overlapping_instances_rejected():
    rois = (BoundingBox("a", 0, 0, 2, 2),)
    with pytest.raises(FormatError):
        AnnotationSet(rois, (Instance("a", Interval(0, 5), "ED"), Instance("a", Interval(4, 6), "ED")))


def test_annotation_round_trip():
    a = AnnotationSet(
        (BoundingBox("a", 0, 0, 2, 2), BoundingBox("b", 2, 0, 3, 3)),
        (Instance("a", Interval(0.5, 2.25), "ED"), Instance("b", Interval(1.0, 9.0), "ED")),
    )
    assert parse_annotations(write_annotations(a)) == a


def test_detection_round_trip():
    dets = [
        Detection("a", Interval(0.0, 1.5), 0.9),
        Detection("a", Interval(3.0, 4.0), 0.25),
        Detection("b", Interval(0.000001, 12.5), 1.0, "other"),
    ]
    assert parse_detections(write_detections(dets)) == dets


def test_proposal_round_trip():
    props = {"a": [Proposal(Interval(1.0, 3.0), 0.5, "retag(lambda=0.05,mu=0.10)")], "b": []}
    back = parse_proposals(write_proposals(props))
    assert back == {"a": props["a"]}


def test_detection_document_must_be_array():
    with pytest.raises(FormatError):
        parse_detections('{"roi_id": "a"}')
