import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from beecount.errors import AnnotationError, DataError
from beecount.evaluation import (
    ClassMap,
    aggregate_counts,
    build_report,
    count_accuracy,
    ground_truth_crossings,
    parse_annotation_file,
    read_events_csv,
    read_ground_truth_csv,
    write_events_csv,
    write_table_csv,
)
from beecount.tracker import CrossingEvent, Direction


def test_parse_empty_file(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("")
    assert parse_annotation_file(p) == []


def test_parse_line(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("2 0.5 0.5 0.1 0.2\n\n")
    (rec,) = parse_annotation_file(p)
    assert rec.class_id == 2
    assert (rec.x_center, rec.y_center, rec.width, rec.height) == (0.5, 0.5, 0.1, 0.2)
    assert ClassMap().name(rec.class_id) == "bee_complete_in"


@pytest.mark.parametrize("line,match", [
    ("7 0.5 0.5 0.1 0.1", "class id 7"),
    ("-1 0.5 0.5 0.1 0.1", "class id"),
    ("1 0.5 1.5 0.1 0.1", "coordinate"),
    ("1 0.5 0.5 0.1", "expected 5 fields"),
    ("x 0.5 0.5 0.1 0.1", "malformed"),
])
def test_parse_errors_carry_line_number(tmp_path, line, match):
    p = tmp_path / "bad.txt"
    p.write_text("0 0.1 0.1 0.1 0.1\n" + line + "\n")
    with pytest.raises(AnnotationError, match=match) as exc:
        parse_annotation_file(p)
    assert "bad.txt:2" in str(exc.value)


def test_class_map_file(tmp_path):
    p = tmp_path / "names.txt"
    p.write_text("a\nb\nc\nd\ne\n")
    assert ClassMap.from_file(p).names == ("a", "b", "c", "d", "e")
    p.write_text("a\nb\nb\nd\ne\n")
    with pytest.raises(AnnotationError):
        ClassMap.from_file(p)


def test_aggregate_empty_files(tmp_path):
    for i in range(3):
        (tmp_path / f"{i}.txt").write_text("")
    totals = aggregate_counts(tmp_path)
    assert totals["total"] == 0
    assert all(v == 0 for v in totals.values())


def test_aggregate_known_lines(tmp_path):
    (tmp_path / "a.txt").write_text("0 .5 .5 .1 .1\n2 .5 .5 .1 .1\n2 .4 .4 .1 .1\n")
    (tmp_path / "b.txt").write_text("3 .5 .5 .1 .1\n")
    (tmp_path / "c.txt").write_text("4 .5 .5 .1 .1\n1 .5 .5 .2 .2\n2 .1 .1 .1 .1\n")
    (tmp_path / "classes.txt").write_text("not an annotation\n")
    totals = aggregate_counts(tmp_path)
    assert totals == {"bee_abdomen": 1, "bee_cluster": 1, "bee_complete_in": 3,
                      "bee_complete_out": 1, "bee_head": 1, "total": 7}
    assert ground_truth_crossings(totals) == (3, 1)


def test_aggregate_permutation_invariant(tmp_path):
    rng = random.Random(4)
    lines = [f"{rng.randrange(5)} 0.5 0.5 0.1 0.1" for _ in range(60)]
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for i in range(6):
        (a / f"{i}.txt").write_text("\n".join(lines[i * 10:(i + 1) * 10]))
    shuffled = lines[:]
    rng.shuffle(shuffled)
    for i in range(4):
        (b / f"z{i}.txt").write_text("\n".join(shuffled[i * 15:(i + 1) * 15]))
    assert aggregate_counts(a) == aggregate_counts(b)


def test_aggregate_missing_dir(tmp_path):
    with pytest.raises(AnnotationError):
        aggregate_counts(tmp_path / "nope")


def test_count_accuracy_examples():
    assert count_accuracy(29, 182) == pytest.approx(0.1593, abs=1e-4)
    assert count_accuracy(26, 24) == pytest.approx(0.9167, abs=1e-4)
    assert count_accuracy(17, 17) == 1.0
    assert count_accuracy(60, 20) == -1.0  # overshoot is not clamped
    with pytest.raises(DataError):
        count_accuracy(3, 0)


@given(st.integers(1, 10_000), st.integers(0, 10_000))
def test_count_accuracy_symmetric(gt, err):
    assert count_accuracy(gt, gt) == 1.0
    if err <= gt:
        assert count_accuracy(gt - err, gt) == count_accuracy(gt + err, gt)


def test_build_report_total_miss():
    report = build_report([], (182, 24), tunnel_ids=[0])
    assert (report.total.acc_in, report.total.acc_out) == (0.0, 0.0)


def _events(n_in, n_out, tunnel=0):
    return ([CrossingEvent(tunnel, k, Direction.IN) for k in range(n_in)]
            + [CrossingEvent(tunnel, 1000 + k, Direction.OUT) for k in range(n_out)])


@pytest.mark.parametrize("pred,expected", [((29, 6), (0.16, 0.25)), ((179, 26), (0.98, 0.92))])
def test_build_report_table_rows(pred, expected):
    report = build_report(_events(*pred), (182, 24))
    assert report.total.acc_in == pytest.approx(expected[0], abs=0.02)
    assert report.total.acc_out == pytest.approx(expected[1], abs=0.02)


def test_report_json_layout():
    events = _events(2, 1, tunnel=0) + _events(1, 0, tunnel=5)
    report = build_report(events, (3, 2), tunnel_ids=[0, 5, 7])
    doc = json.loads(report.to_json())
    assert doc["total"] == {"pred_in": 3, "pred_out": 1, "gt_in": 3, "gt_out": 2,
                            "acc_in": 1.0, "acc_out": 0.5}
    assert [t["id"] for t in doc["tunnels"]] == [0, 5, 7]
    assert doc["tunnels"][2]["pred_in"] == 0


def test_report_without_ground_truth_is_flagged():
    doc = build_report(_events(1, 1), None).to_dict()
    assert doc["total"]["ground_truth_missing"] is True
    assert "acc_in" not in doc["total"]


def test_events_csv_roundtrip(tmp_path):
    events = _events(2, 2, tunnel=3)
    write_events_csv(events, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "frame,tunnel,direction"
    assert read_events_csv(tmp_path / "e.csv") == events


def test_ground_truth_csv(tmp_path):
    p = tmp_path / "gt.csv"
    p.write_text("step,direction\n13,in\n40,out\n70,in\n")
    assert read_ground_truth_csv(p) == (2, 1)
    p.write_text("step,direction\n13,sideways\n")
    with pytest.raises(DataError):
        read_ground_truth_csv(p)


def test_table_csv(tmp_path):
    report = build_report(_events(29, 6), (182, 24))
    write_table_csv(report, tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == ",Ground truth,CCV approach"
    assert rows[1] == "Bee in,182,29"
    assert rows[3] == "Accuracy in,-,0.16"
    assert rows[4] == "Accuracy out,-,0.25"
