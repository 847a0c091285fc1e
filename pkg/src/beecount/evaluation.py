"""
YOLO annotations, per-class totals and counting accuracy reports.

Ground-truth crossings are the totals of the ``bee_complete_in`` and
``bee_complete_out`` boxes of an annotation split. Accuracy of a count is
``1 - |predicted - truth| / truth``; it is 1.0 for an exact count, 0.0
when nothing (or twice the truth) was counted, and negative beyond that.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import AnnotationError, DataError
from .tracker import CrossingEvent, Direction

DEFAULT_CLASS_NAMES = (
    "bee_abdomen",
    "bee_cluster",
    "bee_complete_in",
    "bee_complete_out",
    "bee_head",
)
IN_CLASS = "bee_complete_in"
OUT_CLASS = "bee_complete_out"


@dataclass(frozen=True)
class ClassMap:
    names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self) -> None:
        names = tuple(self.names)
        if len(names) != 5 or len(set(names)) != 5:
            raise AnnotationError(f"class map needs exactly 5 unique names, got {names}")
        object.__setattr__(self, "names", names)

    def name(self, class_id: int) -> str:
        return self.names[class_id]

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_file(cls, path: str | Path) -> "ClassMap":
        """One class name per line; the line index is the class id."""
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise AnnotationError(f"cannot read class map {path}: {exc}") from exc
        return cls(tuple(line.strip() for line in lines if line.strip()))


@dataclass(frozen=True)
class AnnotationRecord:
    class_id: int
    x_center: float
    y_center: float
    width: float
    height: float


def parse_annotation_line(line: str, lineno: int = 1, source: str = "<string>",
                          n_classes: int = 5) -> AnnotationRecord:
    parts = line.split()
    if len(parts) != 5:
        raise AnnotationError(f"{source}:{lineno}: expected 5 fields, got {len(parts)}")
    try:
        class_id = int(parts[0])
        coords = [float(v) for v in parts[1:]]
    except ValueError as exc:
        raise AnnotationError(f"{source}:{lineno}: malformed line {line.strip()!r}") from exc
    if not 0 <= class_id < n_classes:
        raise AnnotationError(
            f"{source}:{lineno}: class id {class_id} outside [0, {n_classes - 1}]"
        )
    for value in coords:
        if not (0.0 <= value <= 1.0) or math.isnan(value):
            raise AnnotationError(f"{source}:{lineno}: coordinate {value} outside [0, 1]")
    return AnnotationRecord(class_id, *coords)


def parse_annotation_file(path: str | Path, n_classes: int = 5) -> list[AnnotationRecord]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise AnnotationError(f"cannot read annotation file {path}: {exc}") from exc
    return [
        parse_annotation_line(line, i, str(path), n_classes)
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]


def aggregate_counts(annotation_dir: str | Path,
                     class_map: ClassMap | None = None) -> dict[str, int]:
    """Per-class box totals over every ``*.txt`` file of ``annotation_dir``.

    The result maps each class name to its count (zeros included) plus a
    ``"total"`` entry. ``classes.txt`` files are skipped.
    """
    class_map = class_map or ClassMap()
    annotation_dir = Path(annotation_dir)
    if not annotation_dir.is_dir():
        raise AnnotationError(f"annotation directory not found: {annotation_dir}")
    counts: Counter[int] = Counter()
    for path in sorted(annotation_dir.glob("*.txt")):
        if path.name == "classes.txt":
            continue
        counts.update(r.class_id for r in parse_annotation_file(path, len(class_map)))
    totals = {name: counts.get(i, 0) for i, name in enumerate(class_map.names)}
    totals["total"] = sum(counts.values())
    return totals


def ground_truth_crossings(totals: Mapping[str, int]) -> tuple[int, int]:
    return int(totals[IN_CLASS]), int(totals[OUT_CLASS])


def count_accuracy(predicted: int, ground_truth: int) -> float:
    if ground_truth <= 0:
        raise DataError("accuracy undefined for a ground truth of zero")
    return 1.0 - abs(predicted - ground_truth) / ground_truth


@dataclass
class DirectionCounts:
    pred_in: int
    pred_out: int
    gt_in: int | None = None
    gt_out: int | None = None

    @property
    def has_ground_truth(self) -> bool:
        return self.gt_in is not None and self.gt_out is not None

    def _accuracy(self, pred: int, gt: int | None) -> float | None:
        if gt is None or gt <= 0:
            return None
        return count_accuracy(pred, gt)

    @property
    def acc_in(self) -> float | None:
        return self._accuracy(self.pred_in, self.gt_in)

    @property
    def acc_out(self) -> float | None:
        return self._accuracy(self.pred_out, self.gt_out)

    def to_dict(self) -> dict:
        out = {"pred_in": self.pred_in, "pred_out": self.pred_out}
        if self.has_ground_truth:
            out.update(gt_in=self.gt_in, gt_out=self.gt_out)
            out.update(acc_in=self.acc_in, acc_out=self.acc_out)
        else:
            out["ground_truth_missing"] = True
        return out


@dataclass
class CountReport:
    total: DirectionCounts
    tunnels: dict[int, DirectionCounts] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tunnels": [{"id": tid, **c.to_dict()} for tid, c in sorted(self.tunnels.items())],
            "total": self.total.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def count_events(events: Iterable[CrossingEvent]) -> dict[int, tuple[int, int]]:
    per_tunnel: dict[int, list[int]] = {}
    for ev in events:
        slot = per_tunnel.setdefault(ev.tunnel_id, [0, 0])
        slot[0 if Direction(ev.direction) is Direction.IN else 1] += 1
    return {tid: (c[0], c[1]) for tid, c in per_tunnel.items()}


def build_report(events: Iterable[CrossingEvent],
                 ground_truth: tuple[int, int] | None = None,
                 tunnel_ids: Sequence[int] = (),
                 tunnel_ground_truth: Mapping[int, tuple[int, int]] | None = None) -> CountReport:
    """Aggregate crossing events into per-tunnel and total counts.

    ``ground_truth`` is the ``(in, out)`` total; without it the report is
    emitted with ``ground_truth_missing`` and no accuracies.
    """
    per_tunnel = count_events(events)
    tunnel_ground_truth = tunnel_ground_truth or {}
    tunnels = {}
    for tid in sorted(set(tunnel_ids) | set(per_tunnel)):
        pin, pout = per_tunnel.get(tid, (0, 0))
        gin, gout = tunnel_ground_truth.get(tid, (None, None))
        tunnels[tid] = DirectionCounts(pin, pout, gin, gout)
    total_in = sum(c.pred_in for c in tunnels.values())
    total_out = sum(c.pred_out for c in tunnels.values())
    gin, gout = ground_truth if ground_truth is not None else (None, None)
    return CountReport(DirectionCounts(total_in, total_out, gin, gout), tunnels)


def report_from_counts(pred_in: int, pred_out: int,
                       ground_truth: tuple[int, int] | None) -> CountReport:
    gin, gout = ground_truth if ground_truth is not None else (None, None)
    return CountReport(DirectionCounts(pred_in, pred_out, gin, gout))


def write_table_csv(report: CountReport, path: str | Path, method: str = "CCV approach") -> None:
    """Table layout: rows Bee in / Bee out / Accuracy in / Accuracy out."""
    t = report.total

    def fmt(v):
        return "-" if v is None else (f"{v:.2f}" if isinstance(v, float) else str(v))

    rows = [
        ("Bee in", fmt(t.gt_in), fmt(t.pred_in)),
        ("Bee out", fmt(t.gt_out), fmt(t.pred_out)),
        ("Accuracy in", "-", fmt(t.acc_in)),
        ("Accuracy out", "-", fmt(t.acc_out)),
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["", "Ground truth", method])
        writer.writerows(rows)


def write_events_csv(events: Iterable[CrossingEvent], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "tunnel", "direction"])
        for ev in events:
            writer.writerow([ev.frame_step, ev.tunnel_id, Direction(ev.direction).value])


def read_events_csv(path: str | Path) -> list[CrossingEvent]:
    events = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for i, row in enumerate(reader, start=2):
                try:
                    events.append(CrossingEvent(int(row["tunnel"]), int(row["frame"]),
                                                Direction(row["direction"].strip())))
                except (KeyError, ValueError, TypeError, AttributeError) as exc:
                    raise DataError(f"{path}:{i}: bad event row {row}") from exc
    except OSError as exc:
        raise DataError(f"cannot read events {path}: {exc}") from exc
    return events


def read_ground_truth_csv(path: str | Path) -> tuple[int, int]:
    """Count ``in``/``out`` rows of a ``step,direction`` ground-truth log."""
    n_in = n_out = 0
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    direction = Direction(row["direction"].strip())
                except (KeyError, ValueError, AttributeError) as exc:
                    raise DataError(f"{path}:{i}: bad ground-truth row {row}") from exc
                if direction is Direction.IN:
                    n_in += 1
                else:
                    n_out += 1
    except OSError as exc:
        raise DataError(f"cannot read ground truth {path}: {exc}") from exc
    return n_in, n_out
