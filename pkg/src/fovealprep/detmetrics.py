"""IoU, per-class average precision, and mean AP over segment detections.

Detections match ground truth only within the same segment, and only when
box IoU reaches the threshold (0.5 by default). Matching is greedy in
descending score order against the highest-IoU still-unmatched ground
truth; equal scores keep insertion order. AP integrates the
precision-recall curve under the standard precision envelope; an 11-point
interpolation is available for cross-checking against older tooling.

Classes without ground truth have undefined AP and are left out of the
mean.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from math import isfinite
from typing import Iterable, Sequence

import numpy as np

from .imgcore import BoundingBox


class NoGroundTruth(ValueError):
    """mAP is undefined: no class has any ground truth."""


@dataclass(frozen=True)
class Detection:
    segment_id: str
    box: BoundingBox
    class_id: int
    score: float

    def __post_init__(self) -> None:
        if not isfinite(self.score):
            raise ValueError(f"detection score must be finite, got {self.score}")


@dataclass(frozen=True)
class GroundTruth:
    segment_id: str
    box: BoundingBox
    class_id: int


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    iw = min(a.x2, b.x2) - ix
    ih = min(a.y2, b.y2) - iy
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thr: float
) -> np.ndarray:
    """True/false-positive flags for dets (already one class, sorted by score)."""
    gt_by_segment: dict[str, list[int]] = defaultdict(list)
    for idx, gt in enumerate(gts):
        gt_by_segment[gt.segment_id].append(idx)
    matched = [False] * len(gts)
    tp = np.zeros(len(dets), dtype=bool)
    for i, det in enumerate(dets):
        best_iou = 0.0
        best_idx = -1
        for idx in gt_by_segment.get(det.segment_id, ()):
            if matched[idx]:
                continue
            overlap = iou(det.box, gts[idx].box)
            if overlap > best_iou:
                best_iou = overlap
                best_idx = idx
        if best_idx >= 0 and best_iou >= iou_thr:
            matched[best_idx] = True
            tp[i] = True
    return tp


def _envelope_area(recall: np.ndarray, precision: np.ndarray) -> float:
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    changed = np.where(mrec[1:] != mrec[:-1])[0] + 1
    return float(np.sum((mrec[changed] - mrec[changed - 1]) * mpre[changed]))


def _eleven_point(recall: np.ndarray, precision: np.ndarray) -> float:
    total = 0.0
    for t in np.linspace(0.0, 1.0, 11):
        above = precision[recall >= t]
        total += above.max() if above.size else 0.0
    return total / 11.0


def average_precision(
    dets: Iterable[Detection],
    gts: Iterable[GroundTruth],
    class_id: int,
    iou_thr: float = 0.5,
    eleven_point: bool = False,
) -> float | None:
    """AP for one class, or None when the class has no ground truth."""
    gts_c = [g for g in gts if g.class_id == class_id]
    if not gts_c:
        return None
    dets_c = sorted(
        (d for d in dets if d.class_id == class_id), key=lambda d: -d.score
    )
    if not dets_c:
        return 0.0
    tp = _match_detections(dets_c, gts_c, iou_thr)
    cum_tp = np.cumsum(tp)
    recall = cum_tp / len(gts_c)
    precision = cum_tp / np.arange(1, len(dets_c) + 1)
    if eleven_point:
        return _eleven_point(recall, precision)
    return _envelope_area(recall, precision)


def mean_ap(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thr: float = 0.5,
    eleven_point: bool = False,
) -> tuple[float, dict[int, float]]:
    """Unweighted mean AP over classes with ground truth, plus the per-class table."""
    classes = sorted({g.class_id for g in gts})
    if not classes:
        raise NoGroundTruth("no class has ground truth")
    per_class = {
        c: average_precision(dets, gts, c, iou_thr=iou_thr, eleven_point=eleven_point)
        for c in classes
    }
    return float(np.mean(list(per_class.values()))), per_class


def _corner_box(x1: float, y1: float, x2: float, y2: float, line_no: int) -> BoundingBox:
    if not (x2 > x1 and y2 > y1):
        raise ValueError(f"line {line_no}: corners ({x1},{y1})..({x2},{y2}) are not ordered")
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def _looks_like_header(row: list[str]) -> bool:
    if len(row) < 2:
        return False
    try:
        float(row[1])
    except ValueError:
        return True
    return False


def read_detections(path) -> list[Detection]:
    """Read ``segment_id,x1,y1,x2,y2,class_id,score`` rows."""
    dets = []
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or (line_no == 1 and _looks_like_header(row)):
                continue
            if len(row) != 7:
                raise ValueError(f"line {line_no}: expected 7 fields, got {len(row)}")
            box = _corner_box(*(float(v) for v in row[1:5]), line_no)
            dets.append(Detection(row[0], box, int(row[5]), float(row[6])))
    return dets


def read_ground_truth(path) -> list[GroundTruth]:
    """Read ``segment_id,x1,y1,x2,y2,class_id`` rows."""
    gts = []
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or (line_no == 1 and _looks_like_header(row)):
                continue
            if len(row) != 6:
                raise ValueError(f"line {line_no}: expected 6 fields, got {len(row)}")
            box = _corner_box(*(float(v) for v in row[1:5]), line_no)
            gts.append(GroundTruth(row[0], box, int(row[5])))
    return gts
