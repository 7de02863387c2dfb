"""AVA-style annotation ingestion and reduced-partition construction.

Annotations are person-centric CSV rows sampled at 1 Hz:
``video_id,timestamp,x1,y1,x2,y2,action_id,person_id`` with corner
fractions in [0, 1]. A person at a keyframe may carry several rows, one
per action label.

Partitioning draws the earliest segments of each split (keeping per-video
temporal continuity), then iteratively removes every class with fewer than
``min_test`` test instances and refills the selection from the remaining
pool until the invariant holds: every retained class has at least
``min_test`` test samples. The procedure is deterministic; identical
inputs give byte-identical splits.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

DEFAULT_TARGET_SIZE = 15000
DEFAULT_MIN_TEST = 20

LABEL_TYPES = ("pose", "human-human", "human-object")


class ParseError(ValueError):
    """Malformed annotation input; ``lines`` holds offending line numbers."""

    def __init__(self, message: str, lines: Sequence[int] = ()):
        super().__init__(message)
        self.lines = tuple(lines)
        self.line = self.lines[0] if self.lines else None


@dataclass(frozen=True, order=True)
class AnnotationRecord:
    """One annotation CSV row: a single action label for a person-keyframe."""

    video_id: str
    timestamp: int
    x1: float
    y1: float
    x2: float
    y2: float
    action_id: int
    person_id: int

    @property
    def sample_key(self) -> tuple[str, int, int]:
        """Identity of the person-keyframe this label belongs to."""
        return (self.video_id, self.timestamp, self.person_id)


def _parse_row(row: list[str], line_no: int) -> AnnotationRecord:
    if len(row) != 8:
        raise ParseError(f"line {line_no}: expected 8 fields, got {len(row)}", [line_no])
    try:
        record = AnnotationRecord(
            video_id=row[0],
            timestamp=int(row[1]),
            x1=float(row[2]),
            y1=float(row[3]),
            x2=float(row[4]),
            y2=float(row[5]),
            action_id=int(row[6]),
            person_id=int(row[7]),
        )
    except ValueError as exc:
        raise ParseError(f"line {line_no}: {exc}", [line_no]) from None
    if not (0.0 <= record.x1 < record.x2 <= 1.0 and 0.0 <= record.y1 < record.y2 <= 1.0):
        raise ParseError(
            f"line {line_no}: box corners ({record.x1},{record.y1},{record.x2},{record.y2}) "
            "must satisfy 0 <= c1 < c2 <= 1",
            [line_no],
        )
    return record


def parse_annotations(path) -> list[AnnotationRecord]:
    """Read an annotation CSV; raises ParseError listing every bad line."""
    records = []
    problems: list[str] = []
    bad_lines: list[int] = []
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            try:
                records.append(_parse_row(row, line_no))
            except ParseError as exc:
                problems.append(str(exc))
                bad_lines.append(line_no)
    if problems:
        raise ParseError("; ".join(problems), bad_lines)
    return records


def write_annotations(records: Iterable[AnnotationRecord], path) -> None:
    """Write records back out in the 8-column CSV layout."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for r in records:
            writer.writerow(
                [r.video_id, r.timestamp, r.x1, r.y1, r.x2, r.y2, r.action_id, r.person_id]
            )


def parse_label_map(path) -> dict[int, tuple[str, str]]:
    """Read ``id,name,type`` lines; type is pose/human-human/human-object."""
    label_map: dict[int, tuple[str, str]] = {}
    problems: list[int] = []
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != 3 or row[2].strip() not in LABEL_TYPES:
                problems.append(line_no)
                continue
            try:
                label_map[int(row[0])] = (row[1].strip(), row[2].strip())
            except ValueError:
                problems.append(line_no)
    if problems:
        raise ParseError(
            f"label map lines {problems} must be 'id,name,type' with type in {LABEL_TYPES}",
            problems,
        )
    return label_map


def class_distribution(records: Iterable[AnnotationRecord]) -> list[tuple[int, int]]:
    """Per-class record counts, descending by count, ties by class index."""
    counts = Counter(r.action_id for r in records)
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


@dataclass
class PartitionReport:
    """Outcome summary of build_partition."""

    retained_classes: list[tuple[int, int, int]]  # (class, train count, test count)
    dropped_classes: list[tuple[int, str]]  # (class, reason)
    train_total: int
    test_total: int
    train_target: int
    test_target: int
    min_test: int
    train_insufficient: bool
    test_insufficient: bool
    distribution: list[tuple[int, int]] = field(default_factory=list)


def _selection_order(records: Sequence[AnnotationRecord]) -> list[AnnotationRecord]:
    # earliest segments across the split first; full tuple order keeps the
    # sort deterministic for equal timestamps
    return sorted(records, key=lambda r: (r.timestamp, r.video_id, r.person_id, r.action_id))


def _take(pool: Sequence[AnnotationRecord], target: int, dropped: set[int]) -> list:
    taken = []
    for record in pool:
        if len(taken) == target:
            break
        if record.action_id not in dropped:
            taken.append(record)
    return taken


def build_partition(
    train_pool: Sequence[AnnotationRecord],
    test_pool: Sequence[AnnotationRecord],
    target_size: int = DEFAULT_TARGET_SIZE,
    min_test: int = DEFAULT_MIN_TEST,
    test_fraction: float | None = None,
) -> tuple[list[AnnotationRecord], list[AnnotationRecord], PartitionReport]:
    """Draw temporally contiguous splits and prune rare classes.

    ``target_size`` is the per-split sample budget. With ``test_fraction``
    set, it is treated instead as a combined budget split
    ``round(target * fraction)`` test / remainder train.

    Classes whose selected test count falls below ``min_test`` are removed
    from both splits and the selection refills from later segments, until
    every surviving class meets the minimum. A pool too small to meet its
    budget degrades to "all available" and flags the report.
    """
    if not train_pool and not test_pool:
        raise ValueError("no records to partition")
    if target_size < 1:
        raise ValueError(f"target_size must be >= 1, got {target_size}")
    if min_test < 0:
        raise ValueError(f"min_test must be >= 0, got {min_test}")
    if test_fraction is None:
        train_target = test_target = target_size
    else:
        if not 0.0 < test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
        test_target = max(1, round(target_size * test_fraction))
        train_target = max(1, target_size - test_target)

    train_order = _selection_order(train_pool)
    test_order = _selection_order(test_pool)

    dropped: dict[int, str] = {}
    while True:
        train_sel = _take(train_order, train_target, set(dropped))
        test_sel = _take(test_order, test_target, set(dropped))
        test_counts = Counter(r.action_id for r in test_sel)
        present = set(test_counts) | {r.action_id for r in train_sel}
        bad = sorted(c for c in present if test_counts.get(c, 0) < min_test)
        if not bad:
            break
        for c in bad:
            dropped[c] = f"test_count={test_counts.get(c, 0)}<{min_test}"

    train_counts = Counter(r.action_id for r in train_sel)
    retained = sorted(set(train_counts) | set(test_counts))
    report = PartitionReport(
        retained_classes=[(c, train_counts.get(c, 0), test_counts.get(c, 0)) for c in retained],
        dropped_classes=sorted(dropped.items()),
        train_total=len(train_sel),
        test_total=len(test_sel),
        train_target=train_target,
        test_target=test_target,
        min_test=min_test,
        train_insufficient=len(train_sel) < train_target,
        test_insufficient=len(test_sel) < test_target,
        distribution=class_distribution(train_sel + test_sel),
    )
    return train_sel, test_sel, report


def format_report(report: PartitionReport) -> str:
    """Render a report as line-oriented ``key: value`` text."""
    lines = [
        f"train_total: {report.train_total}",
        f"test_total: {report.test_total}",
        f"train_target: {report.train_target}",
        f"test_target: {report.test_target}",
        f"min_test: {report.min_test}",
        f"train_insufficient: {str(report.train_insufficient).lower()}",
        f"test_insufficient: {str(report.test_insufficient).lower()}",
        f"retained_classes: {len(report.retained_classes)}",
        f"dropped_classes: {len(report.dropped_classes)}",
    ]
    for class_id, train_count, test_count in report.retained_classes:
        lines.append(f"retained {class_id}: train={train_count} test={test_count}")
    for class_id, reason in report.dropped_classes:
        lines.append(f"dropped {class_id}: {reason}")
    for class_id, count in report.distribution:
        lines.append(f"dist {class_id}: {count}")
    return "\n".join(lines) + "\n"
