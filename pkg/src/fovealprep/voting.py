"""Segment subsampling and score voting.

An annotated segment spans ~90 frames around a keyframe; rather than
classifying all of them, a handful of evenly spaced representative frames
(and flow windows starting at each) stand in for the segment. Per-frame
scores are then fused by voting: the pose head takes the majority argmax,
and each interaction head counts per-class scores above a threshold and
keeps its top three voted classes.

All tie-breaking is deterministic and order-invariant: vote counts first,
then higher mean score across the segment's frames, then lower class
index.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .multihead_loss import ScoreVector

DEFAULT_VOTE_THRESHOLD = 0.4
MAX_VOTED_CLASSES = 3


class EmptyScoreList(ValueError):
    """No per-frame scores were supplied for the segment."""


class HeadSizeMismatch(ValueError):
    """Per-frame score vectors disagree on a head's class count."""


@dataclass(frozen=True)
class SegmentSpec:
    """Geometry of one annotated segment and its subsampling."""

    frame_count: int = 90
    keyframe_index: int = 45
    samples: int = 5
    flow_depth: int = 10

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if not 0 <= self.keyframe_index < self.frame_count:
            raise ValueError(
                f"keyframe {self.keyframe_index} outside 0..{self.frame_count - 1}"
            )
        if not 1 <= self.samples <= self.frame_count:
            raise ValueError(f"samples must be in 1..{self.frame_count}, got {self.samples}")
        if self.flow_depth < 1:
            raise ValueError(f"flow_depth must be >= 1, got {self.flow_depth}")


@dataclass(frozen=True)
class SegmentPrediction:
    """Fused segment-level label: one pose, up to three per interaction head."""

    pose: int
    hh: tuple[int, ...]
    ho: tuple[int, ...]


def subsample_indices(spec: SegmentSpec) -> list[int]:
    """Evenly spaced representative frame indices centered on the keyframe.

    Spacing is frame_count // samples; an odd sample count includes the
    keyframe itself. Indices clamp into the segment, so a keyframe near a
    segment edge repeats boundary frames rather than leaving the segment.
    """
    step = spec.frame_count // spec.samples
    mid = (spec.samples - 1) / 2.0
    indices = []
    for i in range(spec.samples):
        raw = spec.keyframe_index + (i - mid) * step
        idx = int(math.floor(raw + 0.5))
        indices.append(min(max(idx, 0), spec.frame_count - 1))
    return indices


def flow_window(start: int, depth: int, frame_count: int) -> list[int]:
    """Frame indices start..start+depth-1, clamped so edge frames repeat."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if frame_count < 1:
        raise ValueError(f"frame_count must be >= 1, got {frame_count}")
    return [min(max(start + j, 0), frame_count - 1) for j in range(depth)]


def _majority_argmax(score_rows: np.ndarray) -> int:
    # per-frame argmax (ties -> lowest index), then majority (ties -> lowest index)
    votes = Counter(int(np.argmax(row)) for row in score_rows)
    return min(votes, key=lambda c: (-votes[c], c))


def _top_voted(score_rows: np.ndarray, threshold: float) -> tuple[int, ...]:
    votes = (score_rows > threshold).sum(axis=0)
    means = score_rows.mean(axis=0)
    candidates = [c for c in range(score_rows.shape[1]) if votes[c] >= 1]
    candidates.sort(key=lambda c: (-votes[c], -means[c], c))
    return tuple(candidates[:MAX_VOTED_CLASSES])


def _stack_head(frame_scores: Sequence[ScoreVector], head: str) -> np.ndarray:
    sizes = {getattr(sv, head).size for sv in frame_scores}
    if len(sizes) != 1:
        raise HeadSizeMismatch(f"{head} sizes differ across frames: {sorted(sizes)}")
    return np.stack([getattr(sv, head) for sv in frame_scores])


def aggregate_votes(
    frame_scores: Sequence[ScoreVector], threshold: float = DEFAULT_VOTE_THRESHOLD
) -> SegmentPrediction:
    """Fuse per-frame scores into one segment prediction.

    Interaction-head scores are expected to be probabilities in [0, 1]; a
    class earns one vote per frame whose score is strictly above the
    threshold, and each head keeps its top three voted classes (possibly
    none). The pose head is a majority vote over per-frame argmaxes.
    """
    if not frame_scores:
        raise EmptyScoreList("need at least one frame of scores")
    pose_rows = _stack_head(frame_scores, "pose_logits")
    if pose_rows.shape[1] == 0:
        raise HeadSizeMismatch("pose head must have at least one class")
    return SegmentPrediction(
        pose=_majority_argmax(pose_rows),
        hh=_top_voted(_stack_head(frame_scores, "hh_logits"), threshold),
        ho=_top_voted(_stack_head(frame_scores, "ho_logits"), threshold),
    )


def aggregate_votes_single_label(frame_scores: Sequence, classes: int) -> int:
    """Majority of per-frame argmaxes for single-label datasets."""
    if classes < 1:
        raise ValueError(f"classes must be >= 1, got {classes}")
    if len(frame_scores) == 0:
        raise EmptyScoreList("need at least one frame of scores")
    rows = np.asarray(frame_scores, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != classes:
        raise HeadSizeMismatch(
            f"expected {len(frame_scores)}x{classes} scores, got shape {rows.shape}"
        )
    return _majority_argmax(rows)
