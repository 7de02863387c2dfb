"""Three-head classification loss for person-centric action labels.

A label is one pose class (mutually exclusive) plus up to three
human-human and up to three human-object interaction classes (independent
binaries). The combined loss is softmax cross-entropy over the pose head
plus per-class binary cross-entropies over each interaction head, and its
gradient is analytic: softmax(s) - onehot(t) for the pose head and
sigmoid(s) - t per binary class.

Everything here runs in float64 regardless of input dtype so analytic
gradients survive central-difference verification. A plain softmax
cross-entropy alias covers single-label datasets (e.g. UCF101-24), and a
flat sum-of-sigmoids variant is kept as a comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

MAX_LABELS_PER_INTERACTION_HEAD = 3


class TargetOutOfRange(ValueError):
    """Pose/class target index outside the logit vector."""


class LengthMismatch(ValueError):
    """Logit and target vectors disagree in length."""


def _as_float64_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LabelVector:
    """One sample's ground truth: a pose index plus two binary heads."""

    pose: int
    hh: tuple[int, ...]
    ho: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hh", tuple(int(b) for b in self.hh))
        object.__setattr__(self, "ho", tuple(int(b) for b in self.ho))
        if self.pose < 0:
            raise ValueError(f"pose index must be >= 0, got {self.pose}")
        for name, head in (("hh", self.hh), ("ho", self.ho)):
            if any(b not in (0, 1) for b in head):
                raise ValueError(f"{name} must be a 0/1 vector, got {head}")
            if sum(head) > MAX_LABELS_PER_INTERACTION_HEAD:
                raise ValueError(
                    f"{name} allows at most {MAX_LABELS_PER_INTERACTION_HEAD} "
                    f"positive labels, got {sum(head)}"
                )

    @classmethod
    def from_indices(
        cls,
        pose: int,
        hh_ids: Sequence[int],
        ho_ids: Sequence[int],
        hh_size: int,
        ho_size: int,
    ) -> "LabelVector":
        """Build binary head vectors from lists of positive class indices."""
        hh = [0] * hh_size
        ho = [0] * ho_size
        for i in hh_ids:
            hh[i] = 1
        for i in ho_ids:
            ho[i] = 1
        return cls(pose=pose, hh=tuple(hh), ho=tuple(ho))


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-head real-valued predictions for one frame/person."""

    pose_logits: np.ndarray
    hh_logits: np.ndarray
    ho_logits: np.ndarray

    def __post_init__(self) -> None:
        for name in ("pose_logits", "hh_logits", "ho_logits"):
            arr = _as_float64_vector(getattr(self, name), name)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def softmax_ce(logits, target: int) -> float:
    """-log softmax(logits)[target], computed with max subtraction."""
    z = _as_float64_vector(logits, "logits")
    if z.size == 0:
        raise ValueError("logits must be nonempty")
    if not 0 <= target < z.size:
        raise TargetOutOfRange(f"target {target} outside 0..{z.size - 1}")
    m = z.max()
    return float(np.log(np.exp(z - m).sum()) + m - z[target])


def bce_sigmoid(logits, targets) -> float:
    """Sum over classes of stable binary cross-entropy with logits."""
    s = _as_float64_vector(logits, "logits")
    t = _as_float64_vector(targets, "targets")
    if s.size != t.size:
        raise LengthMismatch(f"{s.size} logits vs {t.size} targets")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValueError("targets must be 0/1")
    # per class: max(s,0) - s*t + log(1 + exp(-|s|))
    return float(np.sum(np.maximum(s, 0.0) - s * t + np.log1p(np.exp(-np.abs(s)))))


def generalized_binary_loss(scores: ScoreVector, label: LabelVector) -> float:
    """Pose cross-entropy plus both interaction-head binary cross-entropies."""
    return (
        softmax_ce(scores.pose_logits, label.pose)
        + bce_sigmoid(scores.hh_logits, label.hh)
        + bce_sigmoid(scores.ho_logits, label.ho)
    )


class HeadGradients(NamedTuple):
    pose: np.ndarray
    hh: np.ndarray
    ho: np.ndarray


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def generalized_binary_loss_grad(scores: ScoreVector, label: LabelVector) -> HeadGradients:
    """Analytic gradients w.r.t. each head's logits."""
    z = scores.pose_logits
    if z.size == 0:
        raise ValueError("pose logits must be nonempty")
    if not 0 <= label.pose < z.size:
        raise TargetOutOfRange(f"pose {label.pose} outside 0..{z.size - 1}")
    e = np.exp(z - z.max())
    pose_grad = e / e.sum()
    pose_grad[label.pose] -= 1.0

    def binary_grad(logits: np.ndarray, targets: tuple[int, ...]) -> np.ndarray:
        t = np.asarray(targets, dtype=np.float64)
        if logits.size != t.size:
            raise LengthMismatch(f"{logits.size} logits vs {t.size} targets")
        return _sigmoid(logits) - t

    return HeadGradients(
        pose=pose_grad,
        hh=binary_grad(scores.hh_logits, label.hh),
        ho=binary_grad(scores.ho_logits, label.ho),
    )


def single_head_loss(logits, target: int) -> float:
    """Single softmax head for datasets with exactly one label per sample."""
    return softmax_ce(logits, target)


def sum_of_sigmoids_loss(scores: ScoreVector, label: LabelVector) -> float:
    """Baseline that flattens all heads into independent binaries.

    The pose target becomes a one-hot slice of the flat binary vector; kept
    only for comparison against the three-head loss.
    """
    pose_targets = np.zeros(scores.pose_logits.size)
    if not 0 <= label.pose < pose_targets.size:
        raise TargetOutOfRange(f"pose {label.pose} outside 0..{pose_targets.size - 1}")
    pose_targets[label.pose] = 1.0
    flat_logits = np.concatenate([scores.pose_logits, scores.hh_logits, scores.ho_logits])
    flat_targets = np.concatenate([pose_targets, label.hh, label.ho])
    return bce_sigmoid(flat_logits, flat_targets)
