"""Training objectives and their analytic gradients.

Class weights follow the inverse-log-frequency rule
``w_c = 1 / ln(a_c / a_bg + 1.02)`` computed from aggregate pixel areas of
the training split, so rare classes weigh more.  Semantic scores train
with that weighted cross entropy, offsets with foreground-masked L1, and
the center heatmap with plain MSE.  Every loss returns ``(value, grad)``
with the gradient taken w.r.t. the prediction, and all math is float64.
"""

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import ValidationError

WEIGHT_LOG_OFFSET = 1.02

DEFAULT_HEAD_WEIGHTS = {"semantic": 1.0, "offset": 0.01, "center": 200.0}


@dataclass(frozen=True)
class ClassAreaStats:
    """Aggregate pixel areas per class over a training split."""

    areas: Mapping[int, int]  # thing class id -> pixel count
    background_area: int

    def __post_init__(self):
        if self.background_area <= 0:
            raise ValidationError("background area must be positive")
        if any(a < 0 for a in self.areas.values()):
            raise ValidationError("class areas must be non-negative")
        object.__setattr__(self, "areas", dict(self.areas))


def class_weights(stats: ClassAreaStats) -> dict[int, float]:
    """Inverse-log-frequency weights; background (class 0) weighs as if
    its area ratio were 1."""
    weights = {0: 1.0 / math.log(1.0 + WEIGHT_LOG_OFFSET)}
    for cid, area in stats.areas.items():
        weights[cid] = 1.0 / math.log(area / stats.background_area + WEIGHT_LOG_OFFSET)
    return weights


@dataclass(frozen=True)
class LossBreakdown:
    semantic: float
    offset: float = 0.0
    center: Optional[float] = None
    head_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_HEAD_WEIGHTS))
    total: float = field(init=False)

    def __post_init__(self):
        total = self.head_weights["semantic"] * self.semantic
        total += self.head_weights.get("offset", 0.0) * self.offset
        if self.center is not None:
            total += self.head_weights.get("center", 0.0) * self.center
        object.__setattr__(self, "total", float(total))


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def weighted_cross_entropy(
    class_scores: np.ndarray, target: np.ndarray, weights: Mapping[int, float]
) -> tuple[float, np.ndarray]:
    """Pixel-mean cross entropy with per-class weights.

    Returns the loss and its gradient w.r.t. the raw class scores.
    """
    scores = np.asarray(class_scores, dtype=np.float64)
    target = np.asarray(target)
    if scores.shape[:2] != target.shape:
        raise ValidationError(
            f"scores {scores.shape} and target {target.shape} disagree on H, W"
        )
    present = np.unique(target)
    missing = [int(c) for c in present if int(c) not in weights]
    if missing:
        raise ValidationError(f"no class weight for target labels {missing}")
    h, w, c = scores.shape
    wmap = np.zeros(int(present.max()) + 1, dtype=np.float64)
    for cid in present:
        wmap[int(cid)] = weights[int(cid)]
    pixel_w = wmap[target]
    logp = log_softmax(scores)
    onehot = np.eye(c, dtype=np.float64)[target]
    loss = float(-(pixel_w * np.take_along_axis(logp, target[..., None], axis=2)[..., 0]).mean())
    grad = pixel_w[..., None] * (np.exp(logp) - onehot) / (h * w)
    return loss, grad


def offset_loss(
    pred_offsets: np.ndarray, target_offsets: np.ndarray, fg_mask: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean absolute error over foreground pixels and both channels."""
    pred = np.asarray(pred_offsets, dtype=np.float64)
    target = np.asarray(target_offsets, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValidationError(f"offset shapes disagree: {pred.shape} vs {target.shape}")
    fg = np.asarray(fg_mask) != 0
    if fg.shape != pred.shape[:2]:
        raise ValidationError(f"fg mask shape {fg.shape} does not match {pred.shape[:2]}")
    n = int(fg.sum())
    grad = np.zeros_like(pred)
    if n == 0:
        return 0.0, grad
    diff = (pred - target) * fg[..., None]
    loss = float(np.abs(diff).sum() / (2 * n))
    grad[fg] = np.sign(diff[fg]) / (2 * n)
    return loss, grad


def center_loss(pred_heatmap: np.ndarray, target_heatmap: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all pixels."""
    pred = np.asarray(pred_heatmap, dtype=np.float64)
    target = np.asarray(target_heatmap, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValidationError(f"heatmap shapes disagree: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float((diff**2).mean())
    return loss, 2.0 * diff / diff.size
