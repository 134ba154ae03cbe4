"""Instance resolution from semantic scores, center offsets, and centers.

Each foreground (thing) pixel is shifted by its predicted offset and then
assigned to the Euclidean-nearest center.  Centers come from the user's
clicks when available, otherwise from peaks of the predicted center
heatmap.  The output is a label map that partitions thing pixels among
instances; background and stuff pixels stay 0.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ValidationError

FALLBACK_INSTANCE_ID = 1


@dataclass(frozen=True)
class PanopticPrediction:
    """Raw network (or classical predictor) outputs for one image."""

    semantic: np.ndarray  # (H, W, C) class scores, C >= 2, class 0 = stuff
    offsets: np.ndarray  # (H, W, 2) (drow, dcol) to the instance center
    center_heatmap: Optional[np.ndarray] = None  # (H, W) scores in [0, 1]

    def __post_init__(self):
        if self.semantic.ndim != 3 or self.semantic.shape[2] < 2:
            raise ValidationError(
                f"semantic scores must be (H, W, C>=2), got shape {self.semantic.shape}"
            )
        h, w = self.semantic.shape[:2]
        if self.offsets.shape != (h, w, 2):
            raise ValidationError(
                f"offsets shape {self.offsets.shape} does not match semantic {(h, w, 2)}"
            )
        if self.center_heatmap is not None and self.center_heatmap.shape != (h, w):
            raise ValidationError(
                f"center heatmap shape {self.center_heatmap.shape} does not match {(h, w)}"
            )

    @property
    def height(self) -> int:
        return self.semantic.shape[0]

    @property
    def width(self) -> int:
        return self.semantic.shape[1]


@dataclass(frozen=True)
class CenterSet:
    """Instance centers, either user clicks or heatmap peaks."""

    centers: tuple[tuple[float, float, int], ...]  # (row, col, instance_id)
    source: Literal["user_clicks", "predicted"]

    def __post_init__(self):
        ids = [c[2] for c in self.centers]
        if len(ids) != len(set(ids)):
            raise ValidationError("center instance ids must be unique")
        object.__setattr__(self, "centers", tuple((float(r), float(c), int(i)) for r, c, i in self.centers))

    def __len__(self) -> int:
        return len(self.centers)

    @classmethod
    def from_clicks(cls, clicks) -> "CenterSet":
        return cls(
            centers=tuple((c.row, c.col, c.instance_id) for c in clicks),
            source="user_clicks",
        )


@dataclass(frozen=True)
class FusionConfig:
    center_threshold: float = 0.1
    nms_window: int = 7
    top_k: int = 200
    empty_center_fallback: bool = True  # label orphan thing pixels instead of dropping them

    def __post_init__(self):
        if self.nms_window % 2 == 0 or self.nms_window < 1:
            raise ConfigurationError(f"nms_window must be odd and >= 1, got {self.nms_window}")
        if self.top_k < 0:
            raise ConfigurationError(f"top_k must be >= 0, got {self.top_k}")


def assign_instances(
    semantic_argmax: np.ndarray,
    offsets: np.ndarray,
    centers: CenterSet,
    empty_center_fallback: bool = True,
) -> np.ndarray:
    """Assign every thing pixel to its nearest regressed center.

    The regressed position of pixel p is ``p + offsets[p]``; distances are
    exact Euclidean on those continuous coordinates and ties go to the
    smallest instance id.  Without centers, thing pixels either collapse
    into one fallback instance or (fallback disabled) stay 0.
    """
    semantic_argmax = np.asarray(semantic_argmax)
    h, w = semantic_argmax.shape
    offsets = np.ascontiguousarray(np.asarray(offsets, dtype=np.float64))
    if offsets.shape != (h, w, 2):
        raise ValidationError(
            f"offsets shape {offsets.shape} does not match labels {(h, w, 2)}"
        )
    thing = np.ascontiguousarray((semantic_argmax > 0).astype(np.uint8))
    if len(centers) == 0:
        out = np.zeros((h, w), dtype=np.int32)
        if empty_center_fallback and thing.any():
            out[thing != 0] = FALLBACK_INSTANCE_ID
        return out
    order = sorted(centers.centers, key=lambda c: c[2])  # smallest id wins ties
    rows = np.array([c[0] for c in order], dtype=np.float64)
    cols = np.array([c[1] for c in order], dtype=np.float64)
    ids = np.array([c[2] for c in order], dtype=np.int32)
    return _kernels.assign_nearest(thing, offsets, rows, cols, ids)


def extract_centers(
    heatmap: np.ndarray,
    threshold: float = 0.1,
    nms_window: int = 7,
    top_k: int = 200,
) -> CenterSet:
    """Pick heatmap peaks as centers.

    A pixel is a peak when it strictly exceeds ``threshold`` and is the
    window maximum, with scan-order priority among equal values.  The
    strongest ``top_k`` peaks receive fresh instance ids 1..k in
    descending score order.
    """
    heatmap = np.ascontiguousarray(np.asarray(heatmap, dtype=np.float64))
    if heatmap.ndim != 2:
        raise ValidationError(f"heatmap must be single-channel, got shape {heatmap.shape}")
    if nms_window % 2 == 0:
        raise ConfigurationError(f"nms_window must be odd, got {nms_window}")
    peaks = _kernels.local_peaks(heatmap, float(threshold), int(nms_window))
    ii, jj = np.nonzero(peaks)
    if ii.size == 0:
        return CenterSet(centers=(), source="predicted")
    scores = heatmap[ii, jj]
    order = np.argsort(-scores, kind="stable")[:top_k]
    centers = tuple(
        (float(ii[k]), float(jj[k]), rank + 1) for rank, k in enumerate(order)
    )
    return CenterSet(centers=centers, source="predicted")


def fuse(
    prediction: PanopticPrediction,
    user_centers: Optional[CenterSet] = None,
    cfg: FusionConfig = FusionConfig(),
) -> np.ndarray:
    """Resolve a prediction into an instance label map.

    Click mode uses the user's centers directly; recovery mode extracts
    them from the predicted center heatmap.
    """
    if user_centers is None and prediction.center_heatmap is None:
        raise ConfigurationError("need user centers or a center heatmap to fuse")
    labels = np.argmax(prediction.semantic, axis=2)
    if user_centers is not None:
        centers = user_centers
    else:
        centers = extract_centers(
            prediction.center_heatmap, cfg.center_threshold, cfg.nms_window, cfg.top_k
        )
    return assign_instances(labels, prediction.offsets, centers, cfg.empty_center_fallback)
