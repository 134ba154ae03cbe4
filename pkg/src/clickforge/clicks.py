"""Click encoding: Gaussian transform maps, click derivation, and jitter.

A click is turned into a single-channel map holding a unit-peak 2-D
Gaussian (sigma 8 pixels by default) so it can ride along with the RGB
channels as network input.  When an annotation carries no usable stem
keypoint, a click is derived from the mask: center of mass if it lands
inside, otherwise a random pixel of the deepest non-empty erosion level.
Training-time annotator noise is simulated by resampling uniform offsets
of up to ``jitter_radius`` pixels until the click stays inside the mask.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ValidationError
from .raster import InstanceAnnotation

Polarity = Literal["pos", "neg"]


@dataclass(frozen=True)
class Click:
    row: int
    col: int
    instance_id: int
    polarity: Polarity = "pos"

    def __post_init__(self):
        if self.instance_id <= 0:
            raise ValidationError(f"click instance_id must be positive, got {self.instance_id}")
        if self.polarity not in ("pos", "neg"):
            raise ValidationError(f"polarity must be 'pos' or 'neg', got {self.polarity!r}")

    def to_json(self) -> dict:
        return {
            "row": int(self.row),
            "col": int(self.col),
            "instance_id": int(self.instance_id),
            "polarity": self.polarity,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Click":
        try:
            return cls(
                row=int(doc["row"]),
                col=int(doc["col"]),
                instance_id=int(doc["instance_id"]),
                polarity=doc.get("polarity", "pos"),
            )
        except KeyError as exc:
            raise ValidationError(f"click JSON missing field {exc}") from exc


@dataclass(frozen=True)
class EncodingConfig:
    sigma: float = 8.0
    jitter_radius: int = 10
    combine_rule: Literal["max", "sum"] = "max"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if self.jitter_radius < 0:
            raise ValidationError(f"jitter_radius must be >= 0, got {self.jitter_radius}")
        if self.combine_rule not in ("max", "sum"):
            raise ValidationError(f"combine_rule must be 'max' or 'sum', got {self.combine_rule!r}")


def _check_bounds(clicks: Sequence[Click], height: int, width: int):
    for click in clicks:
        if not (0 <= click.row < height and 0 <= click.col < width):
            raise ValidationError(
                f"click ({click.row}, {click.col}) outside {height}x{width} image"
            )


def gaussian_click_map(
    height: int, width: int, clicks: Sequence[Click], cfg: EncodingConfig = EncodingConfig()
) -> np.ndarray:
    """Render clicks into one [0, 1] channel of unit-peak Gaussians.

    Multiple clicks combine pixelwise with ``cfg.combine_rule`` (max keeps
    the channel in [0, 1]); an empty click list yields an all-zero map.
    """
    _check_bounds(clicks, height, width)
    rows = np.array([c.row for c in clicks], dtype=np.float64)
    cols = np.array([c.col for c in clicks], dtype=np.float64)
    return _kernels.gaussian_map(height, width, rows, cols, cfg.sigma, cfg.combine_rule == "max")


def full_click_map(
    positive: Click,
    all_clicks: Sequence[Click],
    height: int,
    width: int,
    cfg: EncodingConfig = EncodingConfig(),
) -> np.ndarray:
    """Render the combined map of all N clicks (input channel 5).

    ``positive`` must be one of ``all_clicks``; with N=1 the result equals
    the positive-only map.
    """
    if not any(
        c.row == positive.row and c.col == positive.col and c.instance_id == positive.instance_id
        for c in all_clicks
    ):
        raise ValidationError("positive click is not among all_clicks")
    return gaussian_click_map(height, width, all_clicks, cfg)


def jitter_click(
    click: Click, mask: np.ndarray, cfg: EncodingConfig, rng: np.random.Generator
) -> Click:
    """Displace a click by uniform integer noise, rejecting positions
    outside the mask.  Deterministic for a given generator state."""
    mask = np.asarray(mask)
    h, w = mask.shape
    if not (0 <= click.row < h and 0 <= click.col < w) or mask[click.row, click.col] == 0:
        raise ValidationError(f"click ({click.row}, {click.col}) is not inside the mask")
    r = cfg.jitter_radius
    if r == 0:
        return click
    while True:
        dr = int(rng.integers(-r, r + 1))
        dc = int(rng.integers(-r, r + 1))
        nr, nc = click.row + dr, click.col + dc
        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] != 0:
            return Click(nr, nc, click.instance_id, click.polarity)


def binary_erode(mask: np.ndarray) -> np.ndarray:
    """One 3x3 erosion step; pixels outside the image count as background."""
    mask = np.ascontiguousarray(np.asarray(mask, dtype=np.uint8))
    return _kernels.erode3x3(mask)


def erosion_deepest_set(mask: np.ndarray) -> np.ndarray:
    """Last non-empty mask before repeated 3x3 erosion reaches empty."""
    current = np.asarray(mask, dtype=np.uint8)
    if not current.any():
        raise ValidationError("mask has no foreground pixels")
    while True:
        nxt = binary_erode(current)
        if not nxt.any():
            return current
        current = nxt


def derive_click(
    annotation: InstanceAnnotation, rng: Optional[np.random.Generator] = None
) -> Click:
    """Pick a click position for an annotation.

    Preference order: the stored keypoint if it lies inside the mask, the
    integer-rounded center of mass if inside, otherwise a uniformly random
    pixel of the deepest erosion level (always inside the mask).
    """
    mask = annotation.mask
    if annotation.keypoint is not None:
        r, c = annotation.keypoint
        if mask[r, c] != 0:
            return Click(r, c, annotation.instance_id)
    ii, jj = np.nonzero(mask)
    com_r = int(np.rint(ii.mean()))
    com_c = int(np.rint(jj.mean()))
    if mask[com_r, com_c] != 0:
        return Click(com_r, com_c, annotation.instance_id)
    deepest = erosion_deepest_set(mask)
    di, dj = np.nonzero(deepest)
    rng = rng if rng is not None else np.random.default_rng()
    pick = int(rng.integers(0, di.size))
    return Click(int(di[pick]), int(dj[pick]), annotation.instance_id)
