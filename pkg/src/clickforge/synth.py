"""Synthetic plant-scene generator for desk-scale training and tests.

Scenes are soil-textured backgrounds with elliptical plant blobs in two
colour families (crop: green, weed: yellow-green).  Later objects occlude
earlier ones, so the stored masks are mutually disjoint like a panoptic
label.  Generation is deterministic in (seed, index).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clicks import Click, derive_click
from .errors import ValidationError
from .raster import InstanceAnnotation, Scene

CROP_CLASS = 1
WEED_CLASS = 2


@dataclass(frozen=True)
class SynthConfig:
    height: int = 64
    width: int = 64
    min_objects: int = 4
    max_objects: int = 8
    min_radius: float = 4.0
    max_radius: float = 9.0
    min_separation: float = 16.0  # between object centers, in pixels
    noise: float = 10.0  # 8-bit background/foreground texture amplitude
    seed: int = 0

    def __post_init__(self):
        if self.min_objects < 1 or self.max_objects < self.min_objects:
            raise ValidationError("need 1 <= min_objects <= max_objects")
        if self.min_radius < 1 or self.max_radius < self.min_radius:
            raise ValidationError("need 1 <= min_radius <= max_radius")
        margin = 2 * int(np.ceil(self.max_radius))
        if self.height <= margin or self.width <= margin:
            raise ValidationError("image too small for the configured object radii")


_SOIL = np.array([105.0, 82.0, 58.0])
_CROP_BASE = np.array([45.0, 150.0, 55.0])
_WEED_BASE = np.array([140.0, 165.0, 45.0])


def _ellipse_mask(height, width, center, axes, theta):
    rr = np.arange(height)[:, None] - center[0]
    cc = np.arange(width)[None, :] - center[1]
    ct, st = np.cos(theta), np.sin(theta)
    u = (rr * ct + cc * st) / axes[0]
    v = (-rr * st + cc * ct) / axes[1]
    return (u * u + v * v) <= 1.0


def gen_scene(cfg: SynthConfig, index: int) -> tuple[Scene, tuple[Click, ...]]:
    """Build scene ``index`` of the stream seeded by ``cfg.seed``; returns
    the scene plus one derived click per instance."""
    rng = np.random.default_rng([cfg.seed, index])
    h, w = cfg.height, cfg.width
    count = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
    margin = cfg.max_radius
    centers: list[tuple[float, float]] = []
    specs = []
    for k in range(count):
        for _ in range(60):
            r = rng.uniform(margin, h - margin)
            c = rng.uniform(margin, w - margin)
            if all((r - pr) ** 2 + (c - pc) ** 2 >= cfg.min_separation**2 for pr, pc in centers):
                break
        centers.append((r, c))
        axes = rng.uniform(cfg.min_radius, cfg.max_radius, size=2)
        theta = rng.uniform(0, np.pi)
        class_id = CROP_CLASS if rng.random() < 0.5 else WEED_CLASS
        shade = rng.uniform(0.8, 1.2)
        specs.append(((r, c), axes, theta, class_id, shade))

    id_map = np.zeros((h, w), dtype=np.int32)
    for k, (center, axes, theta, _, _) in enumerate(specs):
        id_map[_ellipse_mask(h, w, center, axes, theta)] = k + 1

    image = _SOIL + rng.normal(0.0, cfg.noise, size=(h, w, 3))
    annotations = []
    for k, (center, axes, theta, class_id, shade) in enumerate(specs):
        mask = id_map == k + 1
        if mask.sum() < 9:  # fully (or nearly) occluded by later objects
            continue
        base = _CROP_BASE if class_id == CROP_CLASS else _WEED_BASE
        image[mask] = base * shade + rng.normal(0.0, cfg.noise, size=(int(mask.sum()), 3))
        annotations.append(
            InstanceAnnotation(
                instance_id=len(annotations) + 1,
                class_id=class_id,
                mask=mask.astype(np.uint8),
            )
        )
    scene = Scene(
        id=f"synth-{cfg.seed}-{index:04d}",
        image=np.clip(image, 0, 255).astype(np.uint8),
        annotations=tuple(annotations),
    )
    clicks = tuple(derive_click(ann, rng) for ann in scene.annotations)
    return scene, clicks


def gen_dataset(
    cfg: SynthConfig, count: int, start_index: int = 0
) -> list[tuple[Scene, tuple[Click, ...]]]:
    return [gen_scene(cfg, start_index + i) for i in range(count)]


def semantic_target(scene: Scene) -> np.ndarray:
    """Per-pixel class-id map (0 background), later instances on top."""
    out = np.zeros((scene.height, scene.width), dtype=np.int64)
    for ann in scene.annotations:
        out[ann.mask != 0] = ann.class_id
    return out


def offset_target(scene: Scene, clicks) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (drow, dcol) to the instance's own click; returns the
    offsets and the foreground mask they are valid on."""
    by_id = {c.instance_id: c for c in clicks}
    missing = [a.instance_id for a in scene.annotations if a.instance_id not in by_id]
    if missing:
        raise ValidationError(f"no click for instances {missing}")
    offsets = np.zeros((scene.height, scene.width, 2), dtype=np.float64)
    fg = np.zeros((scene.height, scene.width), dtype=np.uint8)
    for ann in scene.annotations:
        click = by_id[ann.instance_id]
        ii, jj = np.nonzero(ann.mask)
        offsets[ii, jj, 0] = click.row - ii
        offsets[ii, jj, 1] = click.col - jj
        fg[ii, jj] = 1
    return offsets, fg
