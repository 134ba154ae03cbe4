"""Scene data model and bit-exact file I/O.

Conventions used throughout the package:

* rasters are channel-last, row-major numpy arrays: images ``(H, W, 3)``
  uint8, binary masks ``(H, W)`` uint8 in {0, 1}, instance label maps
  ``(H, W)`` int32 with id 0 reserved for background,
* annotation files are JSON with uncompressed run-length encoded masks
  (alternating run lengths, first run counts ``start_value`` pixels),
* instance label maps are stored as 16-bit single-channel PNG.

All types are immutable after construction and every function here is
pure, so they are safe to share across threads.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import SchemaError, ValidationError

MAX_INSTANCE_ID = 65535  # 16-bit PNG carrier


def rle_encode(mask: np.ndarray, start_value: int = 0) -> list[int]:
    """Run-length encode a binary mask in row-major order.

    The first count covers ``start_value`` pixels and may be zero; counts
    always sum to ``H * W``.
    """
    flat = np.asarray(mask).reshape(-1).astype(np.uint8)
    if flat.size == 0:
        raise ValidationError("cannot encode an empty mask")
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0] != start_value:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def rle_decode(counts: Sequence[int], height: int, width: int, start_value: int = 0) -> np.ndarray:
    """Decode run-length counts into an ``(H, W)`` uint8 mask."""
    total = sum(counts)
    if total != height * width:
        raise ValidationError(
            f"rle counts sum to {total}, expected {height}x{width}={height * width}"
        )
    if any(c < 0 for c in counts):
        raise ValidationError("rle counts must be non-negative")
    flat = np.empty(height * width, dtype=np.uint8)
    pos = 0
    value = start_value
    for c in counts:
        flat[pos : pos + c] = value
        pos += c
        value = 1 - value
    return flat.reshape(height, width)


@dataclass(frozen=True)
class InstanceAnnotation:
    """One object: its id, class, binary mask, and optional stem keypoint."""

    instance_id: int
    class_id: int
    mask: np.ndarray
    keypoint: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.instance_id <= 0:
            raise ValidationError(f"instance_id must be positive, got {self.instance_id}")
        mask = np.ascontiguousarray(np.asarray(self.mask, dtype=np.uint8))
        if mask.ndim != 2:
            raise ValidationError(f"mask must be 2-D, got shape {mask.shape}")
        if not mask.any():
            raise ValidationError(f"instance {self.instance_id}: mask has no foreground pixels")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        if self.keypoint is not None:
            r, c = self.keypoint
            h, w = mask.shape
            if not (0 <= r < h and 0 <= c < w):
                raise ValidationError(
                    f"instance {self.instance_id}: keypoint {self.keypoint} outside image bounds"
                )
            object.__setattr__(self, "keypoint", (int(r), int(c)))

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class Scene:
    """An image plus its instance annotations."""

    id: str
    image: np.ndarray
    annotations: tuple[InstanceAnnotation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        image = np.ascontiguousarray(np.asarray(self.image, dtype=np.uint8))
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValidationError(f"image must be (H, W, 3) uint8, got shape {image.shape}")
        image.setflags(write=False)
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "annotations", tuple(self.annotations))
        h, w = image.shape[:2]
        seen = set()
        for ann in self.annotations:
            if ann.instance_id in seen:
                raise ValidationError(f"duplicate instance_id {ann.instance_id}")
            seen.add(ann.instance_id)
            if ann.mask.shape != (h, w):
                raise ValidationError(
                    f"instance {ann.instance_id}: mask shape {ann.mask.shape} "
                    f"does not match image shape {(h, w)}"
                )

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    def instance_map(self) -> np.ndarray:
        """Paint annotations into an instance label map, later ids on top."""
        out = np.zeros((self.height, self.width), dtype=np.int32)
        for ann in self.annotations:
            out[ann.mask != 0] = ann.instance_id
        return out


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise SchemaError(path, message)


def annotation_from_dict(doc: dict) -> tuple[str, int, int, list[InstanceAnnotation]]:
    """Validate an annotation document and decode its instances."""
    _require(isinstance(doc, dict), "$", "document must be a JSON object")
    for key, typ in (("id", str), ("height", int), ("width", int), ("instances", list)):
        _require(key in doc, key, "missing required field")
        _require(isinstance(doc[key], typ), key, f"expected {typ.__name__}")
    height, width = doc["height"], doc["width"]
    _require(height >= 1 and width >= 1, "height", "dimensions must be >= 1")
    annotations = []
    for idx, inst in enumerate(doc["instances"]):
        path = f"instances[{idx}]"
        _require(isinstance(inst, dict), path, "expected object")
        for key in ("instance_id", "class_id", "rle"):
            _require(key in inst, f"{path}.{key}", "missing required field")
        _require(isinstance(inst["instance_id"], int), f"{path}.instance_id", "expected int")
        _require(isinstance(inst["class_id"], int), f"{path}.class_id", "expected int")
        rle = inst["rle"]
        _require(isinstance(rle, dict), f"{path}.rle", "expected object")
        _require(isinstance(rle.get("counts"), list), f"{path}.rle.counts", "expected list of ints")
        _require(
            all(isinstance(c, int) for c in rle["counts"]),
            f"{path}.rle.counts",
            "expected list of ints",
        )
        _require(rle.get("order", "row-major") == "row-major", f"{path}.rle.order", "must be row-major")
        _require(rle.get("start_value", 0) in (0, 1), f"{path}.rle.start_value", "must be 0 or 1")
        keypoint = inst.get("keypoint")
        if keypoint is not None:
            _require(
                isinstance(keypoint, list) and len(keypoint) == 2
                and all(isinstance(v, int) for v in keypoint),
                f"{path}.keypoint",
                "expected [row, col] or null",
            )
            keypoint = (keypoint[0], keypoint[1])
        try:
            mask = rle_decode(rle["counts"], height, width, rle.get("start_value", 0))
            annotations.append(
                InstanceAnnotation(
                    instance_id=inst["instance_id"],
                    class_id=inst["class_id"],
                    mask=mask,
                    keypoint=keypoint,
                )
            )
        except ValidationError as exc:
            raise SchemaError(path, str(exc)) from exc
    return doc["id"], height, width, annotations


def scene_to_annotation_dict(scene: Scene, extra: Optional[dict] = None) -> dict:
    doc = {
        "id": scene.id,
        "height": scene.height,
        "width": scene.width,
        "instances": [
            {
                "instance_id": ann.instance_id,
                "class_id": ann.class_id,
                "keypoint": list(ann.keypoint) if ann.keypoint is not None else None,
                "rle": {
                    "counts": rle_encode(ann.mask),
                    "order": "row-major",
                    "start_value": 0,
                },
            }
            for ann in scene.annotations
        ],
    }
    if extra:
        doc.update(extra)
    return doc


def read_scene(image_path, annotation_path) -> Scene:
    """Load an 8-bit RGB PNG and its annotation JSON into a validated Scene."""
    try:
        with open(annotation_path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    scene_id, height, width, annotations = annotation_from_dict(doc)
    with Image.open(image_path) as img:
        if img.mode != "RGB":
            raise ValidationError(f"{image_path}: expected an 8-bit RGB image, got mode {img.mode}")
        image = np.asarray(img, dtype=np.uint8)
    if image.shape[:2] != (height, width):
        raise ValidationError(
            f"annotation declares {height}x{width} but image is "
            f"{image.shape[0]}x{image.shape[1]}"
        )
    return Scene(id=scene_id, image=image, annotations=tuple(annotations))


def write_scene(scene: Scene, image_path, annotation_path, extra: Optional[dict] = None):
    """Write a scene as PNG + annotation JSON (inverse of read_scene)."""
    Image.fromarray(scene.image).save(image_path, format="PNG")
    with open(annotation_path, "w") as fh:
        json.dump(scene_to_annotation_dict(scene, extra), fh, indent=1)


def write_instance_map(instance_map: np.ndarray, path):
    """Store an instance label map as a 16-bit single-channel PNG."""
    arr = np.asarray(instance_map)
    if arr.ndim != 2:
        raise ValidationError(f"instance map must be 2-D, got shape {arr.shape}")
    if arr.min() < 0:
        raise ValidationError("instance ids must be non-negative")
    if arr.max() > MAX_INSTANCE_ID:
        raise ValidationError(
            f"instance id {int(arr.max())} exceeds the 16-bit PNG limit of {MAX_INSTANCE_ID}"
        )
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


def read_instance_map(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img)
    return arr.astype(np.int32)


def instance_masks(instance_map: np.ndarray) -> dict[int, np.ndarray]:
    """Split a label map into per-instance binary masks (id 0 excluded)."""
    out = {}
    for iid in np.unique(instance_map):
        if iid == 0:
            continue
        out[int(iid)] = (instance_map == iid).astype(np.uint8)
    return out
