"""Semi-supervised data protocol: keep manual labels for a small object
fraction, predict pseudo-labels for the rest, export one merged dataset.

The exported layout is ``out_dir/images/*.png``,
``out_dir/annotations/*.json``, and ``out_dir/manifest.json``; every
annotation file carries a ``source`` tag (manual or pseudo) plus, on the
pseudo side, the checkpoint id that produced it.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .clicks import Click, EncodingConfig
from .errors import ValidationError
from .evaluate import fused_instance_map, predict_scene_panoptic, standard_instance_map, _softmax
from .fusion import FusionConfig
from .net import NetConfig, Parameters
from .raster import InstanceAnnotation, Scene, instance_masks, write_scene
from .train import Dataset


@dataclass(frozen=True)
class SplitManifest:
    labelled: tuple[str, ...]
    unlabelled: tuple[str, ...]
    labelled_objects: int
    unlabelled_objects: int
    target_fraction: float

    @property
    def achieved_fraction(self) -> float:
        total = self.labelled_objects + self.unlabelled_objects
        return self.labelled_objects / total if total else 0.0

    def to_json(self) -> dict:
        return {
            "labelled": list(self.labelled),
            "unlabelled": list(self.unlabelled),
            "labelled_objects": self.labelled_objects,
            "unlabelled_objects": self.unlabelled_objects,
            "target_fraction": self.target_fraction,
            "achieved_fraction": self.achieved_fraction,
        }


def split_by_object_fraction(
    scenes: Sequence[Scene], target: float = 0.10, rng: Optional[np.random.Generator] = None
) -> SplitManifest:
    """Greedily move randomly-ordered scenes to the labelled side until it
    first holds at least ``target`` of all objects."""
    if not scenes:
        raise ValidationError("cannot split an empty dataset")
    if not 0.0 < target <= 1.0:
        raise ValidationError(f"target fraction must be in (0, 1], got {target}")
    rng = rng if rng is not None else np.random.default_rng()
    counts = [len(s.annotations) for s in scenes]
    total = sum(counts)
    order = rng.permutation(len(scenes))
    labelled: list[str] = []
    labelled_objects = 0
    for idx in order:
        if labelled_objects >= target * total:
            break
        labelled.append(scenes[idx].id)
        labelled_objects += counts[idx]
    labelled_set = set(labelled)
    unlabelled = [s.id for s in scenes if s.id not in labelled_set]
    return SplitManifest(
        labelled=tuple(labelled),
        unlabelled=tuple(unlabelled),
        labelled_objects=labelled_objects,
        unlabelled_objects=total - labelled_objects,
        target_fraction=target,
    )


@dataclass(frozen=True)
class ScenePseudoLabel:
    scene_id: str
    instance_map: np.ndarray
    class_ids: dict[int, int]  # instance id -> class id
    checkpoint_id: str
    click_source: str
    raw_masks: Optional[dict[int, np.ndarray]] = None  # pre-flattening per-click masks

    def __post_init__(self):
        ids = {int(i) for i in np.unique(self.instance_map) if i != 0}
        if ids != set(self.class_ids):
            raise ValidationError(
                f"scene {self.scene_id}: instance ids {sorted(ids)} do not match "
                f"class table {sorted(self.class_ids)}"
            )
        if not self.checkpoint_id:
            raise ValidationError("pseudo-labels must record their checkpoint id")


@dataclass(frozen=True)
class PseudoLabelSet:
    mode: str
    checkpoint_id: str
    items: tuple[ScenePseudoLabel, ...]


def _majority_class(semantic_probs: np.ndarray, mask: np.ndarray) -> int:
    votes = semantic_probs[mask != 0][:, 1:].sum(axis=0)
    return int(np.argmax(votes)) + 1


def generate_pseudo_labels(
    params: Parameters,
    net_cfg: NetConfig,
    dataset: Dataset,
    mode: str,
    encoding: EncodingConfig = EncodingConfig(),
    checkpoint_id: str = "unversioned",
    keep_raw: bool = False,
) -> PseudoLabelSet:
    """Predict instance maps for every scene from its clicks.

    Per-object modes flatten the N masks with highest-foreground-score
    overlap resolution so the output is always panoptic-valid; the raw
    overlapping masks survive behind ``keep_raw``.  Instance ids always
    equal the source click ids.
    """
    if mode not in ("standard", "negative", "panoptic"):
        raise ValidationError(f"unknown pseudo-label mode {mode!r}")
    if mode == "negative" and net_cfg.in_channels != 5:
        raise ValidationError("negative mode needs a five-channel checkpoint")
    if mode == "standard" and net_cfg.in_channels != 4:
        raise ValidationError("standard mode needs a four-channel checkpoint")
    if mode == "panoptic" and not net_cfg.offsets:
        raise ValidationError("panoptic mode needs an offsets-head checkpoint")
    items = []
    for scene, clicks in dataset:
        for click in clicks:
            if not (0 <= click.row < scene.height and 0 <= click.col < scene.width):
                raise ValidationError(
                    f"scene {scene.id}: click ({click.row}, {click.col}) outside image"
                )
        raw = None
        if mode == "panoptic":
            label_map = fused_instance_map(
                params,
                net_cfg,
                scene,
                clicks,
                encoding,
                fusion=FusionConfig(empty_center_fallback=False),
            )
            probs = _softmax(
                predict_scene_panoptic(params, net_cfg, scene, clicks, encoding).semantic
            )
            class_ids = {
                iid: _majority_class(probs, m) for iid, m in instance_masks(label_map).items()
            }
        else:
            label_map, masks, _scores = standard_instance_map(
                params, net_cfg, scene, clicks, encoding
            )
            class_ids = {int(i): 1 for i in np.unique(label_map) if i != 0}
            if keep_raw:
                raw = masks
        items.append(
            ScenePseudoLabel(
                scene_id=scene.id,
                instance_map=label_map,
                class_ids=class_ids,
                checkpoint_id=checkpoint_id,
                click_source="user_clicks",
                raw_masks=raw,
            )
        )
    return PseudoLabelSet(mode=mode, checkpoint_id=checkpoint_id, items=tuple(items))


def pseudo_label_scene(scene: Scene, label: ScenePseudoLabel) -> Scene:
    """Rebuild a scene whose annotations are the pseudo instances."""
    annotations = [
        InstanceAnnotation(
            instance_id=iid,
            class_id=label.class_ids[iid],
            mask=mask,
        )
        for iid, mask in sorted(instance_masks(label.instance_map).items())
    ]
    return Scene(id=scene.id, image=scene.image, annotations=tuple(annotations))


def export_dataset(
    manifest: SplitManifest,
    manual: Sequence[Scene],
    unlabelled: Sequence[Scene],
    pseudo: PseudoLabelSet,
    out_dir,
):
    """Write the merged training set: manual scenes verbatim, unlabelled
    scenes with pseudo annotations, plus the split manifest."""
    manual_ids = {s.id for s in manual}
    pseudo_ids = {item.scene_id for item in pseudo.items}
    if manual_ids & pseudo_ids:
        raise ValidationError(f"scene ids on both sides: {sorted(manual_ids & pseudo_ids)}")
    if manual_ids != set(manifest.labelled) or pseudo_ids != set(manifest.unlabelled):
        raise ValidationError("manifest does not match the provided scenes")
    by_id = {s.id: s for s in unlabelled}
    missing = pseudo_ids - set(by_id)
    if missing:
        raise ValidationError(f"no image scene for pseudo labels {sorted(missing)}")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    for scene in manual:
        write_scene(
            scene,
            out / "images" / f"{scene.id}.png",
            out / "annotations" / f"{scene.id}.json",
            extra={"source": "manual"},
        )
    for item in pseudo.items:
        scene = pseudo_label_scene(by_id[item.scene_id], item)
        write_scene(
            scene,
            out / "images" / f"{scene.id}.png",
            out / "annotations" / f"{scene.id}.json",
            extra={
                "source": "pseudo",
                "checkpoint_id": item.checkpoint_id,
                "click_source": item.click_source,
            },
        )
    doc = {
        "split": manifest.to_json(),
        "pseudo_mode": pseudo.mode,
        "checkpoint_id": pseudo.checkpoint_id,
        "sources": {
            **{sid: "manual" for sid in manifest.labelled},
            **{sid: "pseudo" for sid in manifest.unlabelled},
        },
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=1)
