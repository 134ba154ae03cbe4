"""Model evaluation: per-object predictions, fused maps, and the metric
report consumed by the ``eval`` CLI.

Evaluation clicks are used as derived (no jitter), mirroring how the
annotator noise is a training-time augmentation only.
"""

from typing import Optional, Sequence

import numpy as np

from .clicks import Click, EncodingConfig
from .errors import ValidationError
from .fusion import CenterSet, FusionConfig, fuse
from .metrics import PanopticScores, combine_panoptic, mean_fg_iou, mean_object_iou, object_iou, panoptic_quality
from .net import NetConfig, Parameters, forward
from .raster import Scene, instance_masks
from .train import Dataset, drop_clicks, panoptic_input, standard_input


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict_object(
    params: Parameters,
    net_cfg: NetConfig,
    scene: Scene,
    click: Click,
    all_clicks: Sequence[Click],
    encoding: EncodingConfig = EncodingConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """One per-object pass; returns the binary mask and the foreground
    probability map it was cut from."""
    x = standard_input(scene, click, all_clicks, encoding, net_cfg.in_channels == 5)
    pred, _ = forward(params, x, net_cfg)
    prob = _softmax(pred.semantic)[:, :, 1]
    mask = (np.argmax(pred.semantic, axis=2) == 1).astype(np.uint8)
    return mask, prob


def predict_scene_panoptic(
    params: Parameters,
    net_cfg: NetConfig,
    scene: Scene,
    clicks: Sequence[Click],
    encoding: EncodingConfig = EncodingConfig(),
):
    return forward(params, panoptic_input(scene, clicks, encoding), net_cfg)[0]


def fused_instance_map(
    params: Parameters,
    net_cfg: NetConfig,
    scene: Scene,
    clicks: Sequence[Click],
    encoding: EncodingConfig = EncodingConfig(),
    use_predicted_centers: bool = False,
    fusion: FusionConfig = FusionConfig(),
) -> np.ndarray:
    """Fuse one scene, with user clicks as centers or (recovery mode)
    centers extracted from the predicted heatmap."""
    pred = predict_scene_panoptic(params, net_cfg, scene, clicks, encoding)
    if use_predicted_centers:
        if pred.center_heatmap is None:
            raise ValidationError("recovery mode needs a center-head checkpoint")
        return fuse(pred, None, fusion)
    centers = CenterSet.from_clicks([c for c in clicks if c.polarity == "pos"])
    return fuse(pred, centers, fusion)


def resolve_overlaps(
    masks: dict[int, np.ndarray], scores: dict[int, np.ndarray], shape: tuple[int, int]
) -> np.ndarray:
    """Assign contested pixels to the claiming instance with the highest
    predicted foreground score; unclaimed pixels stay background."""
    out = np.zeros(shape, dtype=np.int32)
    best = np.full(shape, -np.inf)
    for iid in sorted(masks):
        m = masks[iid] != 0
        s = np.where(m, scores[iid], -np.inf)
        take = m & (s > best)
        out[take] = iid
        best = np.maximum(best, s)
    return out


def standard_instance_map(
    params: Parameters,
    net_cfg: NetConfig,
    scene: Scene,
    clicks: Sequence[Click],
    encoding: EncodingConfig = EncodingConfig(),
) -> tuple[np.ndarray, dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Run one pass per click and flatten the stack into a non-overlapping
    map; also returns the raw per-click masks and score maps."""
    masks: dict[int, np.ndarray] = {}
    scores: dict[int, np.ndarray] = {}
    for click in clicks:
        mask, prob = predict_object(params, net_cfg, scene, click, clicks, encoding)
        masks[click.instance_id] = mask
        scores[click.instance_id] = prob
    return resolve_overlaps(masks, scores, (scene.height, scene.width)), masks, scores


def evaluate_regime(
    params: Parameters,
    net_cfg: NetConfig,
    dataset: Dataset,
    regime: str,
    encoding: EncodingConfig = EncodingConfig(),
    fusion: FusionConfig = FusionConfig(),
    average: str = "object",
) -> dict:
    """Full metric report: mean object IoU keyed by click id, threshold-
    matched mean fgIoU, and aggregate PQ/SQ/RQ."""
    iou_results = []
    scene_preds = []
    scene_gts = []
    panoptic_scores = []
    per_scene = {}
    for scene, clicks in dataset:
        gt_by_id = {a.instance_id: a.mask for a in scene.annotations}
        if regime in ("standard", "negative"):
            label_map, masks, scores = standard_instance_map(params, net_cfg, scene, clicks, encoding)
            pred_masks = masks
            confidences = {
                iid: float(scores[iid][masks[iid] != 0].mean()) if masks[iid].any() else 0.0
                for iid in masks
            }
        elif regime in ("panoptic", "panoptic_center_head"):
            label_map = fused_instance_map(params, net_cfg, scene, clicks, encoding, fusion=fusion)
            pred_masks = instance_masks(label_map)
            sem = _softmax(
                predict_scene_panoptic(params, net_cfg, scene, clicks, encoding).semantic
            )
            thing_prob = sem[:, :, 1:].sum(axis=2)
            confidences = {
                iid: float(thing_prob[m != 0].mean()) for iid, m in pred_masks.items()
            }
        else:
            raise ValidationError(f"unknown regime {regime!r}")
        empty = np.zeros((scene.height, scene.width), dtype=np.uint8)
        scene_ious = []
        for ann in scene.annotations:
            pred = pred_masks.get(ann.instance_id, empty)
            iou_results.append((scene.id, ann.instance_id, pred, ann.mask))
            scene_ious.append(object_iou(pred, ann.mask))
        scene_preds.append([(m, confidences[iid]) for iid, m in sorted(pred_masks.items())])
        scene_gts.append([a.mask for a in scene.annotations])
        pq = panoptic_quality(label_map, scene.instance_map())
        panoptic_scores.append(pq)
        per_scene[scene.id] = {
            "miou": float(np.mean(scene_ious)) if scene_ious else 1.0,
            "pq": pq.pq,
            "sq": pq.sq,
            "rq": pq.rq,
        }
    report = mean_object_iou(iou_results, average=average)
    fg = mean_fg_iou(scene_preds, scene_gts)
    agg = combine_panoptic(panoptic_scores)
    return {
        "miou": report.mean,
        "fg_iou": fg,
        "pq": agg.pq,
        "sq": agg.sq,
        "rq": agg.rq,
        "per_scene": per_scene,
    }


def panoptic_scores_over(
    params: Parameters,
    net_cfg: NetConfig,
    dataset: Dataset,
    encoding: EncodingConfig = EncodingConfig(),
    fusion: FusionConfig = FusionConfig(),
    use_predicted_centers: bool = False,
    drop_fraction: float = 0.0,
    seed: int = 0,
) -> PanopticScores:
    """Aggregate PQ/SQ/RQ over a dataset, optionally removing a fraction
    of the input clicks per scene (they vanish from the click channel;
    recovery mode then relies on the predicted centers)."""
    scores = []
    for index, (scene, clicks) in enumerate(dataset):
        kept = drop_clicks(clicks, drop_fraction, np.random.default_rng([seed, index]))
        label_map = fused_instance_map(
            params,
            net_cfg,
            scene,
            kept,
            encoding,
            use_predicted_centers=use_predicted_centers,
            fusion=fusion,
        )
        scores.append(panoptic_quality(label_map, scene.instance_map()))
    return combine_panoptic(scores)


def missing_click_ablation(
    params: Parameters,
    net_cfg: NetConfig,
    dataset: Dataset,
    fractions: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    encoding: EncodingConfig = EncodingConfig(),
    fusion: FusionConfig = FusionConfig(),
    seed: int = 0,
) -> dict:
    """Degradation curve of one center-head model under missing clicks.

    Returns the click-mode reference plus recovery-mode scores per
    missing fraction, all as aggregate PanopticScores.
    """
    reference = panoptic_scores_over(params, net_cfg, dataset, encoding, fusion)
    recovered = {
        fraction: panoptic_scores_over(
            params,
            net_cfg,
            dataset,
            encoding,
            fusion,
            use_predicted_centers=True,
            drop_fraction=fraction,
            seed=seed,
        )
        for fraction in fractions
    }
    return {"user_clicks": reference, "predicted": recovered}
