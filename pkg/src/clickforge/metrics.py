"""Evaluation measures: object IoU, threshold-matched foreground IoU, and
panoptic quality (PQ/SQ/RQ).

IoU-style results are reported in [0, 1]; the three panoptic scores are
percentages in [0, 100] with ``PQ = SQ * RQ / 100``.  Aggregation over
scenes sums the matching counts (not the per-scene scores) in sorted key
order so parallel evaluation reduces deterministically.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError


def object_iou(pred_mask: np.ndarray, gt_mask: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 when both empty."""
    pred = np.asarray(pred_mask) != 0
    gt = np.asarray(gt_mask) != 0
    if pred.shape != gt.shape:
        raise ValidationError(f"mask shapes disagree: {pred.shape} vs {gt.shape}")
    union = int(np.logical_or(pred, gt).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(pred, gt).sum()) / union


@dataclass(frozen=True)
class ObjectIoUReport:
    per_object: Mapping[tuple[str, int], float]  # (scene_id, instance_id) -> IoU
    mean: float


def mean_object_iou(
    results: Iterable[tuple[str, int, np.ndarray, np.ndarray]],
    average: str = "object",
) -> ObjectIoUReport:
    """Mean IoU over annotated objects.

    ``results`` yields (scene_id, instance_id, pred_mask, gt_mask), one
    entry per ground-truth object with the prediction produced from its
    click.  ``average="image"`` averages per scene first, then over
    scenes.
    """
    per_object: dict[tuple[str, int], float] = {}
    for scene_id, instance_id, pred, gt in results:
        per_object[(scene_id, instance_id)] = object_iou(pred, gt)
    if not per_object:
        raise ValidationError("no objects to evaluate")
    if average == "object":
        mean = sum(per_object[k] for k in sorted(per_object)) / len(per_object)
    elif average == "image":
        by_scene: dict[str, list[float]] = {}
        for (scene_id, _), iou in per_object.items():
            by_scene.setdefault(scene_id, []).append(iou)
        mean = sum(sum(v) / len(v) for _, v in sorted(by_scene.items())) / len(by_scene)
    else:
        raise ValidationError(f"average must be 'object' or 'image', got {average!r}")
    return ObjectIoUReport(per_object=per_object, mean=float(mean))


@dataclass(frozen=True)
class PanopticScores:
    pq: float
    sq: float
    rq: float
    tp: int
    fp: int
    fn: int
    matched_iou_sum: float

    def __post_init__(self):
        if abs(self.pq - self.sq * self.rq / 100.0) > 1e-9:
            raise ValidationError("PQ must equal SQ * RQ / 100")


def _segments(label_map: np.ndarray, include_stuff: bool) -> dict[int, int]:
    ids, counts = np.unique(label_map, return_counts=True)
    out = {int(i): int(c) for i, c in zip(ids, counts)}
    if not include_stuff:
        out.pop(0, None)
    return out


def _scores_from_counts(tp: int, fp: int, fn: int, iou_sum: float) -> PanopticScores:
    if tp == 0 and fp == 0 and fn == 0:
        # both sides agree there is nothing to segment
        return PanopticScores(pq=100.0, sq=100.0, rq=100.0, tp=0, fp=0, fn=0, matched_iou_sum=0.0)
    sq = 100.0 * iou_sum / tp if tp > 0 else 0.0
    rq = 100.0 * tp / (tp + 0.5 * fp + 0.5 * fn)
    return PanopticScores(
        pq=sq * rq / 100.0, sq=sq, rq=rq, tp=tp, fp=fp, fn=fn, matched_iou_sum=iou_sum
    )


def panoptic_counts(
    pred: np.ndarray, gt: np.ndarray, include_stuff: bool = False
) -> tuple[int, int, int, float]:
    """Match segments at IoU > 0.5 and count TP / FP / FN.

    The strict 0.5 threshold makes the matching unique.  Background (id 0)
    is excluded unless ``include_stuff`` scores it as one stuff segment.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValidationError(f"map shapes disagree: {pred.shape} vs {gt.shape}")
    pred_areas = _segments(pred, include_stuff)
    gt_areas = _segments(gt, include_stuff)
    both = np.ones(pred.shape, dtype=bool) if include_stuff else (pred > 0) & (gt > 0)
    tp = 0
    iou_sum = 0.0
    if both.any():
        offset = np.int64(gt.max()) + 1
        joint = pred[both].astype(np.int64) * offset + gt[both].astype(np.int64)
        pair_codes, pair_counts = np.unique(joint, return_counts=True)
        for code, inter in zip(pair_codes, pair_counts):
            pid = int(code // offset)
            gid = int(code % offset)
            if (pid not in pred_areas) or (gid not in gt_areas):
                continue
            union = pred_areas[pid] + gt_areas[gid] - int(inter)
            iou = int(inter) / union
            if iou > 0.5:
                tp += 1
                iou_sum += iou
    fp = len(pred_areas) - tp
    fn = len(gt_areas) - tp
    return tp, fp, fn, iou_sum


def panoptic_quality(
    pred: np.ndarray, gt: np.ndarray, include_stuff: bool = False
) -> PanopticScores:
    """PQ / SQ / RQ for one predicted vs ground-truth label map pair."""
    tp, fp, fn, iou_sum = panoptic_counts(pred, gt, include_stuff)
    return _scores_from_counts(tp, fp, fn, iou_sum)


def combine_panoptic(scores: Iterable[PanopticScores]) -> PanopticScores:
    """Aggregate per-scene scores by summing their matching counts."""
    tp = fp = fn = 0
    iou_sum = 0.0
    for s in scores:
        tp += s.tp
        fp += s.fp
        fn += s.fn
        iou_sum += s.matched_iou_sum
    return _scores_from_counts(tp, fp, fn, iou_sum)


def mean_fg_iou(
    scene_preds: Sequence[Sequence[tuple[np.ndarray, float]]],
    scene_gts: Sequence[Sequence[np.ndarray]],
    match_threshold: float = 0.4,
) -> float:
    """Mean foreground IoU over ground-truth objects.

    Predictions are (mask, confidence) pairs matched greedily in
    descending confidence: each takes the unmatched ground-truth object of
    highest IoU if that IoU reaches the threshold.  Unmatched ground-truth
    objects contribute 0.
    """
    if len(scene_preds) != len(scene_gts):
        raise ValidationError("prediction and ground-truth scene counts disagree")
    total = 0.0
    count = 0
    for preds, gts in zip(scene_preds, scene_gts):
        count += len(gts)
        if not gts:
            continue
        matched = [False] * len(gts)
        order = sorted(range(len(preds)), key=lambda k: -preds[k][1])
        for k in order:
            pred_mask = preds[k][0]
            best_iou, best_g = 0.0, -1
            for g, gt_mask in enumerate(gts):
                if matched[g]:
                    continue
                iou = object_iou(pred_mask, gt_mask)
                if iou > best_iou:
                    best_iou, best_g = iou, g
            if best_g >= 0 and best_iou >= match_threshold:
                matched[best_g] = True
                total += best_iou
    if count == 0:
        raise ValidationError("no ground-truth objects to evaluate")
    return total / count
