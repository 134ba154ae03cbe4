"""Training regimes and cost benchmarking.

Three regimes share one trunk architecture and differ in how clicks enter
and how many passes an epoch costs:

* ``standard``: one forward/backward per object, RGB + its click map.
* ``negative``: same pass count, plus a fifth channel holding all clicks.
* ``panoptic``: one forward/backward per image, RGB + all-clicks map,
  trained on semantic classes, per-pixel offsets to the own click, and
  optionally a center heatmap.

Per-object passes make a standard epoch cost the total object count while
a single-pass epoch costs the image count; ``benchmark_pass_ratio``
measures that gap.  Runs are bitwise reproducible for a fixed seed.
"""

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .clicks import Click, EncodingConfig, full_click_map, gaussian_click_map, jitter_click
from .errors import ValidationError
from .losses import (
    DEFAULT_HEAD_WEIGHTS,
    ClassAreaStats,
    center_loss,
    class_weights,
    offset_loss,
    weighted_cross_entropy,
)
from .net import NetConfig, Parameters, add_params, backward, forward, init_params, scale_params, sgd_step
from .raster import Scene
from .synth import offset_target, semantic_target

# published full-scale recipe, kept for reference; toy defaults below
PAPER_SCALE = {
    "standard": {"epochs": 1500, "lr": 1e-4, "batch_size": 3},
    "panoptic": {"epochs": 500, "lr": 1e-3, "batch_size": 1},
}

Dataset = Sequence[tuple[Scene, Sequence[Click]]]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    lr: Optional[float] = None  # regime default when None
    batch_size: Optional[int] = None
    seed: int = 0
    base_width: int = 8
    depth: int = 2
    encoding: EncodingConfig = EncodingConfig()
    jitter: bool = True
    head_weights: dict = field(default_factory=lambda: dict(DEFAULT_HEAD_WEIGHTS))
    center_sigma: Optional[float] = None  # heatmap-target sigma; encoding sigma when None


@dataclass(frozen=True)
class TrainRun:
    regime: str
    epochs: int
    lr: float
    batch_size: int
    seed: int
    net: NetConfig
    loss_trace: tuple[float, ...]
    epoch_seconds: tuple[float, ...]
    forward_passes: tuple[int, ...]

    def __post_init__(self):
        if len(self.loss_trace) != self.epochs or len(self.epoch_seconds) != self.epochs:
            raise ValidationError("per-epoch traces must have one entry per epoch")
        if any(t <= 0 for t in self.epoch_seconds):
            raise ValidationError("epoch wall times must be positive")

    def to_json(self) -> dict:
        return {
            "regime": self.regime,
            "epochs": self.epochs,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "net": self.net.to_json(),
            "loss_trace": list(self.loss_trace),
            "epoch_seconds": list(self.epoch_seconds),
            "forward_passes": list(self.forward_passes),
        }


def _check_dataset(dataset: Dataset):
    if not dataset:
        raise ValidationError("empty training dataset")
    for scene, clicks in dataset:
        have = {c.instance_id for c in clicks}
        missing = [a.instance_id for a in scene.annotations if a.instance_id not in have]
        if missing:
            raise ValidationError(f"scene {scene.id}: instances {missing} have no click")


def rgb_channels(scene: Scene) -> np.ndarray:
    return scene.image.astype(np.float64) / 255.0


def standard_input(
    scene: Scene,
    click: Click,
    all_clicks: Sequence[Click],
    encoding: EncodingConfig,
    use_negatives: bool,
) -> np.ndarray:
    """RGB + positive click map, plus the combined all-clicks map for the
    five-channel variant."""
    channels = [rgb_channels(scene), gaussian_click_map(scene.height, scene.width, [click], encoding)[..., None]]
    if use_negatives:
        channels.append(full_click_map(click, all_clicks, scene.height, scene.width, encoding)[..., None])
    return np.concatenate(channels, axis=2)


def panoptic_input(scene: Scene, clicks: Sequence[Click], encoding: EncodingConfig) -> np.ndarray:
    click_map = gaussian_click_map(scene.height, scene.width, clicks, encoding)
    return np.concatenate([rgb_channels(scene), click_map[..., None]], axis=2)


def standard_area_stats(dataset: Dataset) -> ClassAreaStats:
    """Aggregate plant vs background pixel areas over the split; the
    per-object binary targets share one foreground class."""
    fg = sum(ann.area for scene, _ in dataset for ann in scene.annotations)
    total = sum(scene.height * scene.width for scene, _ in dataset)
    return ClassAreaStats(areas={1: fg}, background_area=total - fg)


def panoptic_area_stats(dataset: Dataset) -> ClassAreaStats:
    areas: dict[int, int] = {}
    bg = 0
    for scene, _ in dataset:
        fg_total = 0
        for ann in scene.annotations:
            areas[ann.class_id] = areas.get(ann.class_id, 0) + ann.area
            fg_total += ann.area
        bg += scene.height * scene.width - fg_total
    return ClassAreaStats(areas=areas, background_area=bg)


def thing_class_count(dataset: Dataset) -> int:
    top = max((ann.class_id for scene, _ in dataset for ann in scene.annotations), default=1)
    return int(top)


def _jittered(scene, clicks, encoding, jitter, rng):
    if not jitter or encoding.jitter_radius == 0:
        return list(clicks)
    by_id = {a.instance_id: a for a in scene.annotations}
    return [jitter_click(c, by_id[c.instance_id].mask, encoding, rng) for c in clicks]


class _BatchSGD:
    """Accumulates gradients and steps with the batch mean."""

    def __init__(self, params: Parameters, lr: float, batch_size: int):
        self.params = params
        self.lr = lr
        self.batch_size = batch_size
        self._acc: Optional[Parameters] = None
        self._count = 0

    def accumulate(self, grads: Parameters):
        self._acc = grads if self._acc is None else add_params(self._acc, grads)
        self._count += 1
        if self._count >= self.batch_size:
            self.flush()

    def flush(self):
        if self._count:
            self.params = sgd_step(self.params, scale_params(self._acc, 1.0 / self._count), self.lr)
            self._acc = None
            self._count = 0


def train_standard(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    use_negatives: bool = False,
    initial_params: Optional[Parameters] = None,
) -> tuple[TrainRun, Parameters]:
    """Per-object training: every epoch runs one pass per annotated object."""
    _check_dataset(dataset)
    lr = cfg.lr if cfg.lr is not None else PAPER_SCALE["standard"]["lr"]
    batch = cfg.batch_size if cfg.batch_size is not None else PAPER_SCALE["standard"]["batch_size"]
    net_cfg = NetConfig(
        in_channels=5 if use_negatives else 4,
        base_width=cfg.base_width,
        depth=cfg.depth,
        semantic_classes=2,
    )
    params = initial_params if initial_params is not None else init_params(net_cfg, seed=cfg.seed)
    weights = class_weights(standard_area_stats(dataset))
    losses: list[float] = []
    seconds: list[float] = []
    passes: list[int] = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        opt = _BatchSGD(params, lr, batch)
        epoch_loss = 0.0
        count = 0
        for scene_idx, (scene, clicks) in enumerate(dataset):
            rng = np.random.default_rng([cfg.seed, epoch, scene_idx])
            jittered = _jittered(scene, clicks, cfg.encoding, cfg.jitter, rng)
            by_id = {a.instance_id: a for a in scene.annotations}
            for click in jittered:
                x = standard_input(scene, click, jittered, cfg.encoding, use_negatives)
                target = (by_id[click.instance_id].mask != 0).astype(np.int64)
                pred, cache = forward(opt.params, x, net_cfg)
                loss, d_sem = weighted_cross_entropy(pred.semantic, target, weights)
                grads = backward(opt.params, net_cfg, cache, d_sem)
                opt.accumulate(grads)
                epoch_loss += loss
                count += 1
        opt.flush()
        params = opt.params
        losses.append(epoch_loss / count)
        seconds.append(time.perf_counter() - t0)
        passes.append(count)
    run = TrainRun(
        regime="negative" if use_negatives else "standard",
        epochs=cfg.epochs,
        lr=lr,
        batch_size=batch,
        seed=cfg.seed,
        net=net_cfg,
        loss_trace=tuple(losses),
        epoch_seconds=tuple(seconds),
        forward_passes=tuple(passes),
    )
    return run, params


def train_panoptic(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    center_head: bool = False,
    initial_params: Optional[Parameters] = None,
) -> tuple[TrainRun, Parameters]:
    """Single-pass training: every epoch runs one pass per image."""
    _check_dataset(dataset)
    lr = cfg.lr if cfg.lr is not None else PAPER_SCALE["panoptic"]["lr"]
    batch = cfg.batch_size if cfg.batch_size is not None else PAPER_SCALE["panoptic"]["batch_size"]
    net_cfg = NetConfig(
        in_channels=4,
        base_width=cfg.base_width,
        depth=cfg.depth,
        semantic_classes=1 + thing_class_count(dataset),
        offsets=True,
        centers=center_head,
    )
    params = initial_params if initial_params is not None else init_params(net_cfg, seed=cfg.seed)
    weights = class_weights(panoptic_area_stats(dataset))
    hw = cfg.head_weights
    losses: list[float] = []
    seconds: list[float] = []
    passes: list[int] = []
    targets = [(semantic_target(scene), scene) for scene, _ in dataset]
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        opt = _BatchSGD(params, lr, batch)
        epoch_loss = 0.0
        count = 0
        for scene_idx, (scene, clicks) in enumerate(dataset):
            rng = np.random.default_rng([cfg.seed, epoch, scene_idx])
            jittered = _jittered(scene, clicks, cfg.encoding, cfg.jitter, rng)
            x = panoptic_input(scene, jittered, cfg.encoding)
            sem_target = targets[scene_idx][0]
            off_target, fg = offset_target(scene, jittered)
            pred, cache = forward(opt.params, x, net_cfg)
            sem_loss, d_sem = weighted_cross_entropy(pred.semantic, sem_target, weights)
            off_loss, d_off = offset_loss(pred.offsets, off_target, fg)
            total = hw["semantic"] * sem_loss + hw["offset"] * off_loss
            d_ctr = None
            if center_head:
                heat_cfg = cfg.encoding
                if cfg.center_sigma is not None:
                    heat_cfg = EncodingConfig(
                        sigma=cfg.center_sigma,
                        jitter_radius=cfg.encoding.jitter_radius,
                        combine_rule=cfg.encoding.combine_rule,
                    )
                heat_target = gaussian_click_map(scene.height, scene.width, jittered, heat_cfg)
                ctr_loss, d_ctr = center_loss(pred.center_heatmap, heat_target)
                total += hw["center"] * ctr_loss
                d_ctr = hw["center"] * d_ctr
            grads = backward(
                opt.params,
                net_cfg,
                cache,
                hw["semantic"] * d_sem,
                hw["offset"] * d_off,
                d_ctr,
            )
            opt.accumulate(grads)
            epoch_loss += total
            count += 1
        opt.flush()
        params = opt.params
        losses.append(epoch_loss / count)
        seconds.append(time.perf_counter() - t0)
        passes.append(count)
    run = TrainRun(
        regime="panoptic_center_head" if center_head else "panoptic",
        epochs=cfg.epochs,
        lr=lr,
        batch_size=batch,
        seed=cfg.seed,
        net=net_cfg,
        loss_trace=tuple(losses),
        epoch_seconds=tuple(seconds),
        forward_passes=tuple(passes),
    )
    return run, params


def drop_clicks(
    clicks: Sequence[Click], fraction: float, rng: np.random.Generator
) -> tuple[Click, ...]:
    """Uniformly remove round(fraction * N) clicks, keeping input order."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must be in [0, 1], got {fraction}")
    n = len(clicks)
    n_drop = int(round(fraction * n))
    if n_drop == 0:
        return tuple(clicks)
    dropped = set(rng.choice(n, size=n_drop, replace=False).tolist())
    return tuple(c for i, c in enumerate(clicks) if i not in dropped)


def benchmark_pass_ratio(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    epochs: int = 5,
    warmup: int = 1,
) -> float:
    """Median standard-epoch time over median single-pass-epoch time,
    measured on identically sized trunks after warm-up epochs."""
    bench_cfg = TrainConfig(
        epochs=epochs + warmup,
        lr=cfg.lr,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
        base_width=cfg.base_width,
        depth=cfg.depth,
        encoding=cfg.encoding,
        jitter=cfg.jitter,
        head_weights=cfg.head_weights,
    )
    std_run, _ = train_standard(dataset, bench_cfg)
    pan_run, _ = train_panoptic(dataset, bench_cfg)
    std = float(np.median(std_run.epoch_seconds[warmup:]))
    pan = float(np.median(pan_run.epoch_seconds[warmup:]))
    return std / pan
