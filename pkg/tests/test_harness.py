"""Synthetic scenes and the training regimes: determinism, pass counts,
offset targets, click dropping."""

import numpy as np
import pytest

from clickforge.clicks import Click, EncodingConfig
from clickforge.errors import ValidationError
from clickforge.synth import SynthConfig, gen_dataset, gen_scene, offset_target, semantic_target
from clickforge.train import (
    TrainConfig,
    drop_clicks,
    panoptic_area_stats,
    standard_area_stats,
    train_panoptic,
    train_standard,
)

FAST = TrainConfig(epochs=2, base_width=2, depth=1)


def tiny_dataset(n_scenes=2, seed=0, max_objects=3):
    cfg = SynthConfig(
        height=16, width=16, min_objects=1, max_objects=max_objects,
        min_radius=2, max_radius=4, min_separation=5.0, seed=seed,
    )
    return gen_dataset(cfg, n_scenes)


class TestGenScene:
    def test_deterministic_in_seed_and_index(self):
        cfg = SynthConfig(seed=3)
        a, clicks_a = gen_scene(cfg, 7)
        b, clicks_b = gen_scene(cfg, 7)
        np.testing.assert_array_equal(a.image, b.image)
        assert clicks_a == clicks_b
        assert a.id == b.id

    def test_different_index_different_scene(self):
        cfg = SynthConfig(seed=3)
        a, _ = gen_scene(cfg, 0)
        b, _ = gen_scene(cfg, 1)
        assert not np.array_equal(a.image, b.image)

    def test_single_object_config(self):
        cfg = SynthConfig(min_objects=1, max_objects=1, seed=0)
        scene, clicks = gen_scene(cfg, 0)
        assert len(scene.annotations) == 1
        assert len(clicks) == 1

    def test_masks_disjoint_and_clicks_inside_1000_scenes(self):
        cfg = SynthConfig(seed=11)
        for index in range(1000):
            scene, clicks = gen_scene(cfg, index)
            total = np.zeros((cfg.height, cfg.width), dtype=np.int32)
            by_id = {a.instance_id: a for a in scene.annotations}
            for ann in scene.annotations:
                total += ann.mask
            assert total.max() <= 1
            assert len(clicks) == len(scene.annotations)
            for click in clicks:
                assert by_id[click.instance_id].mask[click.row, click.col]

    def test_object_count_in_range(self):
        cfg = SynthConfig(min_objects=4, max_objects=8, seed=5)
        for index in range(50):
            scene, _ = gen_scene(cfg, index)
            assert 1 <= len(scene.annotations) <= 8


class TestTargets:
    def test_semantic_target_paints_class_ids(self):
        scene, _ = gen_scene(SynthConfig(seed=0), 0)
        target = semantic_target(scene)
        for ann in scene.annotations:
            assert (target[ann.mask != 0] == ann.class_id).all()
        fg = np.zeros_like(target)
        for ann in scene.annotations:
            fg[ann.mask != 0] = 1
        assert ((target > 0) == (fg > 0)).all()

    def test_offset_target_points_at_own_click(self):
        scene, clicks = gen_scene(SynthConfig(seed=1), 0)
        offsets, fg = offset_target(scene, clicks)
        by_id = {c.instance_id: c for c in clicks}
        for ann in scene.annotations:
            click = by_id[ann.instance_id]
            ii, jj = np.nonzero(ann.mask)
            np.testing.assert_array_equal(ii + offsets[ii, jj, 0], np.full(ii.size, click.row))
            np.testing.assert_array_equal(jj + offsets[ii, jj, 1], np.full(jj.size, click.col))
        assert (offsets[fg == 0] == 0).all()

    def test_offset_target_click_pixel_is_zero(self):
        scene, clicks = gen_scene(SynthConfig(seed=2), 0)
        offsets, _ = offset_target(scene, clicks)
        for click in clicks:
            np.testing.assert_array_equal(offsets[click.row, click.col], [0.0, 0.0])

    def test_missing_click_rejected(self):
        scene, clicks = gen_scene(SynthConfig(seed=3), 0)
        with pytest.raises(ValidationError):
            offset_target(scene, clicks[:-1])


class TestTrainingRegimes:
    def test_standard_pass_count_is_total_objects(self):
        dataset = tiny_dataset()
        total_objects = sum(len(s.annotations) for s, _ in dataset)
        run, _ = train_standard(dataset, FAST)
        assert all(p == total_objects for p in run.forward_passes)

    def test_panoptic_pass_count_is_image_count(self):
        dataset = tiny_dataset()
        run, _ = train_panoptic(dataset, FAST)
        assert all(p == len(dataset) for p in run.forward_passes)

    def test_standard_reproducible(self):
        dataset = tiny_dataset()
        _, p1 = train_standard(dataset, FAST)
        _, p2 = train_standard(dataset, FAST)
        np.testing.assert_array_equal(p1.flat(), p2.flat())

    def test_panoptic_reproducible(self):
        dataset = tiny_dataset()
        _, p1 = train_panoptic(dataset, FAST, center_head=True)
        _, p2 = train_panoptic(dataset, FAST, center_head=True)
        np.testing.assert_array_equal(p1.flat(), p2.flat())

    def test_negative_variant_uses_five_channels(self):
        dataset = tiny_dataset()
        run, _ = train_standard(dataset, FAST, use_negatives=True)
        assert run.net.in_channels == 5
        assert run.regime == "negative"

    def test_missing_click_rejected(self):
        dataset = tiny_dataset()
        scene, clicks = dataset[0]
        broken = [(scene, clicks[:-1] if len(clicks) > 1 else ())] + list(dataset[1:])
        with pytest.raises(ValidationError):
            train_standard(broken, FAST)

    def test_loss_traces_have_one_entry_per_epoch(self):
        dataset = tiny_dataset()
        run, _ = train_panoptic(dataset, FAST)
        assert len(run.loss_trace) == FAST.epochs
        assert len(run.epoch_seconds) == FAST.epochs
        assert all(t > 0 for t in run.epoch_seconds)

    def test_regime_defaults_follow_published_recipe(self):
        dataset = tiny_dataset()
        std, _ = train_standard(dataset, FAST)
        pan, _ = train_panoptic(dataset, FAST)
        assert (std.lr, std.batch_size) == (1e-4, 3)
        assert (pan.lr, pan.batch_size) == (1e-3, 1)

    def test_warm_start_continues_from_given_parameters(self):
        dataset = tiny_dataset()
        _, p1 = train_standard(dataset, FAST)
        run2, p2 = train_standard(dataset, FAST, initial_params=p1)
        assert not np.array_equal(p1.flat(), p2.flat())
        # restarting from p1 is reproducible
        _, p3 = train_standard(dataset, FAST, initial_params=p1)
        np.testing.assert_array_equal(p2.flat(), p3.flat())

    def test_center_sigma_changes_heatmap_supervision(self):
        dataset = tiny_dataset()
        import dataclasses

        sharp = dataclasses.replace(FAST, center_sigma=2.0)
        _, p_default = train_panoptic(dataset, FAST, center_head=True)
        _, p_sharp = train_panoptic(dataset, sharp, center_head=True)
        assert not np.array_equal(p_default.flat(), p_sharp.flat())

    def test_single_object_ratio_near_one(self):
        cfg = SynthConfig(
            height=32, width=32, min_objects=1, max_objects=1,
            min_radius=3, max_radius=5, min_separation=6.0, seed=2,
        )
        dataset = gen_dataset(cfg, 6)
        from clickforge.train import benchmark_pass_ratio

        ratio = benchmark_pass_ratio(dataset, TrainConfig(epochs=4, base_width=4, depth=1), epochs=4)
        assert 0.7 <= ratio <= 1.3


class TestAreaStats:
    def test_standard_pools_plant_vs_background_areas(self):
        dataset = tiny_dataset(1)
        scene, _ = dataset[0]
        stats = standard_area_stats(dataset)
        fg = sum(a.area for a in scene.annotations)
        assert stats.areas[1] == fg
        assert stats.background_area == 16 * 16 - fg

    def test_panoptic_splits_classes(self):
        dataset = tiny_dataset(3, seed=4)
        stats = panoptic_area_stats(dataset)
        total_fg = sum(a.area for s, _ in dataset for a in s.annotations)
        assert sum(stats.areas.values()) == total_fg
        assert stats.background_area == 3 * 16 * 16 - total_fg


class TestDropClicks:
    def _clicks(self, n):
        return tuple(Click(i, i, i + 1) for i in range(n))

    def test_zero_fraction_unchanged(self):
        clicks = self._clicks(4)
        assert drop_clicks(clicks, 0.0, np.random.default_rng(0)) == clicks

    def test_full_fraction_empty(self):
        assert drop_clicks(self._clicks(4), 1.0, np.random.default_rng(0)) == ()

    def test_half_of_four_leaves_two(self):
        out = drop_clicks(self._clicks(4), 0.5, np.random.default_rng(0))
        assert len(out) == 2

    def test_deterministic_and_order_preserving(self):
        clicks = self._clicks(8)
        a = drop_clicks(clicks, 0.25, np.random.default_rng(42))
        b = drop_clicks(clicks, 0.25, np.random.default_rng(42))
        assert a == b
        kept_ids = [c.instance_id for c in a]
        assert kept_ids == sorted(kept_ids)

    def test_out_of_range_fraction_rejected(self):
        with pytest.raises(ValidationError):
            drop_clicks(self._clicks(2), 1.5, np.random.default_rng(0))
