"""Evaluation helpers: overlap resolution, report shape, ablation plumbing."""

import numpy as np
import pytest

from clickforge.clicks import EncodingConfig
from clickforge.evaluate import evaluate_regime, missing_click_ablation, resolve_overlaps
from clickforge.net import NetConfig, init_params
from clickforge.synth import SynthConfig, gen_dataset


def tiny_dataset():
    cfg = SynthConfig(
        height=16, width=16, min_objects=1, max_objects=2,
        min_radius=2, max_radius=4, min_separation=6.0, seed=0,
    )
    return gen_dataset(cfg, 2)


class TestResolveOverlaps:
    def test_contested_pixel_goes_to_highest_score(self):
        m1 = np.zeros((2, 2), dtype=np.uint8)
        m2 = np.zeros((2, 2), dtype=np.uint8)
        m1[0, 0] = m2[0, 0] = 1  # contested
        m1[0, 1] = 1
        s1 = np.full((2, 2), 0.4)
        s2 = np.full((2, 2), 0.9)
        out = resolve_overlaps({1: m1, 2: m2}, {1: s1, 2: s2}, (2, 2))
        assert out[0, 0] == 2
        assert out[0, 1] == 1
        assert out[1, 0] == 0

    def test_equal_scores_go_to_smaller_id(self):
        m = np.ones((1, 1), dtype=np.uint8)
        s = np.full((1, 1), 0.5)
        out = resolve_overlaps({4: m, 2: m}, {4: s, 2: s}, (1, 1))
        assert out[0, 0] == 2

    def test_unclaimed_stays_background(self):
        out = resolve_overlaps({}, {}, (3, 3))
        assert (out == 0).all()


@pytest.mark.parametrize("regime,net_cfg", [
    ("standard", NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=2)),
    ("negative", NetConfig(in_channels=5, base_width=2, depth=1, semantic_classes=2)),
    ("panoptic", NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=3, offsets=True)),
])
def test_evaluate_regime_report_shape(regime, net_cfg):
    dataset = tiny_dataset()
    params = init_params(net_cfg, seed=0)
    report = evaluate_regime(params, net_cfg, dataset, regime, EncodingConfig())
    assert set(report) == {"miou", "fg_iou", "pq", "sq", "rq", "per_scene"}
    assert 0.0 <= report["miou"] <= 1.0
    assert 0.0 <= report["pq"] <= 100.0
    assert len(report["per_scene"]) == len(dataset)


def test_missing_click_ablation_shape():
    dataset = tiny_dataset()
    net_cfg = NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=3, offsets=True, centers=True)
    params = init_params(net_cfg, seed=0)
    scores = missing_click_ablation(params, net_cfg, dataset, fractions=(0.0, 1.0))
    assert set(scores["predicted"]) == {0.0, 1.0}
    assert scores["user_clicks"].rq >= 0.0


def test_ablation_needs_center_head():
    from clickforge.errors import ValidationError

    dataset = tiny_dataset()
    net_cfg = NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=3, offsets=True)
    params = init_params(net_cfg, seed=0)
    with pytest.raises(ValidationError):
        missing_click_ablation(params, net_cfg, dataset, fractions=(0.0,))
