"""Loss functions: class weights, weighted CE, offset L1, center MSE."""

import math

import numpy as np
import pytest

from clickforge.errors import ValidationError
from clickforge.losses import (
    ClassAreaStats,
    LossBreakdown,
    center_loss,
    class_weights,
    offset_loss,
    weighted_cross_entropy,
)


def finite_diff(loss_fn, x, h=1e-6):
    """Central-difference gradient oracle for scalar-valued loss_fn."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn(x)
        flat[i] = orig - h
        down = loss_fn(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / denom


class TestClassWeights:
    def test_equal_area_weight(self):
        w = class_weights(ClassAreaStats(areas={1: 500}, background_area=500))
        assert w[1] == pytest.approx(1.0 / math.log(2.02), abs=1e-9)

    def test_zero_area_weight(self):
        w = class_weights(ClassAreaStats(areas={1: 0}, background_area=100))
        assert w[1] == pytest.approx(1.0 / math.log(1.02), abs=1e-9)

    def test_unit_weight_at_e_minus_offset(self):
        bg = 1000
        area = bg * (math.e - 1.02)
        w = class_weights(ClassAreaStats(areas={1: area}, background_area=bg))
        assert w[1] == pytest.approx(1.0, abs=1e-9)

    def test_background_weight_uses_unit_ratio(self):
        w = class_weights(ClassAreaStats(areas={1: 7}, background_area=123))
        assert w[0] == pytest.approx(1.0 / math.log(2.02), abs=1e-9)

    def test_strictly_decreasing_in_area(self):
        ws = [
            class_weights(ClassAreaStats(areas={1: a}, background_area=1000))[1]
            for a in (0, 10, 100, 1000, 10000)
        ]
        assert all(a > b for a, b in zip(ws, ws[1:]))

    def test_scale_invariance(self):
        w1 = class_weights(ClassAreaStats(areas={1: 50, 2: 500}, background_area=2000))
        w2 = class_weights(ClassAreaStats(areas={1: 500, 2: 5000}, background_area=20000))
        for cid in (0, 1, 2):
            assert w1[cid] == pytest.approx(w2[cid], abs=1e-12)

    def test_zero_background_rejected(self):
        with pytest.raises(ValidationError):
            ClassAreaStats(areas={1: 5}, background_area=0)


class TestWeightedCrossEntropy:
    def test_confident_correct_scores_near_zero_loss(self):
        scores = np.zeros((2, 2, 3))
        target = np.array([[0, 1], [2, 0]])
        for i in range(2):
            for j in range(2):
                scores[i, j, target[i, j]] = 50.0
        loss, _ = weighted_cross_entropy(scores, target, {0: 1.0, 1: 1.0, 2: 1.0})
        assert loss < 1e-12

    def test_uniform_weights_match_unweighted(self):
        rng = np.random.default_rng(0)
        scores = rng.normal(size=(4, 5, 3))
        target = rng.integers(0, 3, size=(4, 5))
        loss, _ = weighted_cross_entropy(scores, target, {0: 1.0, 1: 1.0, 2: 1.0})
        # independent plain cross entropy
        e = np.exp(scores - scores.max(axis=2, keepdims=True))
        p = e / e.sum(axis=2, keepdims=True)
        expected = -np.log(np.take_along_axis(p, target[..., None], 2)[..., 0]).mean()
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_hand_computed_two_class_pixel(self):
        scores = np.zeros((1, 1, 2))
        target = np.zeros((1, 1), dtype=np.int64)
        loss, _ = weighted_cross_entropy(scores, target, {0: 2.0, 1: 1.0})
        assert loss == pytest.approx(2 * math.log(2), abs=1e-9)

    def test_constant_weight_scales_loss(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=(3, 3, 4))
        target = rng.integers(0, 4, size=(3, 3))
        ones = {c: 1.0 for c in range(4)}
        threes = {c: 3.0 for c in range(4)}
        l1, g1 = weighted_cross_entropy(scores, target, ones)
        l3, g3 = weighted_cross_entropy(scores, target, threes)
        assert l3 == pytest.approx(3 * l1, rel=1e-12)
        np.testing.assert_allclose(g3, 3 * g1, rtol=1e-12)

    def test_missing_weight_rejected(self):
        with pytest.raises(ValidationError):
            weighted_cross_entropy(np.zeros((1, 1, 3)), np.array([[2]]), {0: 1.0, 1: 1.0})

    def test_gradient_matches_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            scores = rng.normal(size=(3, 4, 3))
            target = rng.integers(0, 3, size=(3, 4))
            weights = {c: float(rng.uniform(0.5, 3.0)) for c in range(3)}
            _, grad = weighted_cross_entropy(scores, target, weights)
            oracle = finite_diff(
                lambda s: weighted_cross_entropy(s, target, weights)[0], scores.copy()
            )
            assert rel_err(grad, oracle) < 1e-4


class TestOffsetLoss:
    def test_exact_prediction_zero(self):
        t = np.random.default_rng(0).normal(size=(4, 4, 2))
        fg = np.ones((4, 4), dtype=np.uint8)
        loss, grad = offset_loss(t, t, fg)
        assert loss == 0.0
        assert (grad == 0).all()

    def test_empty_foreground_zero(self):
        loss, grad = offset_loss(np.ones((3, 3, 2)), np.zeros((3, 3, 2)), np.zeros((3, 3)))
        assert loss == 0.0
        assert (grad == 0).all()

    def test_single_pixel_hand_value(self):
        pred = np.zeros((1, 1, 2))
        pred[0, 0] = (1.0, -1.0)
        loss, _ = offset_loss(pred, np.zeros((1, 1, 2)), np.ones((1, 1)))
        assert loss == pytest.approx(1.0, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            pred = rng.normal(size=(4, 4, 2))
            target = rng.normal(size=(4, 4, 2))
            fg = (rng.random((4, 4)) < 0.6).astype(np.uint8)
            _, grad = offset_loss(pred, target, fg)
            oracle = finite_diff(lambda p: offset_loss(p, target, fg)[0], pred.copy())
            assert rel_err(grad, oracle) < 1e-4


class TestCenterLoss:
    def test_exact_prediction_zero(self):
        t = np.random.default_rng(0).random((5, 5))
        assert center_loss(t, t)[0] == 0.0

    def test_constant_half_vs_zero(self):
        loss, _ = center_loss(np.full((6, 6), 0.5), np.zeros((6, 6)))
        assert loss == pytest.approx(0.25, abs=1e-12)

    def test_zero_pred_vs_unit_peak_equals_target_energy(self):
        rr = np.arange(10)[:, None] - 4
        cc = np.arange(10)[None, :] - 5
        target = np.exp(-(rr**2 + cc**2) / (2 * 2.0**2))
        loss, _ = center_loss(np.zeros((10, 10)), target)
        assert loss == pytest.approx(float((target**2).sum()) / 100, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            pred = rng.normal(size=(5, 5))
            target = rng.normal(size=(5, 5))
            _, grad = center_loss(pred, target)
            oracle = finite_diff(lambda p: center_loss(p, target)[0], pred.copy())
            assert rel_err(grad, oracle) < 1e-4


class TestLossBreakdown:
    def test_total_is_weighted_sum(self):
        b = LossBreakdown(semantic=2.0, offset=10.0, center=0.01)
        assert b.total == pytest.approx(2.0 * 1.0 + 10.0 * 0.01 + 0.01 * 200.0, abs=1e-12)

    def test_center_optional(self):
        b = LossBreakdown(semantic=1.0, offset=1.0)
        assert b.center is None
        assert b.total == pytest.approx(1.0 + 0.01, abs=1e-12)
