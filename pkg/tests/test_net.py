"""Network: forward contracts, hand gradients vs finite differences,
parameter plumbing, checkpoints."""

import numpy as np
import pytest

from clickforge.errors import ValidationError
from clickforge.losses import center_loss, offset_loss, weighted_cross_entropy
from clickforge.net import (
    NetConfig,
    Parameters,
    backward,
    forward,
    init_params,
    layer_defs,
    load_checkpoint,
    save_checkpoint,
    scale_params,
    sgd_step,
)

SMALL = NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=2, offsets=True, centers=True)


def random_config(rng) -> NetConfig:
    return NetConfig(
        in_channels=int(rng.choice([4, 5])),
        base_width=int(rng.integers(2, 4)),
        depth=int(rng.integers(1, 3)),
        semantic_classes=int(rng.integers(2, 4)),
        offsets=bool(rng.integers(0, 2)),
        centers=bool(rng.integers(0, 2)),
    )


def scalar_loss_and_grads(params, x, cfg, rng):
    """Fixed random linear functional of all head outputs."""
    pred, cache = forward(params, x, cfg)
    ds = rng.normal(size=pred.semantic.shape)
    do = rng.normal(size=pred.offsets.shape) if cfg.offsets else None
    dc = rng.normal(size=pred.center_heatmap.shape) if cfg.centers else None

    def loss_of(p):
        out, _ = forward(p, x, cfg)
        total = float((out.semantic * ds).sum())
        if cfg.offsets:
            total += float((out.offsets * do).sum())
        if cfg.centers:
            total += float((out.center_heatmap * dc).sum())
        return total

    grads = backward(params, cfg, cache, ds, do, dc)
    return loss_of, grads


class TestForward:
    def test_zero_params_zero_outputs(self):
        params = scale_params(init_params(SMALL, seed=0), 0.0)
        x = np.random.default_rng(0).normal(size=(8, 8, 4))
        pred, _ = forward(params, x, SMALL)
        assert (pred.semantic == 0).all()
        assert (pred.offsets == 0).all()
        assert (pred.center_heatmap == 0).all()

    def test_output_spatial_size_matches_input(self):
        cfg = NetConfig(in_channels=4, base_width=4, depth=2, semantic_classes=3, offsets=True)
        params = init_params(cfg, seed=1)
        x = np.random.default_rng(1).normal(size=(16, 24, 4))
        pred, _ = forward(params, x, cfg)
        assert pred.semantic.shape == (16, 24, 3)
        assert pred.offsets.shape == (16, 24, 2)

    def test_deterministic_across_runs(self):
        params = init_params(SMALL, seed=2)
        x = np.random.default_rng(2).normal(size=(8, 8, 4))
        a, _ = forward(params, x, SMALL)
        b, _ = forward(params, x, SMALL)
        np.testing.assert_array_equal(a.semantic, b.semantic)
        np.testing.assert_array_equal(a.offsets, b.offsets)

    def test_wrong_channel_count_rejected(self):
        params = init_params(SMALL, seed=0)
        with pytest.raises(ValidationError):
            forward(params, np.zeros((8, 8, 3)), SMALL)

    def test_indivisible_size_rejected(self):
        params = init_params(SMALL, seed=0)
        with pytest.raises(ValidationError):
            forward(params, np.zeros((7, 8, 4)), SMALL)

    def test_baseline_config_emits_zero_offsets(self):
        cfg = NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=2)
        params = init_params(cfg, seed=3)
        pred, _ = forward(params, np.random.default_rng(0).normal(size=(8, 8, 4)), cfg)
        assert (pred.offsets == 0).all()
        assert pred.center_heatmap is None


class TestBackward:
    def test_zero_upstream_zero_grads(self):
        params = init_params(SMALL, seed=4)
        x = np.random.default_rng(4).normal(size=(8, 8, 4))
        pred, cache = forward(params, x, SMALL)
        grads = backward(params, SMALL, cache, np.zeros_like(pred.semantic))
        assert all((g == 0).all() for g in grads.arrays.values())

    def test_stale_cache_rejected(self):
        params = init_params(SMALL, seed=5)
        x = np.random.default_rng(5).normal(size=(8, 8, 4))
        pred, cache = forward(params, x, SMALL)
        other = init_params(SMALL, seed=6)
        with pytest.raises(ValidationError):
            backward(other, SMALL, cache, np.zeros_like(pred.semantic))

    def test_single_conv_layer_closed_form(self):
        # 1x1 spatial input, 3x3 kernel: only the center tap sees data, so
        # d loss / d w[1,1,c,o] = x_c * g_o and d loss / d b[o] = g_o
        cfg = NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=2)
        params = init_params(cfg, seed=7)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(2, 2, 4))
        pred, cache = forward(params, x, cfg)
        g = rng.normal(size=pred.semantic.shape)
        grads = backward(params, cfg, cache, g)
        final = cache["final"]
        dw_head = np.einsum("ijc,ijo->co", final, g)[None, None]
        np.testing.assert_allclose(grads.arrays["head_semantic_w"], dw_head, rtol=1e-12)
        np.testing.assert_allclose(grads.arrays["head_semantic_b"], g.sum(axis=(0, 1)), rtol=1e-12)

    def test_gradcheck_20_random_configs(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            cfg = random_config(rng)
            size = 8 if cfg.depth <= 2 else 16
            params = init_params(cfg, seed=seed)
            x = rng.normal(size=(size, size, cfg.in_channels))
            loss_of, grads = scalar_loss_and_grads(params, x, cfg, rng)
            flat = params.flat()
            gflat = grads.flat()
            idx = rng.choice(flat.size, size=min(40, flat.size), replace=False)
            h = 1e-6
            for i in idx:
                up = flat.copy()
                up[i] += h
                down = flat.copy()
                down[i] -= h
                num = (loss_of(params.with_flat(up)) - loss_of(params.with_flat(down))) / (2 * h)
                denom = max(abs(num), abs(gflat[i]), 1e-10)
                assert abs(num - gflat[i]) / denom < 1e-4, f"seed={seed} param {i}"

    def test_gradcheck_through_real_losses(self):
        cfg = NetConfig(in_channels=4, base_width=2, depth=1, semantic_classes=3, offsets=True, centers=True)
        rng = np.random.default_rng(99)
        params = init_params(cfg, seed=99)
        x = rng.normal(size=(8, 8, 4))
        target = rng.integers(0, 3, size=(8, 8))
        weights = {0: 1.0, 1: 2.0, 2: 0.5}
        off_target = rng.normal(size=(8, 8, 2))
        fg = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        heat_target = rng.random((8, 8))

        def total_loss(p):
            pred, _ = forward(p, x, cfg)
            l1, _ = weighted_cross_entropy(pred.semantic, target, weights)
            l2, _ = offset_loss(pred.offsets, off_target, fg)
            l3, _ = center_loss(pred.center_heatmap, heat_target)
            return l1 + 0.01 * l2 + 200.0 * l3

        pred, cache = forward(params, x, cfg)
        _, d_sem = weighted_cross_entropy(pred.semantic, target, weights)
        _, d_off = offset_loss(pred.offsets, off_target, fg)
        _, d_ctr = center_loss(pred.center_heatmap, heat_target)
        grads = backward(params, cfg, cache, d_sem, 0.01 * d_off, 200.0 * d_ctr)
        flat = params.flat()
        gflat = grads.flat()
        idx = rng.choice(flat.size, size=50, replace=False)
        h = 1e-6
        for i in idx:
            up = flat.copy()
            up[i] += h
            down = flat.copy()
            down[i] -= h
            num = (total_loss(params.with_flat(up)) - total_loss(params.with_flat(down))) / (2 * h)
            denom = max(abs(num), abs(gflat[i]), 1e-10)
            assert abs(num - gflat[i]) / denom < 1e-4


class TestParameters:
    def test_flat_round_trip_lossless(self):
        params = init_params(SMALL, seed=8)
        again = params.with_flat(params.flat())
        for name in params.arrays:
            np.testing.assert_array_equal(params.arrays[name], again.arrays[name])

    def test_sgd_step_arithmetic(self):
        params = Parameters({"w": np.array([1.0])})
        grads = Parameters({"w": np.array([2.0])})
        assert sgd_step(params, grads, 0.1).arrays["w"][0] == pytest.approx(0.8)

    def test_sgd_zero_lr_or_zero_grads_identity(self):
        params = init_params(SMALL, seed=9)
        zeros = params.zeros_like()
        for stepped in (sgd_step(params, zeros, 0.5), sgd_step(params, params, 0.0)):
            np.testing.assert_array_equal(stepped.flat(), params.flat())

    def test_layer_widths_follow_depth(self):
        cfg = NetConfig(in_channels=4, base_width=8, depth=2, semantic_classes=2)
        defs = {name: (cin, cout) for name, _, cin, cout in layer_defs(cfg)}
        assert defs["enc0_conv1"] == (4, 8)
        assert defs["enc1_conv1"] == (8, 16)
        assert defs["mid_conv1"] == (16, 32)
        assert defs["dec1_conv1"] == (32 + 16, 16)
        assert defs["dec0_conv1"] == (16 + 8, 8)
        assert defs["head_semantic"] == (8, 2)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            Parameters({"w": np.array([np.nan])})


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        cfg = NetConfig(in_channels=5, base_width=3, depth=2, semantic_classes=3, offsets=True)
        params = init_params(cfg, seed=10)
        save_checkpoint(tmp_path / "m.cfk", cfg, params)
        cfg2, params2 = load_checkpoint(tmp_path / "m.cfk")
        assert cfg2 == cfg
        np.testing.assert_array_equal(params.flat(), params2.flat())

    def test_magic_bytes(self, tmp_path):
        save_checkpoint(tmp_path / "m.cfk", SMALL, init_params(SMALL, seed=0))
        assert (tmp_path / "m.cfk").read_bytes()[:4] == b"CFK1"

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "bad.cfk").write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValidationError):
            load_checkpoint(tmp_path / "bad.cfk")

    def test_truncated_payload_rejected(self, tmp_path):
        save_checkpoint(tmp_path / "m.cfk", SMALL, init_params(SMALL, seed=0))
        data = (tmp_path / "m.cfk").read_bytes()
        (tmp_path / "cut.cfk").write_bytes(data[:-16])
        with pytest.raises(ValidationError):
            load_checkpoint(tmp_path / "cut.cfk")
