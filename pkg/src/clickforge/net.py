"""Micro encoder-decoder network with hand-derived gradients.

A desk-scale stand-in for a full segmentation UNet: two 3x3 conv + ReLU
blocks per level, 2x max-pool down, nearest-neighbour up with skip
concatenation, and 1x1 conv heads for class scores, center offsets, and
an optional center heatmap.  Everything runs in float64 so analytic
gradients can be checked against central finite differences.

Parameters are value-semantic: a flat name -> array mapping in fixed
declaration order, which is also the checkpoint payload order.
"""

import io
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import conv2d, conv2d_wgrad
from .errors import ValidationError
from .fusion import PanopticPrediction

CHECKPOINT_MAGIC = b"CFK1"


@dataclass(frozen=True)
class NetConfig:
    in_channels: int = 4
    base_width: int = 8
    depth: int = 2
    semantic_classes: int = 2
    offsets: bool = False
    centers: bool = False

    def __post_init__(self):
        if self.in_channels not in (4, 5):
            raise ValidationError(f"in_channels must be 4 or 5, got {self.in_channels}")
        if self.base_width < 1 or self.depth < 1:
            raise ValidationError("base_width and depth must be >= 1")
        if self.semantic_classes < 2:
            raise ValidationError("need at least background + one thing class")

    def to_json(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "base_width": self.base_width,
            "depth": self.depth,
            "semantic_classes": self.semantic_classes,
            "offsets": self.offsets,
            "centers": self.centers,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NetConfig":
        return cls(**doc)


def layer_defs(cfg: NetConfig) -> list[tuple[str, int, int, int]]:
    """Conv layers in declaration order as (name, ksize, cin, cout)."""
    widths = [cfg.base_width * 2**l for l in range(cfg.depth)]
    mid = cfg.base_width * 2**cfg.depth
    defs = []
    cin = cfg.in_channels
    for l, width in enumerate(widths):
        defs.append((f"enc{l}_conv1", 3, cin, width))
        defs.append((f"enc{l}_conv2", 3, width, width))
        cin = width
    defs.append(("mid_conv1", 3, cin, mid))
    defs.append(("mid_conv2", 3, mid, mid))
    deeper = mid
    for l in reversed(range(cfg.depth)):
        defs.append((f"dec{l}_conv1", 3, deeper + widths[l], widths[l]))
        defs.append((f"dec{l}_conv2", 3, widths[l], widths[l]))
        deeper = widths[l]
    defs.append(("head_semantic", 1, widths[0], cfg.semantic_classes))
    if cfg.offsets:
        defs.append(("head_offsets", 1, widths[0], 2))
    if cfg.centers:
        defs.append(("head_centers", 1, widths[0], 1))
    return defs


@dataclass(frozen=True)
class Parameters:
    """Named weight/bias arrays with a lossless flat-vector view."""

    arrays: dict[str, np.ndarray]

    def __post_init__(self):
        for name, arr in self.arrays.items():
            if not np.isfinite(arr).all():
                raise ValidationError(f"parameter {name} contains non-finite values")

    def flat(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.arrays.values()])

    def with_flat(self, vec: np.ndarray) -> "Parameters":
        """Rebuild parameters of this shape from a flat vector."""
        vec = np.asarray(vec, dtype=np.float64)
        expected = sum(a.size for a in self.arrays.values())
        if vec.shape != (expected,):
            raise ValidationError(f"flat vector has size {vec.size}, expected {expected}")
        out = {}
        pos = 0
        for name, arr in self.arrays.items():
            out[name] = vec[pos : pos + arr.size].reshape(arr.shape).copy()
            pos += arr.size
        return Parameters(out)

    def zeros_like(self) -> "Parameters":
        return Parameters({k: np.zeros_like(v) for k, v in self.arrays.items()})


def init_params(cfg: NetConfig, seed: int = 0) -> Parameters:
    """He fan-in initialization from a seeded generator; biases zero."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, k, cin, cout in layer_defs(cfg):
        std = np.sqrt(2.0 / (k * k * cin))
        arrays[f"{name}_w"] = rng.normal(0.0, std, size=(k, k, cin, cout))
        arrays[f"{name}_b"] = np.zeros(cout, dtype=np.float64)
    return Parameters(arrays)


def _conv(params: Parameters, name: str, x: np.ndarray) -> np.ndarray:
    return conv2d(x, params.arrays[f"{name}_w"], params.arrays[f"{name}_b"])


def _conv_backward(
    params: Parameters, name: str, x: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w = params.arrays[f"{name}_w"]
    g = np.ascontiguousarray(g)
    dw = conv2d_wgrad(x, g, w.shape[0], w.shape[1])
    db = g.sum(axis=(0, 1))
    # input gradient = same-padding conv of g with the flipped, transposed kernel
    w_flip = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    dx = conv2d(g, w_flip, np.zeros(w.shape[2]))
    return dx, dw, db


def _maxpool(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w, c = x.shape
    blocks = x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 1, 3, 4).reshape(h // 2, w // 2, 4, c)
    arg = blocks.argmax(axis=2)  # first max in scan order on ties
    return np.take_along_axis(blocks, arg[:, :, None, :], axis=2)[:, :, 0, :], arg


def _maxpool_backward(arg: np.ndarray, g: np.ndarray) -> np.ndarray:
    h2, w2, c = g.shape
    blocks = np.zeros((h2, w2, 4, c), dtype=np.float64)
    np.put_along_axis(blocks, arg[:, :, None, :], g[:, :, None, :], axis=2)
    return blocks.reshape(h2, w2, 2, 2, c).transpose(0, 2, 1, 3, 4).reshape(h2 * 2, w2 * 2, c)


def _upsample(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def _upsample_backward(g: np.ndarray) -> np.ndarray:
    h, w, c = g.shape
    return g.reshape(h // 2, 2, w // 2, 2, c).sum(axis=(1, 3))


def forward(params: Parameters, x: np.ndarray, cfg: NetConfig) -> tuple[PanopticPrediction, dict]:
    """Run the network; returns the prediction and the activation cache
    consumed by backward."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.ndim != 3 or x.shape[2] != cfg.in_channels:
        raise ValidationError(
            f"input must be (H, W, {cfg.in_channels}), got shape {x.shape}"
        )
    h, w = x.shape[:2]
    div = 2**cfg.depth
    if h % div or w % div:
        raise ValidationError(f"input {h}x{w} not divisible by 2^depth={div}")
    cache: dict = {"params_ref": params, "enc": [], "dec": {}}
    a = x
    for l in range(cfg.depth):
        x1 = a
        z1 = _conv(params, f"enc{l}_conv1", x1)
        a1 = np.maximum(z1, 0.0)
        z2 = _conv(params, f"enc{l}_conv2", a1)
        a2 = np.maximum(z2, 0.0)
        a, arg = _maxpool(a2)
        pooled = a
        cache["enc"].append({"x1": x1, "z1": z1, "a1": a1, "z2": z2, "a2": a2, "arg": arg})
    zm1 = _conv(params, "mid_conv1", a)
    am1 = np.maximum(zm1, 0.0)
    zm2 = _conv(params, "mid_conv2", am1)
    a = np.maximum(zm2, 0.0)
    cache["mid"] = {"x1": pooled, "z1": zm1, "a1": am1, "z2": zm2}
    for l in reversed(range(cfg.depth)):
        up = _upsample(a)
        cat = np.concatenate([up, cache["enc"][l]["a2"]], axis=2)
        z1 = _conv(params, f"dec{l}_conv1", cat)
        a1 = np.maximum(z1, 0.0)
        z2 = _conv(params, f"dec{l}_conv2", a1)
        a = np.maximum(z2, 0.0)
        cache["dec"][l] = {"cat": cat, "z1": z1, "a1": a1, "z2": z2, "up_c": up.shape[2]}
    cache["final"] = a
    semantic = _conv(params, "head_semantic", a)
    if cfg.offsets:
        offsets = _conv(params, "head_offsets", a)
    else:
        offsets = np.zeros((h, w, 2), dtype=np.float64)
    heatmap = _conv(params, "head_centers", a)[:, :, 0] if cfg.centers else None
    return PanopticPrediction(semantic=semantic, offsets=offsets, center_heatmap=heatmap), cache


def backward(
    params: Parameters,
    cfg: NetConfig,
    cache: dict,
    d_semantic: np.ndarray,
    d_offsets: Optional[np.ndarray] = None,
    d_centers: Optional[np.ndarray] = None,
) -> Parameters:
    """Exact gradients of the scalar loss w.r.t. every parameter, given
    the loss gradients at each head output."""
    if cache.get("params_ref") is not params:
        raise ValidationError("activation cache is stale: it was produced by different parameters")
    if d_offsets is not None and not cfg.offsets:
        raise ValidationError("offset gradient given but the network has no offset head")
    if d_centers is not None and not cfg.centers:
        raise ValidationError("center gradient given but the network has no center head")
    grads: dict[str, np.ndarray] = {}
    final = cache["final"]
    d_final, grads["head_semantic_w"], grads["head_semantic_b"] = _conv_backward(
        params, "head_semantic", final, np.asarray(d_semantic, dtype=np.float64)
    )
    if cfg.offsets:
        if d_offsets is None:
            d_offsets = np.zeros(final.shape[:2] + (2,))
        dx, grads["head_offsets_w"], grads["head_offsets_b"] = _conv_backward(
            params, "head_offsets", final, np.asarray(d_offsets, dtype=np.float64)
        )
        d_final += dx
    if cfg.centers:
        if d_centers is None:
            d_centers = np.zeros(final.shape[:2])
        dx, grads["head_centers_w"], grads["head_centers_b"] = _conv_backward(
            params, "head_centers", final, np.asarray(d_centers, dtype=np.float64)[:, :, None]
        )
        d_final += dx
    skip_grads: dict[int, np.ndarray] = {}
    g = d_final
    for l in range(cfg.depth):  # dec0 ran last in forward, unwind from it
        dec = cache["dec"][l]
        g = g * (dec["z2"] > 0)
        g, grads[f"dec{l}_conv2_w"], grads[f"dec{l}_conv2_b"] = _conv_backward(
            params, f"dec{l}_conv2", dec["a1"], g
        )
        g = g * (dec["z1"] > 0)
        g, grads[f"dec{l}_conv1_w"], grads[f"dec{l}_conv1_b"] = _conv_backward(
            params, f"dec{l}_conv1", dec["cat"], g
        )
        up_c = dec["up_c"]
        skip_grads[l] = g[:, :, up_c:]
        g = _upsample_backward(g[:, :, :up_c])
    mid = cache["mid"]
    g = g * (mid["z2"] > 0)
    g, grads["mid_conv2_w"], grads["mid_conv2_b"] = _conv_backward(params, "mid_conv2", mid["a1"], g)
    g = g * (mid["z1"] > 0)
    g, grads["mid_conv1_w"], grads["mid_conv1_b"] = _conv_backward(params, "mid_conv1", mid["x1"], g)
    for l in reversed(range(cfg.depth)):
        enc = cache["enc"][l]
        g = _maxpool_backward(enc["arg"], g) + skip_grads[l]
        g = g * (enc["z2"] > 0)
        g, grads[f"enc{l}_conv2_w"], grads[f"enc{l}_conv2_b"] = _conv_backward(
            params, f"enc{l}_conv2", enc["a1"], g
        )
        g = g * (enc["z1"] > 0)
        g, grads[f"enc{l}_conv1_w"], grads[f"enc{l}_conv1_b"] = _conv_backward(
            params, f"enc{l}_conv1", enc["x1"], g
        )
    ordered = {name: grads[name] for name in params.arrays}
    return Parameters(ordered)


def sgd_step(params: Parameters, grads: Parameters, lr: float) -> Parameters:
    if params.arrays.keys() != grads.arrays.keys():
        raise ValidationError("parameter and gradient layouts disagree")
    return Parameters(
        {name: params.arrays[name] - lr * grads.arrays[name] for name in params.arrays}
    )


def scale_params(params: Parameters, factor: float) -> Parameters:
    return Parameters({name: arr * factor for name, arr in params.arrays.items()})


def add_params(a: Parameters, b: Parameters) -> Parameters:
    if a.arrays.keys() != b.arrays.keys():
        raise ValidationError("parameter layouts disagree")
    return Parameters({name: a.arrays[name] + b.arrays[name] for name in a.arrays})


def save_checkpoint(path, cfg: NetConfig, params: Parameters):
    """Versioned binary: magic, length-prefixed config JSON, float64 LE
    payload in declaration order."""
    header = json.dumps(cfg.to_json()).encode("utf-8")
    payload = params.flat().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path) -> tuple[NetConfig, Parameters]:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(4) != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a clickforge checkpoint")
    (hlen,) = struct.unpack("<I", buf.read(4))
    cfg = NetConfig.from_json(json.loads(buf.read(hlen).decode("utf-8")))
    template = init_params(cfg, seed=0)
    expected = template.flat().size
    vec = np.frombuffer(buf.read(), dtype="<f8")
    if vec.size != expected:
        raise ValidationError(
            f"{path}: payload holds {vec.size} values, config implies {expected}"
        )
    return cfg, template.with_flat(vec)
