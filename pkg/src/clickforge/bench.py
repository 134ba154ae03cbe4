"""Benchmarks: per-epoch regime cost (CSV) and numba-vs-numpy kernels.

The regime benchmark writes ``regime,epoch,seconds,loss`` rows so the
per-object versus single-pass training cost can be compared directly.
The kernel benchmark times both backends of every dual kernel on
representative shapes and reports the speedup of the jitted build.
"""

import csv
import io
import time
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .synth import SynthConfig, gen_dataset
from .train import TrainConfig, train_panoptic, train_standard


def regime_rows(
    dataset,
    cfg: TrainConfig,
    regimes: Sequence[str] = ("standard", "negative", "panoptic"),
) -> list[tuple[str, int, float, float]]:
    rows = []
    for regime in regimes:
        if regime in ("standard", "negative"):
            run, _ = train_standard(dataset, cfg, use_negatives=regime == "negative")
        else:
            run, _ = train_panoptic(dataset, cfg, center_head=regime == "panoptic_center_head")
        for epoch, (sec, loss) in enumerate(zip(run.epoch_seconds, run.loss_trace)):
            rows.append((run.regime, epoch, sec, loss))
    return rows


def write_regime_csv(rows, out_path):
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["regime", "epoch", "seconds", "loss"])
        writer.writerows(rows)


def _kernel_cases(rng: np.random.Generator) -> dict:
    image = np.maximum(rng.normal(0.3, 0.5, size=(128, 128, 16)), 0)
    grad = rng.normal(size=(128, 128, 8))
    weights = rng.normal(size=(3, 3, 16, 8))
    bias = rng.normal(size=8)
    heat = rng.random((256, 256))
    mask = (rng.random((256, 256)) < 0.5).astype(np.uint8)
    thing = (rng.random((256, 256)) < 0.6).astype(np.uint8)
    offsets = rng.normal(size=(256, 256, 2))
    crows = rng.uniform(0, 256, size=12)
    ccols = rng.uniform(0, 256, size=12)
    cids = np.arange(1, 13, dtype=np.int32)
    rows = rng.uniform(0, 256, size=8)
    cols = rng.uniform(0, 256, size=8)
    return {
        "gaussian_map": (256, 256, rows, cols, 8.0, True),
        "erode3x3": (mask,),
        "assign_nearest": (thing, offsets, crows, ccols, cids),
        "local_peaks": (heat, 0.1, 7),
        "conv2d": (image, weights, bias),
        "conv2d_wgrad": (image, grad, 3, 3),
    }


def benchmark_kernels(repeats: int = 15, seed: int = 0) -> list[dict]:
    """Time both backends of each dual kernel; returns one record per
    kernel with mean milliseconds and the numba speedup."""
    cases = _kernel_cases(np.random.default_rng(seed))
    records = []
    for name, (fn_numba, fn_numpy) in _kernels.DUAL_KERNELS.items():
        args = cases[name]
        results = {}
        for label, fn in (("numba", fn_numba), ("numpy", fn_numpy)):
            if label == "numba" and not _kernels.NUMBA_ENABLED:
                results[label] = float("nan")
                continue
            fn(*args)  # warm-up / JIT
            t0 = time.perf_counter()
            for _ in range(repeats):
                fn(*args)
            results[label] = (time.perf_counter() - t0) / repeats * 1000
        records.append(
            {
                "kernel": name,
                "numba_ms": results["numba"],
                "numpy_ms": results["numpy"],
                "speedup": results["numpy"] / results["numba"],
            }
        )
    return records


def format_kernel_table(records) -> str:
    out = io.StringIO()
    out.write(f"backend in use: {_kernels.BACKEND}\n")
    out.write(f"{'kernel':<16}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}\n")
    for rec in records:
        out.write(
            f"{rec['kernel']:<16}{rec['numba_ms']:>10.3f}{rec['numpy_ms']:>10.3f}"
            f"{rec['speedup']:>8.2f}x\n"
        )
    return out.getvalue()
