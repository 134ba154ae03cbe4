"""Both kernel backends must agree: exactly for integer outputs, to
floating round-off for accumulations."""

import numpy as np
import pytest

from clickforge import _kernels as K

pytestmark = pytest.mark.skipif(not K.NUMBA_ENABLED, reason="numba backend disabled")


@pytest.mark.parametrize("seed", range(5))
def test_gaussian_map_paths_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 6))
    rows = rng.uniform(0, 32, size=n)
    cols = rng.uniform(0, 32, size=n)
    for use_max in (True, False):
        a = K._gaussian_jit(32, 32, rows, cols, 8.0, use_max)
        b = K.gaussian_map_numpy(32, 32, rows, cols, 8.0, use_max)
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_erode_paths_agree(seed):
    mask = (np.random.default_rng(seed).random((24, 24)) < 0.7).astype(np.uint8)
    np.testing.assert_array_equal(K._erode_jit(mask), K.erode3x3_numpy(mask))


@pytest.mark.parametrize("seed", range(5))
def test_assign_paths_agree(seed):
    rng = np.random.default_rng(seed)
    thing = (rng.random((20, 20)) < 0.5).astype(np.uint8)
    offsets = rng.normal(scale=2.0, size=(20, 20, 2))
    k = int(rng.integers(1, 5))
    crows = rng.uniform(0, 20, size=k)
    ccols = rng.uniform(0, 20, size=k)
    cids = np.arange(1, k + 1, dtype=np.int32)
    np.testing.assert_array_equal(
        K._assign_jit(thing, offsets, crows, ccols, cids),
        K.assign_nearest_numpy(thing, offsets, crows, ccols, cids),
    )


@pytest.mark.parametrize("seed", range(5))
def test_peaks_paths_agree(seed):
    heat = np.random.default_rng(seed).random((24, 24))
    heat[heat < 0.3] = 0.25  # create plateaus to exercise the tie rule
    np.testing.assert_array_equal(
        K._peaks_jit(heat, 0.4, 5), K.local_peaks_numpy(heat, 0.4, 5)
    )


@pytest.mark.parametrize("k", [1, 3])
def test_conv_paths_agree(k):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(16, 16, 6))
    w = rng.normal(size=(k, k, 6, 4))
    b = rng.normal(size=4)
    np.testing.assert_allclose(
        K.conv2d_numba(x, w, b), K.conv2d_numpy(x, w, b), rtol=1e-12, atol=1e-12
    )


@pytest.mark.parametrize("k", [1, 3])
def test_wgrad_paths_agree(k):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(16, 16, 6))
    g = rng.normal(size=(16, 16, 4))
    np.testing.assert_allclose(
        K.conv2d_wgrad_numba(x, g, k, k), K.conv2d_wgrad_numpy(x, g, k, k), rtol=1e-12, atol=1e-12
    )


def test_env_flag_is_honored_in_subprocess():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import clickforge; print(clickforge.BACKEND)"],
        env={"PATH": "/usr/bin:/bin", "CLICKFORGE_NO_NUMBA": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
