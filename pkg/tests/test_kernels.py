"""The compiled and pure-numpy recurrent kernels must agree bitwise-close,
and the backend env switch must select the right implementation."""

import os
import subprocess
import sys

import numpy as np
import pytest

from sentorder.kernels import BACKEND, numpy_impl

numba_impl = pytest.importorskip("sentorder.kernels.numba_impl")


def random_case(seed, T=7, D=5, H=4):
    rng = np.random.default_rng(seed)
    xw = rng.uniform(-1, 1, (T, 4 * H))
    wh = rng.uniform(-0.8, 0.8, (H, 4 * H))
    dh = rng.uniform(-1, 1, (T, H))
    return xw, wh, dh


@pytest.mark.parametrize("seed", range(5))
def test_forward_backends_agree(seed):
    xw, wh, _ = random_case(seed)
    h_np, stash_np = numpy_impl.lstm_seq_forward(xw, wh)
    h_nb, stash_nb = numba_impl.lstm_seq_forward(xw, wh)
    np.testing.assert_allclose(h_nb, h_np, rtol=0, atol=1e-14)
    for a, b in zip(stash_nb, stash_np):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_backward_backends_agree(seed):
    xw, wh, dh = random_case(seed)
    h_np, stash = numpy_impl.lstm_seq_forward(xw, wh)
    dxw_np, dwh_np = numpy_impl.lstm_seq_backward(dh, wh, h_np, stash)
    dxw_nb, dwh_nb = numba_impl.lstm_seq_backward(dh, wh, h_np, stash)
    np.testing.assert_allclose(dxw_nb, dxw_np, rtol=0, atol=1e-13)
    np.testing.assert_allclose(dwh_nb, dwh_np, rtol=0, atol=1e-13)


def test_numpy_backward_matches_finite_differences():
    xw, wh, _ = random_case(99, T=4, D=3, H=2)
    h, stash = numpy_impl.lstm_seq_forward(xw, wh)
    dh = np.ones_like(h)
    dxw, dwh = numpy_impl.lstm_seq_backward(dh, wh, h, stash)
    eps = 1e-6
    for arr, grad in ((xw, dxw), (wh, dwh)):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for k in range(0, flat.size, 7):  # sample coordinates
            orig = flat[k]
            flat[k] = orig + eps
            up = numpy_impl.lstm_seq_forward(xw, wh)[0].sum()
            flat[k] = orig - eps
            dn = numpy_impl.lstm_seq_forward(xw, wh)[0].sum()
            flat[k] = orig
            assert gflat[k] == pytest.approx((up - dn) / (2 * eps), abs=1e-6)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("SENTORDER_BACKEND", None)
    else:
        env["SENTORDER_BACKEND"] = env_value
    return subprocess.run(
        [sys.executable, "-c", "from sentorder.kernels import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, env=env)


def test_env_var_selects_numpy_backend():
    proc = _backend_in_subprocess("numpy")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "numpy"


def test_invalid_backend_rejected():
    proc = _backend_in_subprocess("cuda")
    assert proc.returncode != 0
    assert "SENTORDER_BACKEND" in proc.stderr


def test_active_backend_is_declared():
    assert BACKEND in ("numba", "numpy")
