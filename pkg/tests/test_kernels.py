import os
import subprocess
import sys

import numpy as np
import pytest

from levyescape import kernels
from levyescape._pykernels import philox4x32
from levyescape.model import MorrisLecarDrift, ZeroDrift
from levyescape.solver import S_STAR, Region

compiled = pytest.mark.skipif(kernels._ckernels is None, reason="compiled core not built")


@pytest.mark.parametrize("ctr,key,expect", [
    ((0, 0, 0, 0), (0, 0), (0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8)),
    ((0xffffffff,) * 4, (0xffffffff,) * 2, (0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd)),
    ((0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344), (0xa4093822, 0x299f31d0),
     (0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1)),
])
def test_philox_known_answers(ctr, key, expect):
    out = philox4x32(*(np.array([c], dtype=np.uint64) for c in ctr), *key)
    assert tuple(int(o[0]) for o in out) == expect


def test_uniforms_open_interval():
    u1, u2 = kernels.uniform_pairs(1, np.arange(100_000, dtype=np.uint64), 0, 0, backend="python")
    for u in (u1, u2):
        assert u.min() > 0 and u.max() < 1
        assert abs(u.mean() - 0.5) < 0.005


@compiled
def test_uniforms_identical_across_backends():
    ctr = np.arange(1000, dtype=np.uint64) * 7919
    a = kernels.uniform_pairs(123, ctr, 5, 1, backend="python")
    b = kernels.uniform_pairs(123, ctr, 5, 1, backend="cython")
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@compiled
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_draws_agree_across_backends(alpha):
    ctr = np.arange(5000, dtype=np.uint64)
    a = kernels.noise_draws(alpha, 4, ctr, 3, 0, backend="python")
    b = kernels.noise_draws(alpha, 4, ctr, 3, 0, backend="cython")
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@compiled
@pytest.mark.parametrize("alpha,drift", [(1.25, MorrisLecarDrift()), (2.0, MorrisLecarDrift()),
                                         (1.0, ZeroDrift())])
@pytest.mark.parametrize("bridge", [False, True])
def test_paths_agree_across_backends(alpha, drift, bridge):
    ids = np.arange(200)
    args = (drift, S_STAR, Region().box, alpha, 0.5, 0.5, 1e-3, 2000, 7, ids, False, bridge)
    sp, vp, wp, stp = kernels.simulate_paths(*args, backend="python")
    sc, vc, wc, stc = kernels.simulate_paths(*args, backend="cython")
    assert np.array_equal(stp, stc) and np.array_equal(sp, sc)
    assert np.allclose(vp, vc, rtol=1e-9) and np.allclose(wp, wc, rtol=1e-9)


def test_callable_drift_uses_numpy_path():
    called = []

    def f(v, w):
        called.append(1)
        return np.zeros_like(v), np.zeros_like(w)

    out = kernels.simulate_paths(f, (0.0, 0.0), (-1, 1, -1, 1), 1.0, 1.0, 0.0, 1e-3, 50, 1,
                                 np.arange(10))
    assert called and out[3].shape == (10,)


def test_start_outside_box_exits_immediately():
    steps, v, w, status = kernels.simulate_paths(ZeroDrift(), (2.0, 0.0), (-1, 1, -1, 1), 1.0,
                                                 1.0, 0.0, 1e-3, 50, 1, np.arange(4))
    assert np.all(status == 1) and np.all(steps == 0)


def test_forced_python_backend():
    env = dict(os.environ, LEVYESCAPE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import levyescape.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
