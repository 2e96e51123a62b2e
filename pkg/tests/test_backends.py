"""The numba kernels and the numpy fallback must agree to rounding error,
and the env flag must steer the selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from emocause import kernels
from emocause.kernels import ENV_VAR, get_backend, numba_available

HAS_NUMBA = numba_available()
needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


def random_case(rng, kind, hops, k, d):
    emb = rng.uniform(-0.8, 0.8, (k, d))
    query = rng.uniform(-0.8, 0.8, d)
    wlen = d + 1 if kind == "basic" else 3 * d + 1
    w = rng.uniform(-0.8, 0.8, wlen)
    return emb, query, float(rng.integers(-4, 5)), w, float(rng.uniform(-0.5, 0.5))


@needs_numba
@pytest.mark.parametrize("kind", ["basic", "convms"])
def test_forward_backward_agree_across_backends(kind, rng):
    npb = get_backend("numpy")
    nbb = get_backend("numba")
    for hops in (1, 2, 3):
        for k in (1, 2, 5, 9):
            d = int(rng.integers(2, 8))
            emb, query, dist, w, bias = random_case(rng, kind, hops, k, d)
            label = float(rng.integers(0, 2))
            fwd_np = npb.basic_forward if kind == "basic" else npb.convms_forward
            fwd_nb = nbb.basic_forward if kind == "basic" else nbb.convms_forward
            bwd_np = npb.basic_backward if kind == "basic" else npb.convms_backward
            bwd_nb = nbb.basic_backward if kind == "basic" else nbb.convms_backward
            r1 = fwd_np(emb, query, dist, w, bias, hops)
            r2 = fwd_nb(emb, query, dist, w, bias, hops)
            for a, b in zip(r1, r2):
                assert np.allclose(a, b, rtol=1e-12, atol=1e-13)
            g1 = bwd_np(emb, dist, w, r1[0], label, r1[2], r1[3], r1[4])
            g2 = bwd_nb(emb, dist, w, r2[0], label, r2[2], r2[3], r2[4])
            for a, b in zip(g1, g2):
                assert np.allclose(a, b, rtol=1e-12, atol=1e-13)


@needs_numba
def test_skipgram_updates_agree_across_backends(rng):
    npb = get_backend("numpy")
    nbb = get_backend("numba")
    v, d, n, kneg = 13, 7, 300, 5
    centers = rng.integers(0, v, n)
    contexts = rng.integers(0, v, n)
    negatives = rng.integers(0, v, (n, kneg))
    results = []
    for mod in (npb, nbb):
        w_in = np.linspace(-0.1, 0.1, v * d).reshape(v, d).copy()
        w_out = np.zeros((v, d))
        done = mod.skipgram_pairs(w_in, w_out, centers, contexts, negatives,
                                  0.025, 0.025e-4, 0, 2 * n)
        assert done == n
        results.append((w_in, w_out))
    assert np.allclose(results[0][0], results[1][0], rtol=1e-12, atol=1e-14)
    assert np.allclose(results[0][1], results[1][1], rtol=1e-12, atol=1e-14)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop(ENV_VAR, None)
    else:
        env[ENV_VAR] = env_value
    proc = subprocess.run(
        [sys.executable, "-c", "import emocause.kernels as k; print(k.ACTIVE_BACKEND)"],
        capture_output=True, text=True, env=env)
    return proc


def test_env_flag_forces_numpy_backend():
    proc = _backend_in_subprocess("numpy")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "numpy"


@needs_numba
def test_env_flag_forces_numba_backend():
    proc = _backend_in_subprocess("numba")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "numba"


def test_env_flag_rejects_unknown_value():
    proc = _backend_in_subprocess("cuda")
    assert proc.returncode != 0
    assert "EMOCAUSE_BACKEND" in proc.stderr


def test_active_backend_exports_kernels():
    assert kernels.ACTIVE_BACKEND in ("numba", "numpy")
    for name in ("basic_forward", "basic_backward", "convms_forward",
                 "convms_backward", "skipgram_pairs"):
        assert callable(getattr(kernels, name))
