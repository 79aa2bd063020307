import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracboussinesq import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@needs_numba
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), M=st.integers(1, 12), C=st.integers(1, 3), P=st.integers(1, 40))
def test_etd2_sweep_backends_agree(seed, M, C, P):
    rng = np.random.default_rng(seed)
    f = _complex(rng, (M + 1, C, P))
    phi0, a, b = rng.uniform(0, 1, (3, P))
    ref = _kernels.etd2_sweep_numpy(f, phi0, a, b)
    got = _kernels.etd2_sweep_numba(f, phi0, a, b)
    assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


@needs_numba
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), B=st.integers(1, 6), C=st.integers(1, 3), P=st.integers(1, 40))
def test_weighted_sq_sum_backends_agree(seed, B, C, P):
    rng = np.random.default_rng(seed)
    c = _complex(rng, (B, C, P))
    w = rng.uniform(0, 2, P)
    ref = _kernels.weighted_sq_sum_numpy(c, w)
    got = _kernels.weighted_sq_sum_numba(c, w)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=0)


@needs_numba
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), B=st.integers(1, 4), n=st.integers(2, 4), P=st.integers(1, 40))
def test_leray_backends_agree(seed, B, n, P):
    rng = np.random.default_rng(seed)
    c = _complex(rng, (B, n, P))
    xi = rng.standard_normal((n, P))
    inv_k2 = 1.0 / np.sum(xi ** 2, axis=0)
    ref = _kernels.leray_numpy(c, xi, inv_k2)
    got = _kernels.leray_numba(c, xi, inv_k2)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(c))


def test_etd2_sweep_single_mode_recursion():
    f = np.ones((4, 1, 1), dtype=complex)
    out = _kernels.etd2_sweep_numpy(f, np.array([0.5]), np.array([1.0]), np.array([2.0]))
    # w1 = 3, w2 = 1.5 + 3, w3 = 2.25 + 3
    np.testing.assert_allclose(out[:, 0, 0].real, [0.0, 3.0, 4.5, 5.25])


def test_leray_output_is_transverse():
    rng = np.random.default_rng(1)
    c = _complex(rng, (2, 3, 10))
    xi = rng.standard_normal((3, 10))
    out = _kernels.leray(c, xi, 1.0 / np.sum(xi ** 2, axis=0))
    assert np.max(np.abs(np.einsum("jp,bjp->bp", xi, out))) < 1e-12


def test_set_threads_rejects_zero():
    with pytest.raises(ValueError):
        _kernels.set_threads(0)


_SCRIPT = """
import json, math
from fracboussinesq import _kernels
from fracboussinesq.solver import Constants, SolverConfig, picard_solve, small_data, xt_norm, yt_norm
cfg = SolverConfig(3, 1.0, 1.0, 8, 2 * math.pi, 16, 1e-11, 40, "FiniteHorizon")
k = Constants(1.5, 0.008, 0.009)
state, rep = picard_solve(*small_data(cfg, k, 0.5, seed=2), cfg, k)
print(json.dumps({"backend": _kernels.backend(), "u": xt_norm(state.u, cfg), "t": yt_norm(state.theta, cfg)}))
"""


def _run(flag):
    env = dict(os.environ, FRACBOUSSINESQ_NUMBA=flag)
    p = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(p.stdout)


@needs_numba
def test_env_flag_selects_backend_and_results_agree():
    fast, slow = _run("1"), _run("0")
    assert fast["backend"] == "numba"
    assert slow["backend"] == "numpy"
    assert fast["u"] == pytest.approx(slow["u"], rel=1e-12)
    assert fast["t"] == pytest.approx(slow["t"], rel=1e-12)
