"""Per-mode inner loops.

Every kernel has a numba implementation and a plain numpy implementation with
identical signatures. The numba path is used when numba imports and the
environment variable ``FRACBOUSSINESQ_NUMBA`` is not set to ``0``. Both paths
are always importable so tests and ``benchmarks/bench_kernels.py`` can compare
them directly.

Layout convention: a batch of fields is an array ``(B, C, P)`` where ``B``
counts time nodes, ``C`` components and ``P`` flattened Fourier modes.
"""

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # avoid probing an outdated system TBB
        numba.config.THREADING_LAYER = "workqueue"

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _flag_enabled(value):
    return value.strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _flag_enabled(os.environ.get("FRACBOUSSINESQ_NUMBA", "1"))

# scipy.fft worker count; see set_threads
FFT_WORKERS = 1


def set_threads(k):
    """Set the thread count for FFTs and numba parallel loops."""
    global FFT_WORKERS
    k = int(k)
    if k < 1:
        raise ValueError("thread count must be >= 1")
    FFT_WORKERS = k
    if HAVE_NUMBA:
        numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------

def etd2_sweep_numpy(forcing, phi0, a, b):
    """Run w[m+1] = phi0 w[m] + a f[m] + b f[m+1] from w[0] = 0.

    forcing: (M+1, C, P) complex; phi0, a, b: (P,) real.
    """
    out = np.empty_like(forcing)
    out[0] = 0.0
    for m in range(forcing.shape[0] - 1):
        out[m + 1] = phi0 * out[m] + a * forcing[m] + b * forcing[m + 1]
    return out


def weighted_sq_sum_numpy(c, w):
    """Return sum_{c,p} w[p] |c[b, c, p]|^2 for every b."""
    out = np.empty(c.shape[0])
    for i in range(c.shape[0]):
        ci = c[i]
        out[i] = np.sum((ci.real * ci.real + ci.imag * ci.imag) @ w)
    return out


def leray_numpy(c, xi, inv_k2):
    """Apply u - xi (xi.u)/|xi|^2 per mode; c is (B, n, P), xi is (n, P)."""
    d = np.einsum("jp,bjp->bp", xi, c)
    return c - xi[None, :, :] * (d * inv_k2)[:, None, :]


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def etd2_sweep_numba(forcing, phi0, a, b):
        M1, C, P = forcing.shape
        out = np.empty_like(forcing)
        for c in range(C):
            for p in range(P):
                out[0, c, p] = 0.0
        for m in range(M1 - 1):
            for c in range(C):
                for p in prange(P):
                    out[m + 1, c, p] = (phi0[p] * out[m, c, p] + a[p] * forcing[m, c, p]
                                        + b[p] * forcing[m + 1, c, p])
        return out

    @njit(parallel=True, cache=True)
    def weighted_sq_sum_numba(c, w):
        B, C, P = c.shape
        out = np.empty(B)
        for i in prange(B):
            acc = 0.0
            for j in range(C):
                for p in range(P):
                    z = c[i, j, p]
                    acc += w[p] * (z.real * z.real + z.imag * z.imag)
            out[i] = acc
        return out

    @njit(parallel=True, cache=True)
    def leray_numba(c, xi, inv_k2):
        B, n, P = c.shape
        out = np.empty_like(c)
        for i in range(B):
            for p in prange(P):
                d = 0.0j
                for j in range(n):
                    d += xi[j, p] * c[i, j, p]
                d *= inv_k2[p]
                for j in range(n):
                    out[i, j, p] = c[i, j, p] - xi[j, p] * d
        return out

else:  # pragma: no cover
    etd2_sweep_numba = weighted_sq_sum_numba = leray_numba = None


if USE_NUMBA:
    etd2_sweep = etd2_sweep_numba
    weighted_sq_sum = weighted_sq_sum_numba
    leray = leray_numba
else:
    etd2_sweep = etd2_sweep_numpy
    weighted_sq_sum = weighted_sq_sum_numpy
    leray = leray_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
