"""Periodic spectral discretization.

Fields live on the torus [0, L]^n and are stored as Fourier coefficients with
the convention

    f(x) = sum_k fhat_k exp(i xi_k . x),    xi_k = 2 pi k / L,

so a coefficient is an amplitude, not a density. Every norm carries the
explicit Parseval factor L^n. Coefficient arrays use numpy FFT ordering along
each axis: index j holds k = j for j < N/2 and k = j - N otherwise, so the
lattice is k in [-N/2, N/2). The Nyquist index k = -N/2 is its own mirror;
odd multipliers (first derivatives) are set to zero there so that real fields
stay real. Homogeneous operators (Lambda^s, Hdot norms) annihilate the zero
mode.
"""

from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
import json
import math

import numpy as np
import scipy.fft

from . import _kernels
from .errors import PreconditionError

__all__ = [
    "SpectralGrid",
    "ScalarField",
    "VectorField",
    "HdotNorm",
    "LebesgueNorm",
    "SpectrumSpec",
    "make_grid",
    "lambda_power",
    "hdot_norm",
    "hdot_inner",
    "lp_norm",
    "leray_project",
    "gradient_part",
    "divergence",
    "gradient",
    "dealias",
    "product",
    "advect",
    "advect_vec",
    "div_flux",
    "random_field",
    "random_solenoidal",
    "hermitian_defect",
    "committed_seeds",
]

_MAX_MODES = 1 << 22


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------

class SpectralGrid:
    """Wavenumber lattice for an n-dimensional periodic box.

    Equality and hashing use (n, N, L) only; the derived arrays are cached.
    """

    def __init__(self, n, N, L):
        if int(n) != n or n < 2:
            raise PreconditionError(f"dimension n must be an integer >= 2, got {n}")
        if int(N) != N or N < 4 or N % 2:
            raise PreconditionError(f"N must be an even integer >= 4, got {N}")
        if not (L > 0 and math.isfinite(L)):
            raise PreconditionError(f"box length L must be positive, got {L}")
        if N ** n > _MAX_MODES:
            raise PreconditionError(f"{N}^{n} modes exceeds the supported size")
        self.n = int(n)
        self.N = int(N)
        self.L = float(L)

    def __repr__(self):
        return f"SpectralGrid(n={self.n}, N={self.N}, L={self.L!r})"

    def __eq__(self, other):
        return (isinstance(other, SpectralGrid)
                and (self.n, self.N, self.L) == (other.n, other.N, other.L))

    def __hash__(self):
        return hash((self.n, self.N, self.L))

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def size(self):
        return self.N ** self.n

    @property
    def axes(self):
        return tuple(range(-self.n, 0))

    @property
    def volume(self):
        return self.L ** self.n

    @property
    def dk(self):
        """Lattice spacing 2 pi / L."""
        return 2.0 * math.pi / self.L

    @property
    def cutoff(self):
        """Largest |k_j| kept by the dealiasing mask (3K < N, alias free)."""
        return (self.N - 1) // 3

    @cached_property
    def k1d(self):
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)

    @cached_property
    def k(self):
        """Integer multi-indices, shape (n, N, ..., N)."""
        return np.stack(np.meshgrid(*([self.k1d] * self.n), indexing="ij"))

    @cached_property
    def xi(self):
        return self.dk * self.k.astype(float)

    @cached_property
    def xi_deriv(self):
        """xi with the Nyquist entry of each component zeroed."""
        out = self.xi.copy()
        out[self.k == -(self.N // 2)] = 0.0
        return out

    @cached_property
    def abs_xi(self):
        return np.sqrt(np.sum(self.xi ** 2, axis=0))

    @cached_property
    def inv_k2(self):
        """1/|xi|^2 with 0 at the zero mode."""
        k2 = self.abs_xi ** 2
        out = np.zeros_like(k2)
        nz = k2 > 0
        out[nz] = 1.0 / k2[nz]
        return out

    @cached_property
    def dealias_mask(self):
        return np.all(np.abs(self.k) <= self.cutoff, axis=0)

    @cached_property
    def mirror_index(self):
        """Index tuple taking an array at k to its value at -k."""
        neg = (-np.arange(self.N)) % self.N
        return np.ix_(*([neg] * self.n))

    @cached_property
    def _power_cache(self):
        return {}

    def power(self, s):
        """|xi|^s with the zero mode set to 0 (homogeneous convention)."""
        s = float(s)
        cache = self._power_cache
        if s not in cache:
            a = self.abs_xi.copy()
            a.flat[0] = 1.0
            m = a ** s
            m.flat[0] = 0.0
            m.setflags(write=False)
            if len(cache) > 64:
                cache.clear()
            cache[s] = m
        return cache[s]

    def norm_weights(self, s):
        """Flattened weights L^n |xi|^{2s} for squared Hdot norms."""
        return (self.volume * self.power(2.0 * s)).ravel()

    def to_physical(self, coeffs, real=True):
        """Values on the collocation grid x_j = j L / N (last n axes)."""
        v = scipy.fft.ifftn(coeffs, axes=self.axes, norm="forward",
                            workers=_kernels.FFT_WORKERS)
        return v.real.copy() if real else v

    def to_spectral(self, values):
        return scipy.fft.fftn(values, axes=self.axes, norm="forward",
                              workers=_kernels.FFT_WORKERS)

    def coordinates(self):
        x = np.arange(self.N) * (self.L / self.N)
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"))


def make_grid(n, N, L=2.0 * math.pi):
    """Build the periodic lattice with N modes per dimension on [0, L]^n."""
    return SpectralGrid(n, N, L)


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarField:
    """Fourier coefficients of a scalar function; ``real`` flags a real function."""

    grid: SpectralGrid
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid, values):
        values = np.asarray(values)
        real = not np.iscomplexobj(values)
        return cls(grid, grid.to_spectral(values), real=real)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def physical(self):
        return self.grid.to_physical(self.coeffs, real=self.real)

    def _new(self, coeffs, real=None):
        return ScalarField(self.grid, coeffs, self.real if real is None else real)

    def __add__(self, other):
        _same_grid(self, other)
        return self._new(self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        _same_grid(self, other)
        return self._new(self.coeffs - other.coeffs, self.real and other.real)

    def __mul__(self, c):
        return self._new(self.coeffs * c, self.real and np.isrealobj(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.coeffs)


@dataclass(frozen=True, eq=False)
class VectorField:
    """n component fields sharing one grid, coefficients shaped (n, N, ..., N)."""

    grid: SpectralGrid
    coeffs: np.ndarray
    real: bool = True
    solenoidal: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n,) + self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match an "
                             f"{self.grid.n}-vector on {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid, values, solenoidal=False):
        values = np.asarray(values)
        return cls(grid, grid.to_spectral(values), real=not np.iscomplexobj(values),
                   solenoidal=solenoidal)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n,) + grid.shape, dtype=complex), solenoidal=True)

    @classmethod
    def from_components(cls, components, solenoidal=False):
        grid = components[0].grid
        for c in components:
            _same_grid(components[0], c)
        return cls(grid, np.stack([c.coeffs for c in components]),
                   real=all(c.real for c in components), solenoidal=solenoidal)

    def component(self, j):
        return ScalarField(self.grid, self.coeffs[j], self.real)

    def physical(self):
        return self.grid.to_physical(self.coeffs, real=self.real)

    def _new(self, coeffs, real=None, solenoidal=False):
        return VectorField(self.grid, coeffs, self.real if real is None else real, solenoidal)

    def __add__(self, other):
        _same_grid(self, other)
        return self._new(self.coeffs + other.coeffs, self.real and other.real,
                         self.solenoidal and other.solenoidal)

    def __sub__(self, other):
        _same_grid(self, other)
        return self._new(self.coeffs - other.coeffs, self.real and other.real,
                         self.solenoidal and other.solenoidal)

    def __mul__(self, c):
        return self._new(self.coeffs * c, self.real and np.isrealobj(c), self.solenoidal)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.coeffs, solenoidal=self.solenoidal)


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def _rewrap(f, coeffs, **kw):
    if isinstance(f, VectorField):
        return VectorField(f.grid, coeffs, kw.get("real", f.real), kw.get("solenoidal", f.solenoidal))
    return ScalarField(f.grid, coeffs, kw.get("real", f.real))


def hermitian_defect(f):
    """max |fhat_{-k} - conj(fhat_k)|, zero for real-valued fields."""
    c = f.coeffs
    lead = (slice(None),) * (c.ndim - f.grid.n)
    mirrored = c[lead + f.grid.mirror_index]
    return float(np.max(np.abs(mirrored - np.conj(c)))) if c.size else 0.0


# --------------------------------------------------------------------------
# multipliers and norms
# --------------------------------------------------------------------------

def lambda_power(f, s):
    """Apply Lambda^s = F^{-1} |xi|^s F; the zero mode is always annihilated."""
    return _rewrap(f, f.coeffs * f.grid.power(s))


def _sq_norm(coeffs, grid, s):
    c = coeffs.reshape(1, -1, grid.size)
    return float(_kernels.weighted_sq_sum(c, grid.norm_weights(s))[0])


def hdot_norm(f, s):
    """Homogeneous Sobolev norm sqrt(L^n sum_{k != 0} |xi_k|^{2s} |fhat_k|^2).

    Vector fields sum over components.
    """
    return math.sqrt(_sq_norm(f.coeffs, f.grid, s))


def hdot_inner(f, g, s):
    """Hdot^s inner product L^n sum_{k != 0} |xi|^{2s} fhat conj(ghat) (complex)."""
    _same_grid(f, g)
    w = f.grid.power(2.0 * s)
    return complex(f.grid.volume * np.sum(w * f.coeffs * np.conj(g.coeffs)))


def lp_norm(f, p):
    """Collocation L^p norm (sum_j |f(x_j)|^p (L/N)^n)^(1/p).

    Exact for p = 2 on band-limited data; for other p it is a quadrature.
    """
    if not f.real:
        raise PreconditionError("lp_norm requires a real-valued field")
    if not (1.0 <= p < math.inf):
        raise PreconditionError(f"L^p exponent must satisfy 1 <= p < inf, got {p}")
    v = np.abs(f.physical())
    cell = (f.grid.L / f.grid.N) ** f.grid.n
    if p == 2.0:
        return math.sqrt(float(np.sum(v * v)) * cell)
    vmax = float(v.max()) if v.size else 0.0
    if vmax == 0.0:
        return 0.0
    # scale out the maximum so large p does not overflow
    return vmax * (float(np.sum((v / vmax) ** p)) * cell) ** (1.0 / p)


# --------------------------------------------------------------------------
# Helmholtz decomposition
# --------------------------------------------------------------------------

def _leray_coeffs(c, grid):
    """Leray projection of coefficient batches shaped (..., n, N, ..., N)."""
    lead = c.shape[:-grid.n - 1]
    flat = np.ascontiguousarray(c).reshape((-1, grid.n, grid.size))
    out = _kernels.leray(flat, grid.xi.reshape(grid.n, grid.size), grid.inv_k2.ravel())
    return out.reshape(lead + (grid.n,) + grid.shape)


def leray_project(u):
    """Solenoidal part Pu = u - xi (xi . u)/|xi|^2; the zero mode passes through."""
    return VectorField(u.grid, _leray_coeffs(u.coeffs, u.grid), u.real, solenoidal=True)


def gradient_part(u):
    """Gradient part Qu = u - Pu."""
    return VectorField(u.grid, u.coeffs - _leray_coeffs(u.coeffs, u.grid), u.real)


def divergence(u):
    grid = u.grid
    return ScalarField(grid, np.sum(1j * grid.xi_deriv * u.coeffs, axis=0), u.real)


def gradient(f):
    grid = f.grid
    return VectorField(grid, 1j * grid.xi_deriv * f.coeffs[None], f.real)


# --------------------------------------------------------------------------
# dealiased products
# --------------------------------------------------------------------------

def dealias(coeffs, grid):
    """Zero every mode with some |k_j| > grid.cutoff (2/3 rule)."""
    return coeffs * grid.dealias_mask


def product(f, g):
    """Pointwise product fg evaluated in physical space, then dealiased."""
    _same_grid(f, g)
    grid = f.grid
    real = f.real and g.real
    v = grid.to_physical(f.coeffs, real) * grid.to_physical(g.coeffs, real)
    return ScalarField(grid, dealias(grid.to_spectral(v), grid), real)


# batch of nodes processed per FFT call in the trajectory kernels
_CHUNK = 8


def advect_coeffs(u, f, grid):
    """Dealiased u . grad f for coefficient batches.

    u: (B, n, *shape) real velocity; f: (B, C, *shape) real. Returns (B, C, *shape).
    """
    B, C = f.shape[0], f.shape[1]
    out = np.empty(f.shape, dtype=complex)
    ikd = 1j * grid.xi_deriv
    mask = grid.dealias_mask
    for lo in range(0, B, _CHUNK):
        hi = min(B, lo + _CHUNK)
        up = grid.to_physical(u[lo:hi])  # (b, n, ...)
        # grad f: (b, C, n, ...)
        gf = grid.to_physical(ikd[None, None] * f[lo:hi, :, None])
        prod = np.einsum("bj...,bcj...->bc...", up, gf)
        out[lo:hi] = grid.to_spectral(prod) * mask
    return out


def flux_divergence_coeffs(u, f, grid):
    """Dealiased div(f u) for batches u: (B, n, ...), f: (B, C, ...)."""
    B, C = f.shape[0], f.shape[1]
    out = np.empty(f.shape, dtype=complex)
    ikd = 1j * grid.xi_deriv
    mask = grid.dealias_mask
    for lo in range(0, B, _CHUNK):
        hi = min(B, lo + _CHUNK)
        up = grid.to_physical(u[lo:hi])
        fp = grid.to_physical(f[lo:hi])
        flux = grid.to_spectral(fp[:, :, None] * up[:, None]) * mask  # (b, C, n, ...)
        out[lo:hi] = np.sum(ikd[None, None] * flux, axis=2)
    return out


def _check_real_pair(u, f):
    _same_grid(u, f)
    if not (u.real and f.real):
        raise PreconditionError("advection requires real-valued inputs")


def advect(u, f):
    """Dealiased transport term u . grad f of a scalar."""
    _check_real_pair(u, f)
    c = advect_coeffs(u.coeffs[None], f.coeffs[None, None], u.grid)
    return ScalarField(u.grid, c[0, 0], True)


def advect_vec(u, v):
    """Componentwise u . grad v_i."""
    _check_real_pair(u, v)
    c = advect_coeffs(u.coeffs[None], v.coeffs[None], u.grid)
    return VectorField(u.grid, c[0], True)


def div_flux(f, u):
    """Dealiased div(f u); equals u . grad f when div u = 0."""
    _check_real_pair(u, f)
    c = flux_divergence_coeffs(u.coeffs[None], f.coeffs[None, None], u.grid)
    return ScalarField(u.grid, c[0, 0], True)


# --------------------------------------------------------------------------
# random fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HdotNorm:
    s: float

    def __call__(self, f):
        return hdot_norm(f, self.s)


@dataclass(frozen=True)
class LebesgueNorm:
    p: float

    def __post_init__(self):
        if not (1.0 <= self.p < math.inf):
            raise PreconditionError(f"L^p exponent must satisfy 1 <= p < inf, got {self.p}")

    def __call__(self, f):
        return lp_norm(f, self.p)


@dataclass(frozen=True)
class SpectrumSpec:
    """Radial amplitude profile on a band of |xi| plus a target norm.

    ``q_min``/``q_max`` are in wavenumber units (|xi|, not |k|). ``profile`` is
    ``"flat"``, ``"gaussian"`` (bump centred in the band) or a callable of |xi|.
    """

    q_min: float
    q_max: float
    norm: object = field(default_factory=lambda: HdotNorm(0.0))
    value: float = 1.0
    profile: object = "flat"

    def amplitude(self, q):
        if callable(self.profile):
            return np.asarray(self.profile(q), dtype=float)
        if self.profile == "flat":
            return np.ones_like(q)
        if self.profile == "gaussian":
            centre = 0.5 * (self.q_min + self.q_max)
            width = max(0.25 * (self.q_max - self.q_min), 1e-12)
            return np.exp(-0.5 * ((q - centre) / width) ** 2)
        raise ValueError(f"unknown profile {self.profile!r}")


def _band_noise(grid, spec, rng, components):
    if not (0 <= spec.q_min <= spec.q_max):
        raise PreconditionError(f"invalid band [{spec.q_min}, {spec.q_max}]")
    kb = int(math.floor(spec.q_max / grid.dk + 1e-9))
    if kb > grid.cutoff:
        raise PreconditionError(
            f"band edge |xi| = {spec.q_max} needs |k| = {kb} above the dealiasing cutoff {grid.cutoff}")
    if kb < 1:
        raise PreconditionError("empty band: no nonzero lattice point below q_max")
    # draw on the canonical cube [-kb, kb]^n so a seed gives the same function on any grid
    side = 2 * kb + 1
    cube = (components,) + (side,) * grid.n
    a = rng.standard_normal(cube) + 1j * rng.standard_normal(cube)
    flip = (slice(None),) + (slice(None, None, -1),) * grid.n
    a = 0.5 * (a + np.conj(a[flip]))
    ks = np.arange(-kb, kb + 1)
    q = grid.dk * np.sqrt(sum(kk.astype(float) ** 2 for kk in np.meshgrid(*([ks] * grid.n), indexing="ij")))
    tol = 1e-9 * max(1.0, spec.q_max)
    inband = (q >= spec.q_min - tol) & (q <= spec.q_max + tol) & (q > 0)
    if not inband.any():
        raise PreconditionError(f"empty band [{spec.q_min}, {spec.q_max}] on this lattice")
    a = a * (spec.amplitude(q) * inband)
    out = np.zeros((components,) + grid.shape, dtype=complex)
    idx = np.ix_(*([ks % grid.N] * grid.n))
    for c in range(components):
        out[c][idx] = a[c]
    return out


def _rescale(f, spec):
    current = spec.norm(f)
    if not current > 0:
        raise PreconditionError("target norm unreachable: generated field has zero norm")
    return f * (spec.value / current)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_field(grid, spec, seed):
    """Real, mean-free, band-limited Gaussian field rescaled to ``spec.norm == spec.value``."""
    c = _band_noise(grid, spec, _rng(seed), 1)[0]
    return _rescale(ScalarField(grid, c, True), spec)


def random_solenoidal(grid, spec, seed):
    """Real divergence-free band-limited field rescaled to the target norm."""
    c = _band_noise(grid, spec, _rng(seed), grid.n)
    u = leray_project(VectorField(grid, c, True))
    return _rescale(u, spec)


def committed_seeds(count=None):
    """The fixed corpus seed list shipped with the package."""
    text = resources.files(__package__).joinpath("data/seeds.json").read_text()
    seeds = tuple(int(s) for s in json.loads(text)["seeds"])
    return seeds if count is None else seeds[:count]
