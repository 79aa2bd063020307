"""The dissipative semigroup exp(-t (-Delta)^alpha) and its time-dependent calculus.

Time-dependent fields are :class:`Trajectory` objects on a uniform time grid.
A trajectory produced by :func:`duhamel` or :func:`free_solution` carries its
time derivative in ``rate``, obtained from the governing equation
(dw/dt = f - (-Delta)^alpha w) rather than by differencing; every
L^2-in-time norm of the derivative uses that field. Finite differences are
available through :func:`rate_fd` as a cross-check only.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import _kernels
from .errors import PreconditionError
from .spectral import (
    HdotNorm,
    ScalarField,
    SpectralGrid,
    SpectrumSpec,
    VectorField,
    committed_seeds,
    hdot_norm,
    random_field,
)

__all__ = [
    "Trajectory",
    "PhiWeights",
    "phi_functions",
    "time_grid",
    "heat_flow",
    "smoothing_ratio",
    "smoothing_bound",
    "imaginary_power",
    "duhamel",
    "free_solution",
    "free_functional",
    "char_integral",
    "max_regularity_ratio",
    "wt_bound",
    "node_sq_norms",
    "sup_norm",
    "l2_norm",
    "rate_l2_norm",
    "triple_norm",
    "rate_fd",
    "PROFILES",
    "FieldCorpus",
    "smoothing_sup",
    "audit_smoothing",
    "audit_max_regularity",
    "audit_free_functional",
]


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

def time_grid(T, M):
    if M < 2:
        raise PreconditionError(f"need M >= 2 time steps, got {M}")
    if not T > 0:
        raise PreconditionError(f"horizon T must be positive, got {T}")
    return np.linspace(0.0, float(T), int(M) + 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fields at nodes t_m = m T / M.

    coeffs has shape (M+1, C, *grid.shape) with C = 1 for scalars and C = n
    for vectors. ``indices`` optionally records the (sup, L^2, derivative)
    Sobolev indices of the norm the trajectory is meant to be measured in.
    """

    grid: SpectralGrid
    times: np.ndarray
    coeffs: np.ndarray
    rate: np.ndarray = None
    vector: bool = False
    indices: tuple = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 3:
            raise PreconditionError("a trajectory needs at least M = 2 steps")
        steps = np.diff(times)
        if times[0] != 0.0 or np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise PreconditionError("trajectory time grid must be uniform and start at 0")
        C = self.grid.n if self.vector else 1
        expected = (times.size, C) + self.grid.shape
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient shape {self.coeffs.shape}, expected {expected}")
        if self.rate is not None and self.rate.shape != expected:
            raise ValueError("rate shape does not match coefficients")
        object.__setattr__(self, "times", times)

    @property
    def M(self):
        return self.times.size - 1

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def dt(self):
        return self.T / self.M

    def node(self, m):
        c = self.coeffs[m]
        if self.vector:
            return VectorField(self.grid, c)
        return ScalarField(self.grid, c[0])

    def window(self, m):
        """The prefix of nodes 0..m as a trajectory on [0, t_m]."""
        if m < 2:
            raise PreconditionError("window needs at least two steps")
        rate = None if self.rate is None else self.rate[:m + 1]
        return replace(self, times=self.times[:m + 1], coeffs=self.coeffs[:m + 1], rate=rate)

    def with_indices(self, indices):
        return replace(self, indices=None if indices is None else tuple(float(s) for s in indices))

    def _combine(self, other, op):
        if self.grid != other.grid or self.vector != other.vector:
            raise ValueError("trajectories live on different grids")
        if self.times.size != other.times.size or not np.allclose(self.times, other.times):
            raise ValueError("trajectories have different time grids")
        rate = None
        if self.rate is not None and other.rate is not None:
            rate = op(self.rate, other.rate)
        return Trajectory(self.grid, self.times, op(self.coeffs, other.coeffs), rate, self.vector)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        rate = None if self.rate is None else self.rate * c
        return Trajectory(self.grid, self.times, self.coeffs * c, rate, self.vector, self.indices)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @classmethod
    def zeros(cls, grid, times, vector=False):
        C = grid.n if vector else 1
        z = np.zeros((len(times), C) + grid.shape, dtype=complex)
        return cls(grid, times, z, z.copy(), vector)

    @classmethod
    def constant(cls, field, times):
        """Time-independent trajectory (rate identically zero)."""
        vector = isinstance(field, VectorField)
        c = field.coeffs if vector else field.coeffs[None]
        coeffs = np.broadcast_to(c, (len(times),) + c.shape).copy()
        return cls(field.grid, times, coeffs, np.zeros_like(coeffs), vector)


def _flat(a, grid):
    return np.ascontiguousarray(a).reshape(a.shape[0], a.shape[1], grid.size)


def node_sq_norms(traj, s, rate=False):
    """Squared Hdot^s norms of every node (of the rate if ``rate``)."""
    data = traj.rate if rate else traj.coeffs
    if data is None:
        raise PreconditionError("trajectory carries no time derivative; use rate_fd for a cross-check")
    return _kernels.weighted_sq_sum(_flat(data, traj.grid), traj.grid.norm_weights(s))


def sup_norm(traj, s):
    return math.sqrt(float(np.max(node_sq_norms(traj, s))))


def _time_l2(sq, times):
    return math.sqrt(max(float(np.trapezoid(sq, times)), 0.0))


def l2_norm(traj, s):
    """||w||_{L^2(0,T; Hdot^s)} by the trapezoid rule."""
    return _time_l2(node_sq_norms(traj, s), traj.times)


def rate_l2_norm(traj, s):
    return _time_l2(node_sq_norms(traj, s, rate=True), traj.times)


def triple_norm(traj, indices):
    """max_t ||w||_{s1} + ||w||_{L^2 Hdot^{s2}} + ||dw/dt||_{L^2 Hdot^{s3}}."""
    s_sup, s_l2, s_dt = indices
    return sup_norm(traj, s_sup) + l2_norm(traj, s_l2) + rate_l2_norm(traj, s_dt)


def rate_fd(traj):
    """Second-order finite-difference time derivative (cross-check only)."""
    d = np.gradient(traj.coeffs, traj.dt, axis=0, edge_order=2)
    return replace(traj, rate=d)


# --------------------------------------------------------------------------
# semigroup and multipliers
# --------------------------------------------------------------------------

def _check_alpha(alpha):
    if not alpha > 0:
        raise PreconditionError(f"alpha must be positive, got {alpha}")


def _rewrap(f, coeffs, real=None):
    real = f.real if real is None else real
    if isinstance(f, VectorField):
        return VectorField(f.grid, coeffs, real, f.solenoidal)
    return ScalarField(f.grid, coeffs, real)


def heat_flow(f, t, alpha):
    """exp(-t |xi|^{2 alpha}) per mode; the zero mode is left unchanged."""
    if t < 0:
        raise PreconditionError(f"heat flow needs t >= 0, got {t}")
    _check_alpha(alpha)
    return _rewrap(f, f.coeffs * np.exp(-t * f.grid.power(2.0 * alpha)))


def smoothing_bound(gamma, alpha):
    """sup_{y >= 0} y^a e^{-y} = a^a e^{-a} with a = gamma/alpha (1 at a = 0)."""
    a = gamma / alpha
    return 1.0 if a == 0 else a ** a * math.exp(-a)


def smoothing_ratio(f, t, alpha, gamma, s):
    """t^{gamma/alpha} ||(-Delta)^gamma S(t) f||_{Hdot^s} / ||f||_{Hdot^s}."""
    if not t > 0:
        raise PreconditionError(f"smoothing ratio needs t > 0, got {t}")
    if gamma < 0:
        raise PreconditionError("gamma must be nonnegative")
    _check_alpha(alpha)
    g = f.grid
    mult = g.power(2.0 * gamma) * np.exp(-t * g.power(2.0 * alpha))
    num = hdot_norm(_rewrap(f, f.coeffs * mult), s)
    return t ** (gamma / alpha) * num / hdot_norm(f, s)


def imaginary_power(f, y, alpha):
    """A^{iy} with A = (-Delta)^alpha: multiply by |xi|^{2 alpha i y}.

    The multiplier has unit modulus away from the zero mode, which it
    annihilates. It is even but not real, so real inputs give complex outputs.
    """
    g = f.grid
    with np.errstate(divide="ignore"):
        logk = np.log(g.abs_xi)
    phase = np.exp(2j * alpha * y * np.where(g.abs_xi > 0, logk, 0.0))
    phase.flat[0] = 0.0
    return _rewrap(f, f.coeffs * phase, real=f.real and y == 0)


# --------------------------------------------------------------------------
# exponential quadrature
# --------------------------------------------------------------------------

_TAYLOR_Z = 1e-4
_SERIES_Z = 1.0


def _phi_series(z, k, terms):
    # phi_k(z) = sum_j (-z)^j / (j + k)!
    acc = np.zeros_like(z)
    for j in reversed(range(terms)):
        acc = acc * (-z) + 1.0 / math.factorial(j + k)
    return acc


def phi_functions(z):
    """Return (phi0, phi1, phi2) at z >= 0.

    phi0 = e^{-z}, phi1 = (1 - e^{-z})/z, phi2 = (e^{-z} - 1 + z)/z^2.
    Below 1e-4 a 4-term Taylor series replaces the quotients; below 1 a long
    series replaces phi2, whose closed form still loses digits there.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("phi functions need z >= 0")
    phi0 = np.exp(-z)
    tiny = z < _TAYLOR_Z
    small = z < _SERIES_Z
    zs = np.where(tiny, 1.0, z)
    phi1 = -np.expm1(-zs) / zs
    phi2 = (np.expm1(-zs) + zs) / zs ** 2
    phi2 = np.where(small, _phi_series(z, 2, 20), phi2)
    phi1 = np.where(tiny, _phi_series(z, 1, 4), phi1)
    phi2 = np.where(tiny, _phi_series(z, 2, 4), phi2)
    return phi0, phi1, phi2


@dataclass(frozen=True, eq=False)
class PhiWeights:
    """Per-mode exponential integrator weights at z = dt |xi|^{2 alpha}."""

    z: np.ndarray
    phi0: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    dt: float

    @classmethod
    def build(cls, grid, alpha, dt):
        _check_alpha(alpha)
        z = dt * grid.power(2.0 * alpha).ravel()
        return cls(z, *phi_functions(z), float(dt))


def duhamel(forcing, alpha):
    """w(t) = int_0^t S(t - tau) f(tau) dtau with w(0) = 0.

    The forcing is taken piecewise linear between nodes and integrated
    exactly against the kernel:
    w_{m+1} = phi0 w_m + dt [(phi1 - phi2) f_m + phi2 f_{m+1}].
    """
    grid = forcing.grid
    wts = PhiWeights.build(grid, alpha, forcing.dt)
    f = _flat(forcing.coeffs, grid)
    w = _kernels.etd2_sweep(f, wts.phi0, wts.dt * (wts.phi1 - wts.phi2), wts.dt * wts.phi2)
    lam = grid.power(2.0 * alpha).ravel()
    rate = f - lam * w
    shape = forcing.coeffs.shape
    return Trajectory(grid, forcing.times, w.reshape(shape), rate.reshape(shape), forcing.vector)


def _as_batch(a):
    if isinstance(a, VectorField):
        return a.coeffs, True
    return a.coeffs[None], False


MEAN_RTOL = 1e-13


def require_mean_free(a):
    """Reject data whose zero mode exceeds roundoff relative to the largest coefficient."""
    c, _ = _as_batch(a)
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if np.any(np.abs(c[(slice(None),) + (0,) * a.grid.n]) > MEAN_RTOL * scale):
        raise PreconditionError("data must be mean-free (zero mode = 0)")


def free_solution(a, alpha, times):
    """a_L(t) = S(t) a at the given nodes, with rate -(-Delta)^alpha a_L."""
    _check_alpha(alpha)
    require_mean_free(a)
    times = np.asarray(times, dtype=float)
    c, vector = _as_batch(a)
    lam = a.grid.power(2.0 * alpha)
    decay = np.exp(-times.reshape((-1,) + (1,) * (c.ndim)) * lam)
    coeffs = decay * c[None]
    return Trajectory(a.grid, times, coeffs, -lam * coeffs, vector)


def _mode_sq(a, s):
    """Per-mode L^n |xi|^{2s} |a_k|^2 summed over components (zero mode 0)."""
    c, _ = _as_batch(a)
    return a.grid.volume * a.grid.power(2.0 * s) * np.sum(np.abs(c) ** 2, axis=0)


def free_functional(a, alpha, s, times=None):
    """The three terms of the free-flow bound for a_L = S(t) a.

    Returns a dict with ``sup`` (sup_t ||a_L||_{s+alpha}), ``l2``
    (||a_L||_{L^2(0,inf; Hdot^{s+2alpha})}), ``dt_l2`` (the time derivative in
    L^2(0,inf; Hdot^s)) and ``total``. With ``times`` None every integral is the
    per-mode closed form; otherwise nodes on [0, T] are scanned/trapezoided and
    only the tail beyond T uses the closed form.
    """
    _check_alpha(alpha)
    require_mean_free(a)
    lam = a.grid.power(2.0 * alpha)
    pos = lam > 0
    w_l2 = _mode_sq(a, s + 2.0 * alpha)
    w_dt = _mode_sq(a, s) * lam ** 2
    if times is None:
        sup = hdot_norm(a, s + alpha)
        inv2lam = np.where(pos, 0.5 / np.where(pos, lam, 1.0), 0.0)
        l2 = math.sqrt(float(np.sum(w_l2 * inv2lam)))
        dt_l2 = math.sqrt(float(np.sum(w_dt * inv2lam)))
    else:
        traj = free_solution(a, alpha, times)
        T = float(traj.T)
        sup = sup_norm(traj, s + alpha)
        tail = np.where(pos, np.exp(-2.0 * T * lam) * 0.5 / np.where(pos, lam, 1.0), 0.0)
        l2 = math.sqrt(l2_norm(traj, s + 2.0 * alpha) ** 2 + float(np.sum(w_l2 * tail)))
        dt_l2 = math.sqrt(rate_l2_norm(traj, s) ** 2 + float(np.sum(w_dt * tail)))
    return {"sup": sup, "l2": l2, "dt_l2": dt_l2, "total": sup + l2 + dt_l2}


def char_integral(a, alpha, s, prefactor=2.0):
    """prefactor * int_0^inf ||(-Delta)^alpha S(t) a||_{Hdot^s}^2 dt, per mode in closed form.

    With the default prefactor 2 this equals ||a||_{Hdot^{s+alpha}}^2; the
    prefactor 1/2 gives exactly a quarter of it.
    """
    _check_alpha(alpha)
    require_mean_free(a)
    lam = a.grid.power(2.0 * alpha)
    pos = lam > 0
    # ||A S(t) a||_s^2 = sum L^n |xi|^{2s} lam^2 e^{-2 t lam} |a|^2; int e^{-2 t lam} = 1/(2 lam)
    per_mode = _mode_sq(a, s) * lam ** 2 * np.where(pos, 0.5 / np.where(pos, lam, 1.0), 0.0)
    return prefactor * float(np.sum(per_mode))


def max_regularity_ratio(forcing, alpha, s):
    """(||dw/dt||_{L^2 Hdot^s} + ||w||_{L^2 Hdot^{s+2alpha}}) / ||f||_{L^2 Hdot^s} for w = duhamel(f)."""
    fnorm = _time_l2(node_sq_norms(forcing, s), forcing.times)
    if fnorm == 0.0:
        raise PreconditionError("forcing is zero")
    w = duhamel(forcing, alpha)
    return (rate_l2_norm(w, s) + l2_norm(w, s + 2.0 * alpha)) / fnorm


def wt_bound(w, s, alpha):
    """Both sides of sup_t ||w||_{s+a}^2 <= ||w(0)||_{s+a}^2 + 2 ||w||_{L^2 Hdot^{s+2a}} ||dw/dt||_{L^2 Hdot^s}."""
    sq = node_sq_norms(w, s + alpha)
    lhs = float(np.max(sq))
    rhs = float(sq[0]) + 2.0 * l2_norm(w, s + 2.0 * alpha) * rate_l2_norm(w, s)
    return lhs, rhs


# --------------------------------------------------------------------------
# corpus audits
# --------------------------------------------------------------------------

PROFILES = ("const", "ramp", "sin1", "sin4", "decay")


def profile_values(name, tau):
    """Time profile of a corpus forcing in rescaled time tau = t / T."""
    if name == "const":
        return np.ones_like(tau)
    if name == "ramp":
        return tau.copy()
    if name == "sin1":
        return np.sin(2.0 * math.pi * tau)
    if name == "sin4":
        return np.sin(8.0 * math.pi * tau)
    if name == "decay":
        return np.exp(-3.0 * tau)
    raise PreconditionError(f"unknown time profile {name!r}")


@dataclass(frozen=True)
class FieldCorpus:
    """Seeded mean-free scalar fields for the semigroup audits.

    ``bands`` are (q_min, q_max) in units of 2 pi / L; a q_max of None means
    the dealiasing cutoff of the grid. Forcings multiply each field by every
    profile in ``profiles`` (functions of t / T).
    """

    seeds: tuple = field(default_factory=lambda: committed_seeds(10))
    bands: tuple = ((1.0, 1.5), (1.0, None), (2.0, None))
    profiles: tuple = PROFILES

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "bands", tuple((float(lo), None if hi is None else float(hi))
                                                for lo, hi in self.bands))
        object.__setattr__(self, "profiles", tuple(self.profiles))
        for p in self.profiles:
            profile_values(p, np.zeros(1))

    def fields(self, grid):
        """Yield (seed, band index, field)."""
        for seed in self.seeds:
            for bi, (lo, hi) in enumerate(self.bands):
                top = grid.cutoff if hi is None else hi
                if top <= lo:
                    raise PreconditionError(f"empty band ({lo}, {top}) on grid N={grid.N}")
                spec = SpectrumSpec(lo * grid.dk, top * grid.dk, HdotNorm(0.0), 1.0)
                yield seed, bi, random_field(grid, spec, (seed, bi, 7))

    def forcings(self, grid, times):
        """Yield (seed, band index, profile, Trajectory)."""
        times = np.asarray(times, dtype=float)
        tau = times / times[-1]
        for seed, bi, f in self.fields(grid):
            for name in self.profiles:
                p = profile_values(name, tau).reshape((-1, 1) + (1,) * grid.n)
                yield seed, bi, name, Trajectory(grid, times, p * f.coeffs[None, None], None, False)


def smoothing_sup(f, alpha, gamma, s, ts):
    """max over ts of smoothing_ratio(f, t, alpha, gamma, s)."""
    return max(smoothing_ratio(f, float(t), alpha, gamma, s) for t in ts)


def audit_smoothing(grid, corpus, alpha, s, gamma_ratios, ts):
    """Rows (seed, band, gamma/alpha, measured sup, bound) over the corpus."""
    rows = []
    fields = list(corpus.fields(grid))
    for r in gamma_ratios:
        gamma = r * alpha
        bound = smoothing_bound(gamma, alpha)
        for seed, bi, f in fields:
            rows.append((seed, bi, float(r), smoothing_sup(f, alpha, gamma, s, ts), bound))
    return rows


def audit_max_regularity(grid, corpus, alpha, s, T_values, M):
    """Rows (T, seed, band, profile, ratio) over the corpus forcings."""
    rows = []
    for T in T_values:
        times = time_grid(T, M)
        for seed, bi, name, f in corpus.forcings(grid, times):
            rows.append((float(T), seed, bi, name, max_regularity_ratio(f, alpha, s)))
    return rows


def audit_free_functional(grid, corpus, alpha, s):
    """Rows (seed, band, functional, ||a||_{s+alpha}, ratio) in closed form."""
    rows = []
    for seed, bi, a in corpus.fields(grid):
        total = free_functional(a, alpha, s)["total"]
        ref = hdot_norm(a, s + alpha)
        rows.append((seed, bi, total, ref, total / ref))
    return rows
