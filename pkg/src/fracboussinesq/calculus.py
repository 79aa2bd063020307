"""Empirical audits of the harmonic-analysis inequalities behind the solver.

Each audit draws a seeded corpus of band-limited random fields, evaluates
both sides of one inequality per sample and reports the ratio lhs/rhs. The
constants in these inequalities are existential, so the report is a
measurement: the maximum ratio, its median, and its stability when the same
functions are sampled on a finer grid.

Bands are fixed in |xi| units relative to the coarsest grid of the corpus and
stay below half its dealiasing cutoff, so every quadratic product is resolved
exactly on every grid and the refined grid sees the very same functions.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import PreconditionError
from .spectral import (
    HdotNorm,
    ScalarField,
    SpectrumSpec,
    committed_seeds,
    div_flux,
    hdot_norm,
    lambda_power,
    lp_norm,
    make_grid,
    advect,
    product,
    random_field,
    random_solenoidal,
)

__all__ = [
    "INEQUALITIES",
    "CorpusSpec",
    "SampleRow",
    "RatioReport",
    "commutator",
    "audit_kpv",
    "audit_product",
    "audit_advection",
    "audit_embedding",
    "audit_interpolation",
    "check_interpolation",
    "embedding_exponent",
    "critical_index",
    "check_exponents",
]

INEQUALITIES = ("KPV", "Product", "UF1", "UF2", "UF3", "Embedding", "Interpolation")

RHS_FLOOR = 1e-30
_EXACT = 1e-12


@dataclass(frozen=True)
class CorpusSpec:
    """Which functions an audit samples.

    ``bands`` maps a name to (q_min, q_max) in units of the lattice spacing
    2 pi / L. ``None`` picks the default low/mid/wide bands derived from the
    coarsest resolution. ``f_scale``/``g_scale`` multiply the two sampled
    fields (the ratios must not notice).
    """

    n: int = 3
    resolutions: tuple = (16, 32)
    L: float = 2.0 * math.pi
    seeds: tuple = field(default_factory=committed_seeds)
    bands: tuple = None
    f_scale: float = 1.0
    g_scale: float = 1.0

    def __post_init__(self):
        res = tuple(int(N) for N in self.resolutions)
        if not res or any(b <= a for a, b in zip(res, res[1:])):
            raise PreconditionError(f"resolutions must be strictly increasing, got {res}")
        object.__setattr__(self, "resolutions", res)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.bands is None:
            K = make_grid(self.n, res[0], self.L).cutoff
            top = 0.5 * K
            object.__setattr__(self, "bands", (
                ("low", (1.0, 1.5)),
                ("mid", (1.5, top)),
                ("wide", (1.0, top)),
            ))
        else:
            object.__setattr__(self, "bands", tuple((str(k), tuple(map(float, v))) for k, v in self.bands))

    @property
    def dk(self):
        return 2.0 * math.pi / self.L

    def spectrum(self, band):
        lo, hi = dict(self.bands)[band]
        return SpectrumSpec(lo * self.dk, hi * self.dk, HdotNorm(0.0), 1.0)

    def samples(self):
        """(band index, band name, seed) for every sample of one resolution."""
        for bi, (name, _) in enumerate(self.bands):
            for seed in self.seeds:
                yield bi, name, seed

    def scalar(self, grid, bi, name, seed, stream):
        return random_field(grid, self.spectrum(name), (seed, bi, stream))

    def solenoidal(self, grid, bi, name, seed, stream):
        return random_solenoidal(grid, self.spectrum(name), (seed, bi, stream))


@dataclass(frozen=True)
class SampleRow:
    inequality_id: str
    seed: int
    N: int
    band: str
    exponents: str
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class RatioReport:
    inequality_id: str
    exponents: dict
    sample_count: int
    max_ratio: float
    median_ratio: float
    per_resolution: tuple
    rows: tuple = ()
    skipped: int = 0

    def __post_init__(self):
        if self.inequality_id not in INEQUALITIES:
            raise ValueError(f"unknown inequality {self.inequality_id!r}")
        res = [N for N, _ in self.per_resolution]
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ValueError("resolutions must be strictly increasing")

    def refinement_spread(self):
        """Largest relative change of max_ratio between consecutive resolutions."""
        m = [r for _, r in self.per_resolution]
        spread = 0.0
        for a, b in zip(m, m[1:]):
            if a > 0:
                spread = max(spread, abs(b / a - 1.0))
            elif b > 0:
                spread = math.inf
        return spread

    def summary(self):
        return {
            "inequality_id": self.inequality_id,
            "exponents": dict(self.exponents),
            "sample_count": self.sample_count,
            "skipped": self.skipped,
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
            "per_resolution": [{"N": N, "max_ratio": r} for N, r in self.per_resolution],
            "refinement_spread": self.refinement_spread(),
        }


def _exponent_string(exponents):
    return ";".join(f"{k}={v!r}" for k, v in exponents.items())


def _run(ineq, corpus, exponents, sample):
    label = _exponent_string(exponents)
    rows, per_res, skipped = [], [], 0
    for N in corpus.resolutions:
        grid = make_grid(corpus.n, N, corpus.L)
        best = 0.0
        for bi, band, seed in corpus.samples():
            lhs, rhs = sample(grid, bi, band, seed)
            if not rhs >= RHS_FLOOR:
                skipped += 1
                continue
            ratio = lhs / rhs
            best = max(best, ratio)
            rows.append(SampleRow(ineq, seed, N, band, label, lhs, rhs, ratio))
        per_res.append((N, best))
    ratios = np.array([r.ratio for r in rows])
    return RatioReport(
        inequality_id=ineq,
        exponents=dict(exponents),
        sample_count=len(rows),
        max_ratio=float(ratios.max()) if rows else 0.0,
        median_ratio=float(np.median(ratios)) if rows else 0.0,
        per_resolution=tuple(per_res),
        rows=tuple(rows),
        skipped=skipped,
    )


# --------------------------------------------------------------------------
# commutator estimate
# --------------------------------------------------------------------------

def commutator(f, g, s):
    """R_s(f, g) = Lambda^s(fg) - (Lambda^s f) g - f (Lambda^s g), products dealiased."""
    if not 0.0 < s < 1.0:
        raise PreconditionError(f"commutator estimate needs 0 < s < 1, got {s}")
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if not (f.real and g.real):
        raise PreconditionError("commutator requires real fields")
    return (lambda_power(product(f, g), s)
            - product(lambda_power(f, s), g)
            - product(f, lambda_power(g, s)))


def _check_kpv(s, s1, s2, p, q, r):
    for name, v in (("s", s), ("s1", s1), ("s2", s2)):
        if not 0.0 < v < 1.0:
            raise PreconditionError(f"{name} must lie in (0, 1), got {v}")
    if abs(s1 + s2 - 1.0) > _EXACT:
        raise PreconditionError(f"need s1 + s2 = 1, got {s1 + s2}")
    for name, v in (("p", p), ("q", q), ("r", r)):
        if not 1.0 < v < math.inf:
            raise PreconditionError(f"{name} must lie in (1, inf), got {v}")
    if abs(1.0 / p - 1.0 / q - 1.0 / r) > _EXACT:
        raise PreconditionError("need 1/p = 1/q + 1/r")


def audit_kpv(corpus, s, s1, s2, p, q, r):
    """||R_s(f,g)||_p against ||Lambda^{s1} f||_q ||Lambda^{s2} g||_r."""
    _check_kpv(s, s1, s2, p, q, r)

    def sample(grid, bi, band, seed):
        f = corpus.scalar(grid, bi, band, seed, 0) * corpus.f_scale
        g = corpus.scalar(grid, bi, band, seed, 1) * corpus.g_scale
        lhs = lp_norm(commutator(f, g, s), p)
        rhs = lp_norm(lambda_power(f, s1), q) * lp_norm(lambda_power(g, s2), r)
        return lhs, rhs

    exps = {"s": s, "s1": s1, "s2": s2, "p": p, "q": q, "r": r}
    return _run("KPV", corpus, exps, sample)


# --------------------------------------------------------------------------
# product law
# --------------------------------------------------------------------------

def _check_product(n, s, s1, s2):
    half = 0.5 * n
    if not abs(s) < half:
        raise PreconditionError(f"need |s| < n/2 = {half}, got s = {s}")
    lo = max(s, 0.0)
    for name, v in (("s1", s1), ("s2", s2)):
        if not lo < v < half:
            raise PreconditionError(f"need max(s, 0) < {name} < n/2, got {name} = {v}")
    if abs(s1 + s2 - s - half) > _EXACT:
        raise PreconditionError(f"need s1 + s2 = s + n/2 = {s + half}, got {s1 + s2}")


def audit_product(corpus, s, s1, s2):
    """||fg||_{Hdot^s} against ||f||_{Hdot^{s1}} ||g||_{Hdot^{s2}}."""
    _check_product(corpus.n, s, s1, s2)

    def sample(grid, bi, band, seed):
        f = corpus.scalar(grid, bi, band, seed, 0) * corpus.f_scale
        g = corpus.scalar(grid, bi, band, seed, 1) * corpus.g_scale
        return hdot_norm(product(f, g), s), hdot_norm(f, s1) * hdot_norm(g, s2)

    return _run("Product", corpus, {"s": s, "s1": s1, "s2": s2, "n": corpus.n}, sample)


# --------------------------------------------------------------------------
# transport estimates
# --------------------------------------------------------------------------

def critical_index(n, alpha):
    """s0 = 1 + n/2 - 2 alpha."""
    return 1.0 + 0.5 * n - 2.0 * alpha


def _advection_exponents(variant, n, alpha, eps):
    """(lhs index, u index, f index) for UF1/UF2/UF3, after checking ranges."""
    if variant in ("UF1", "UF2"):
        if not 0.5 < alpha < 0.5 + 0.25 * n:
            raise PreconditionError(f"{variant} needs 1/2 < alpha < 1/2 + n/4, got alpha = {alpha}")
    elif variant == "UF3":
        if not 0.5 < alpha < 1.0 / 3.0 + n / 6.0:
            raise PreconditionError(f"UF3 needs 1/2 < alpha < 1/3 + n/6, got alpha = {alpha}")
    else:
        raise PreconditionError(f"unknown advection variant {variant!r}")
    if not 0.0 <= eps < min(2.0 * alpha - 1.0, alpha):
        raise PreconditionError(f"need 0 <= eps < min(2 alpha - 1, alpha), got eps = {eps}")
    s0 = critical_index(n, alpha)
    if variant == "UF1":
        return s0 - alpha, s0 + eps, s0 + alpha - eps
    if variant == "UF2":
        return s0 - 2.0 * alpha, s0 + eps, s0 - eps
    return s0 - 3.0 * alpha, s0 + eps, s0 - alpha - eps


def audit_advection(corpus, variant, alpha, eps):
    """||u . grad f|| against ||u|| ||f|| at the transport indices of ``variant``.

    UF1 uses u . grad f directly; UF2 and UF3 evaluate the left side through
    the divergence form div(f u) (u is solenoidal, so the two agree).
    """
    s_lhs, s_u, s_f = _advection_exponents(variant, corpus.n, alpha, eps)
    flux_form = variant != "UF1"

    def sample(grid, bi, band, seed):
        u = corpus.solenoidal(grid, bi, band, seed, 0) * corpus.f_scale
        f = corpus.scalar(grid, bi, band, seed, 1) * corpus.g_scale
        term = div_flux(f, u) if flux_form else advect(u, f)
        return hdot_norm(term, s_lhs), hdot_norm(u, s_u) * hdot_norm(f, s_f)

    exps = {"alpha": alpha, "eps": eps, "s_lhs": s_lhs, "s_u": s_u, "s_f": s_f}
    return _run(variant, corpus, exps, sample)


# --------------------------------------------------------------------------
# embeddings and interpolation
# --------------------------------------------------------------------------

def embedding_exponent(n, s):
    """p = 2n / (n - 2s), the Lebesgue exponent matched to Hdot^s."""
    if not abs(s) < 0.5 * n:
        raise PreconditionError(f"embedding needs |s| < n/2, got s = {s}")
    return 2.0 * n / (n - 2.0 * s)


def audit_embedding(corpus, s):
    """||f||_p / ||f||_{Hdot^s} for s >= 0 and the reverse ratio for s < 0."""
    p = embedding_exponent(corpus.n, s)

    def sample(grid, bi, band, seed):
        f = corpus.scalar(grid, bi, band, seed, 0) * corpus.f_scale
        a, b = lp_norm(f, p), hdot_norm(f, s)
        return (a, b) if s >= 0 else (b, a)

    return _run("Embedding", corpus, {"s": s, "p": p}, sample)


def _interp_weight(s_lo, s_hi, s_mid):
    if not s_lo < s_mid < s_hi:
        raise PreconditionError(f"need s_lo < s_mid < s_hi, got {s_lo}, {s_mid}, {s_hi}")
    return (s_mid - s_lo) / (s_hi - s_lo)


def check_interpolation(f, s_lo, s_hi, s_mid):
    """Both sides of ||f||_{s_mid} <= ||f||_{s_lo}^{1-t} ||f||_{s_hi}^t."""
    t = _interp_weight(s_lo, s_hi, s_mid)
    lhs = hdot_norm(f, s_mid)
    rhs = hdot_norm(f, s_lo) ** (1.0 - t) * hdot_norm(f, s_hi) ** t
    return lhs, rhs


def audit_interpolation(corpus, s_lo, s_hi, s_mid):
    _interp_weight(s_lo, s_hi, s_mid)

    def sample(grid, bi, band, seed):
        f = corpus.scalar(grid, bi, band, seed, 0) * corpus.f_scale
        return check_interpolation(f, s_lo, s_hi, s_mid)

    return _run("Interpolation", corpus, {"s_lo": s_lo, "s_mid": s_mid, "s_hi": s_hi}, sample)


def check_exponents(inequality, n, **exps):
    """Validate the exponents of one audit without sampling anything."""
    if inequality == "KPV":
        _check_kpv(exps["s"], exps["s1"], exps["s2"], exps["p"], exps["q"], exps["r"])
    elif inequality == "Product":
        _check_product(n, exps["s"], exps["s1"], exps["s2"])
    elif inequality in ("UF1", "UF2", "UF3"):
        _advection_exponents(inequality, n, exps["alpha"], exps["eps"])
    elif inequality == "Embedding":
        embedding_exponent(n, exps["s"])
    elif inequality == "Interpolation":
        _interp_weight(exps["s_lo"], exps["s_hi"], exps["s_mid"])
    else:
        raise PreconditionError(f"unknown inequality {inequality!r}")
