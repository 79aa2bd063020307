import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracboussinesq.calculus import (
    CorpusSpec,
    RatioReport,
    audit_advection,
    audit_embedding,
    audit_interpolation,
    audit_kpv,
    audit_product,
    check_interpolation,
    commutator,
    critical_index,
    embedding_exponent,
)
from fracboussinesq.errors import PreconditionError
from fracboussinesq.spectral import (
    ScalarField,
    SpectrumSpec,
    advect,
    committed_seeds,
    div_flux,
    lambda_power,
    lp_norm,
    make_grid,
    random_field,
    random_solenoidal,
)

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def small():
    return CorpusSpec(n=3, resolutions=(16, 32), seeds=committed_seeds(6))


@pytest.fixture(scope="module")
def grid3():
    return make_grid(3, 16, TWO_PI)


def cosine(grid, k):
    x = grid.coordinates()
    phase = sum(kj * x[j] for j, kj in enumerate(k))
    return ScalarField.from_physical(grid, np.cos(phase))


# -- commutator ------------------------------------------------------------------

def test_commutator_two_mode_oracle(grid3):
    k, m, s = np.array([1, 0, 0]), np.array([1, 2, 0]), 0.5
    R = commutator(cosine(grid3, k), cosine(grid3, m), s)
    a = lambda v: float(np.linalg.norm(v)) ** s
    # cos a cos b = (cos(a+b) + cos(a-b))/2 and Lambda^s is |xi|^s on each cosine
    plus = 0.5 * (a(k + m) - a(k) - a(m))
    minus = 0.5 * (a(k - m) - a(k) - a(m))
    c = R.coeffs
    idx = lambda v: tuple(np.asarray(v) % grid3.N)
    assert c[idx(k + m)] == pytest.approx(0.5 * plus, abs=1e-14)
    assert c[idx(-(k + m))] == pytest.approx(0.5 * plus, abs=1e-14)
    assert c[idx(k - m)] == pytest.approx(0.5 * minus, abs=1e-14)
    assert c[idx(m - k)] == pytest.approx(0.5 * minus, abs=1e-14)
    mask = np.ones(grid3.shape, bool)
    for v in (k + m, -(k + m), k - m, m - k):
        mask[idx(v)] = False
    assert np.max(np.abs(c[mask])) < 1e-14


def test_commutator_with_constant_vanishes(grid3):
    f = random_field(grid3, SpectrumSpec(1.0, 4.0), 1)
    g = ScalarField.from_physical(grid3, np.full(grid3.shape, 3.0))
    assert np.max(np.abs(commutator(f, g, 0.4).coeffs)) < 1e-13


def test_commutator_symmetric(grid3):
    f = random_field(grid3, SpectrumSpec(1.0, 2.5), 2)
    g = random_field(grid3, SpectrumSpec(1.0, 2.5), 3)
    np.testing.assert_allclose(commutator(f, g, 0.7).coeffs, commutator(g, f, 0.7).coeffs, atol=1e-12)


def test_commutator_rejects_s_out_of_range(grid3):
    f = random_field(grid3, SpectrumSpec(1.0, 2.5), 2)
    for s in (0.0, 1.0, 1.5):
        with pytest.raises(PreconditionError):
            commutator(f, f, s)


# -- audits -------------------------------------------------------------------------

def test_kpv_report_shape(small):
    rep = audit_kpv(small, 0.5, 0.5, 0.5, 2.0, 4.0, 4.0)
    assert rep.inequality_id == "KPV"
    assert rep.sample_count == 2 * 3 * 6
    assert rep.max_ratio >= rep.median_ratio >= 0
    assert [N for N, _ in rep.per_resolution] == [16, 32]
    assert math.isfinite(rep.max_ratio)
    assert rep.refinement_spread() < 0.3
    assert {r.band for r in rep.rows} == {"low", "mid", "wide"}


@pytest.mark.parametrize("args", [
    (0.5, 0.4, 0.5, 2, 4, 4),   # s1 + s2 != 1
    (0.5, 0.5, 0.5, 2, 4, 3),   # Hoelder triple broken
    (1.2, 0.5, 0.5, 2, 4, 4),   # s out of (0, 1)
    (0.5, 0.5, 0.5, 1, 2, 2),   # p = 1
])
def test_kpv_rejects_invalid_exponents(small, args):
    with pytest.raises(PreconditionError):
        audit_kpv(small, *args)


def test_kpv_single_mode_ratio_matches_oracle(grid3):
    k, m, s = np.array([1, 0, 0]), np.array([1, 2, 0]), 0.5
    f, g = cosine(grid3, k), cosine(grid3, m)
    lhs = lp_norm(commutator(f, g, s), 2.0)
    rhs = lp_norm(lambda_power(f, 0.5), 4.0) * lp_norm(lambda_power(g, 0.5), 4.0)
    a = lambda v: float(np.linalg.norm(v)) ** s
    plus = 0.5 * (a(k + m) - a(k) - a(m))
    minus = 0.5 * (a(k - m) - a(k) - a(m))
    vol = grid3.volume
    # ||c cos||_2^2 = c^2 vol / 2 ; ||cos||_4^4 = 3 vol / 8
    lhs_exact = math.sqrt((plus ** 2 + minus ** 2) * vol / 2)
    cos4 = (3 * vol / 8) ** 0.25
    rhs_exact = a(k) * cos4 * a(m) * cos4
    assert lhs == pytest.approx(lhs_exact, rel=1e-12)
    assert rhs == pytest.approx(rhs_exact, rel=1e-12)


@pytest.mark.parametrize("n,s,s1,s2", [
    (3, -0.5, 0.5, 0.5),
    (3, 0.0, 0.75, 0.75),
    (3, 0.5, 1.0, 1.0),
    (3, 1.25, 1.375, 1.375),
])
def test_product_both_cases(small, n, s, s1, s2):
    rep = audit_product(small, s, s1, s2)
    assert 0 < rep.max_ratio < math.inf
    assert rep.refinement_spread() < 0.3


@pytest.mark.parametrize("s,s1,s2", [
    (0.0, 0.75, 0.7),     # s1 + s2 != s + n/2
    (1.5, 1.5, 1.5),      # |s| = n/2 not allowed and s1 not above s
    (0.5, 0.4, 1.6),      # s1 below s
    (-1.6, 0.0, -0.1),    # |s| too large
])
def test_product_rejects_constraint_violation(small, s, s1, s2):
    with pytest.raises(PreconditionError):
        audit_product(small, s, s1, s2)


def test_product_continuous_through_zero(small):
    ratios = []
    for s in (-0.02, -0.01, 0.0, 0.01, 0.02):
        half = 0.5 * (s + 1.5)
        ratios.append(audit_product(small, s, half, half).max_ratio)
    steps = np.abs(np.diff(ratios)) / ratios[2]
    assert np.all(steps < 0.02)


def test_advection_variants(small):
    for variant, alpha, eps in (("UF1", 1.0, 0.0), ("UF2", 1.0, 0.25), ("UF3", 0.8, 0.2)):
        rep = audit_advection(small, variant, alpha, eps)
        assert 0 < rep.max_ratio < math.inf
        assert rep.refinement_spread() < 0.3


def test_advection_exponents():
    rep = audit_advection(CorpusSpec(resolutions=(16,), seeds=(1,)), "UF1", 1.0, 0.0)
    s0 = critical_index(3, 1.0)
    assert s0 == 0.5
    assert rep.exponents["s_lhs"] == s0 - 1.0
    assert rep.exponents["s_f"] == s0 + 1.0


@pytest.mark.parametrize("variant,alpha,eps", [
    ("UF3", 1.0, 0.0),    # 1 > 1/3 + 3/6
    ("UF1", 0.5, 0.0),    # alpha not above 1/2
    ("UF1", 1.3, 0.0),    # alpha >= 1/2 + n/4
    ("UF2", 1.0, 1.0),    # eps >= min(2 alpha - 1, alpha)
    ("UF1", 1.0, -0.1),
    ("UF9", 1.0, 0.0),
])
def test_advection_rejects_out_of_range(small, variant, alpha, eps):
    with pytest.raises(PreconditionError):
        audit_advection(small, variant, alpha, eps)


def test_advection_constant_scalar_gives_zero(grid3):
    u = random_solenoidal(grid3, SpectrumSpec(1.0, 2.5), 4)
    f = ScalarField.from_physical(grid3, np.full(grid3.shape, 2.0))
    assert np.max(np.abs(advect(u, f).coeffs)) < 1e-13
    assert np.max(np.abs(div_flux(f, u).coeffs)) < 1e-13


def test_embedding_exponents():
    assert embedding_exponent(3, 0.5) == pytest.approx(3.0)
    assert embedding_exponent(3, 0.0) == 2.0
    assert embedding_exponent(4, 1.0) == pytest.approx(4.0)
    with pytest.raises(PreconditionError):
        embedding_exponent(3, 1.5)


def test_embedding_parseval_case(small):
    rep = audit_embedding(small, 0.0)
    ratios = np.array([r.ratio for r in rep.rows])
    np.testing.assert_allclose(ratios, 1.0, rtol=1e-12)


def test_embedding_both_signs(small):
    for s in (0.5, 1.0, -0.5):
        rep = audit_embedding(small, s)
        assert 0 < rep.max_ratio < math.inf
        assert rep.refinement_spread() < 0.3


# -- homogeneity --------------------------------------------------------------------

@pytest.mark.parametrize("run", [
    lambda c: audit_kpv(c, 0.5, 0.5, 0.5, 2.0, 4.0, 4.0),
    lambda c: audit_product(c, 0.5, 1.0, 1.0),
    lambda c: audit_advection(c, "UF2", 1.0, 0.25),
    lambda c: audit_embedding(c, 0.5),
])
def test_ratios_invariant_under_rescaling(run):
    seeds = committed_seeds(3)
    base = run(CorpusSpec(resolutions=(16,), seeds=seeds))
    scaled = run(CorpusSpec(resolutions=(16,), seeds=seeds, f_scale=4.0, g_scale=0.125))
    assert [r.ratio for r in base.rows] == [r.ratio for r in scaled.rows]


# -- interpolation ------------------------------------------------------------------

def _modes(grid, ks, value=1.0):
    c = np.zeros(grid.shape, dtype=complex)
    for k in ks:
        c[tuple(np.asarray(k) % grid.N)] = value
    return ScalarField(grid, c, real=False)


def test_interpolation_single_mode_tight(grid3):
    lhs, rhs = check_interpolation(_modes(grid3, [(1, 2, 0)]), 0.0, 2.0, 0.7)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_interpolation_two_mode_oracle(grid3):
    f = _modes(grid3, [(1, 0, 0), (2, 0, 0)], value=0.5)
    lhs, rhs = check_interpolation(f, 0.0, 2.0, 1.0)
    unit = grid3.volume * 0.25
    assert lhs ** 2 == pytest.approx(5.0 * unit, rel=1e-14)
    assert rhs ** 2 == pytest.approx(math.sqrt(34.0) * unit, rel=1e-14)
    assert lhs < rhs


def test_interpolation_rejects_bad_order(grid3):
    with pytest.raises(PreconditionError):
        check_interpolation(_modes(grid3, [(1, 0, 0)]), 1.0, 0.0, 0.5)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), a=st.floats(-1, 1), gap1=st.floats(0.01, 2), gap2=st.floats(0.01, 2))
def test_interpolation_holds_with_constant_one(grid3, seed, a, gap1, gap2):
    f = random_field(grid3, SpectrumSpec(1.0, 5.0), seed)
    lhs, rhs = check_interpolation(f, a, a + gap1 + gap2, a + gap1)
    assert lhs <= rhs * (1 + 1e-12)


def test_audit_interpolation(small):
    rep = audit_interpolation(small, 0.5, 1.5, 1.25)
    assert rep.max_ratio <= 1 + 1e-12


# -- corpus -------------------------------------------------------------------------

def test_corpus_validation():
    with pytest.raises(PreconditionError):
        CorpusSpec(resolutions=(32, 16))
    c = CorpusSpec()
    assert len(c.seeds) == 100
    assert dict(c.bands)["wide"] == (1.0, 2.5)


def test_corpus_same_function_on_both_grids():
    c = CorpusSpec(resolutions=(16, 32), seeds=(9,))
    f16 = c.scalar(make_grid(3, 16), 1, "mid", 9, 0)
    f32 = c.scalar(make_grid(3, 32), 1, "mid", 9, 0)
    # shared collocation points x = 2 pi j / 16
    np.testing.assert_allclose(f16.physical(), f32.physical()[::2, ::2, ::2], atol=1e-13)


def test_report_rejects_unknown_id():
    with pytest.raises(ValueError):
        RatioReport("Nope", {}, 0, 0.0, 0.0, ())
