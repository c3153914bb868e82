import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from oracles import chi2_1_sf
from qftail.acceptance import exact_gaussian_cgf
from qftail.bounds import (
    SubgaussianParams,
    bernstein_bound,
    centered_norm_bound,
    chi2_tail_bound,
    compare_bounds,
    gaussian_cgf_bound,
    gaussian_quadratic_bound,
    h1,
    h1_inverse,
    mgf_upper_bound,
    subgaussian_quadratic_bound,
    tail_probability_at,
    vector_bernstein_bound,
)
from qftail.errors import DomainError, InputError
from qftail.spectral import SpectralSummary, summarize

SQRT2 = math.sqrt(2.0)


def eye(n):
    return SpectralSummary.from_rho(np.ones(n))


# -- h1 ---------------------------------------------------------------------


@pytest.mark.parametrize("a, expected", [(0.0, 0.0), (4.0, 2.0), (1.5, 0.5)])
def test_h1_values(a, expected):
    assert h1(a) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("b, expected", [(0.0, 0.0), (2.0, 4.0), (0.5, 1.5)])
def test_h1_inverse_values(b, expected):
    assert h1_inverse(b) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("f", [h1, h1_inverse])
def test_h1_domain(f):
    with pytest.raises(DomainError):
        f(-1e-9)


@settings(max_examples=500)
@given(st.floats(0.0, 1e6))
def test_h1_inverse_pair(x):
    assert h1(h1_inverse(x)) == pytest.approx(x, rel=1e-10, abs=1e-300)
    assert h1_inverse(h1(x)) == pytest.approx(x, rel=1e-10, abs=1e-12)


def test_h1_matches_naive_form_and_is_increasing():
    a = np.linspace(0.0, 50.0, 1001)
    vals = np.array([h1(x) for x in a])
    naive = 1 + a - np.sqrt(1 + 2 * a)
    np.testing.assert_allclose(vals, naive, rtol=1e-9, atol=1e-15)
    assert np.all(np.diff(vals) > 0)


# -- quadratic-form bounds ----------------------------------------------------


def test_gaussian_bound_examples():
    assert gaussian_quadratic_bound(eye(1), 1.0).epsilon == pytest.approx(5.0, rel=1e-15)
    assert gaussian_quadratic_bound(eye(10), 2.0).epsilon == pytest.approx(10 + 2 * math.sqrt(20) + 4, rel=1e-15)
    eps = gaussian_quadratic_bound(eye(100), 1.0).epsilon
    assert eps == pytest.approx(122.0, rel=1e-15)
    # chi-square(100) oracle: P[chi2_100 > 122] = 0.0667 <= e^-1
    assert stats.chi2.sf(eps, 100) == pytest.approx(0.06672582081362236, rel=1e-9)
    assert stats.chi2.sf(eps, 100) <= math.exp(-1)


def test_gaussian_bound_rejects_t():
    for t in (0.0, -1.0, math.nan):
        with pytest.raises(DomainError):
            gaussian_quadratic_bound(eye(1), t)


def test_subgaussian_examples():
    b = subgaussian_quadratic_bound(eye(2), SubgaussianParams(1.0), 1.0)
    assert b.epsilon == pytest.approx(2 + 2 * SQRT2 + 2, rel=1e-15)
    assert b.term_mean == 0.0

    s = eye(2).with_mean_image_sq(1.0)
    b = subgaussian_quadratic_bound(s, SubgaussianParams(1.0, True), 1.0)
    assert b.term_mean == pytest.approx(1 + SQRT2, rel=1e-15)
    assert b.epsilon == pytest.approx(4 + 3 * SQRT2 + 1, rel=1e-15)
    assert b.epsilon == pytest.approx(9.2426, abs=1e-4)

    b = subgaussian_quadratic_bound(SpectralSummary.from_rho([4.0, 1.0]), SubgaussianParams(0.5), 2.0)
    assert b.epsilon == pytest.approx(0.25 * (5 + 2 * math.sqrt(34) + 16), rel=1e-15)


def test_terms_sum_exactly():
    s = summarize(np.random.default_rng(2).standard_normal((4, 7)), np.arange(7.0))
    b = subgaussian_quadratic_bound(s, SubgaussianParams(1.3, True), 2.5)
    assert b.epsilon == b.term_trace + b.term_deviation + b.term_mean
    assert min(b.term_trace, b.term_deviation, b.term_mean) >= 0


def test_zero_matrix_bound_is_zero():
    s = summarize(np.zeros((2, 3)), [1.0, 2.0, 3.0])
    b = subgaussian_quadratic_bound(s, SubgaussianParams(2.0, True), 1.0)
    assert b.epsilon == 0.0


def test_mean_term_needs_mean():
    with pytest.raises(InputError):
        subgaussian_quadratic_bound(eye(2), SubgaussianParams(1.0, True), 1.0)


def test_params_validation():
    with pytest.raises(InputError):
        SubgaussianParams(-1.0)


def rho_lists():
    return st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12)


@settings(max_examples=300)
@given(rho_lists(), st.floats(1e-3, 50.0))
def test_reduction_bit_for_bit(rho, t):
    s = SpectralSummary.from_rho(rho)
    assert subgaussian_quadratic_bound(s, SubgaussianParams(1.0), t) == gaussian_quadratic_bound(s, t)


@settings(max_examples=300)
@given(rho_lists(), st.floats(1e-3, 50.0))
def test_gaussian_equals_chi2_bound(rho, t):
    s = SpectralSummary.from_rho(rho)
    assert gaussian_quadratic_bound(s, t).epsilon == pytest.approx(chi2_tail_bound(s.rho, t), rel=1e-12)


@settings(max_examples=500)
@given(rho_lists(), st.floats(0.05, 5.0), st.floats(1e-3, 30.0))
def test_round_trip(rho, sigma, t):
    s = SpectralSummary.from_rho(rho)
    eps = subgaussian_quadratic_bound(s, SubgaussianParams(sigma), t).epsilon
    assert tail_probability_at(s, sigma, eps) == pytest.approx(math.exp(-t), rel=1e-12)


@settings(max_examples=200)
@given(rho_lists(), st.floats(0.1, 3.0), st.floats(0.01, 10.0), st.floats(0.0, 10.0), st.floats(1e-3, 1.0))
def test_monotonicity(rho, sigma, t, mean_sq, bump):
    s = SpectralSummary.from_rho(rho, mean_sq)
    p = SubgaussianParams(sigma, True)
    base = subgaussian_quadratic_bound(s, p, t).epsilon
    assert subgaussian_quadratic_bound(s, p, t * (1 + bump)).epsilon >= base
    assert subgaussian_quadratic_bound(s, SubgaussianParams(sigma * (1 + bump), True), t).epsilon >= base
    assert subgaussian_quadratic_bound(s.with_mean_image_sq(mean_sq + bump), p, t).epsilon >= base
    # spectral monotonicity holds for the mean-free bound; the mean factor
    # decreases in tr(Sigma^2) so it is checked separately through ||Sigma||
    p0 = SubgaussianParams(sigma)
    base0 = subgaussian_quadratic_bound(s, p0, t).epsilon
    for i in range(len(s.rho)):
        r = s.rho.copy()
        r[i] += bump
        assert subgaussian_quadratic_bound(SpectralSummary.from_rho(r), p0, t).epsilon >= base0


def test_strictly_increasing_in_t():
    s = SpectralSummary.from_rho([3.0, 1.0], 2.0)
    eps = [subgaussian_quadratic_bound(s, SubgaussianParams(1.0, True), t).epsilon for t in np.linspace(0.01, 20, 200)]
    assert np.all(np.diff(eps) > 0)


# -- tail_probability_at ------------------------------------------------------


def test_tail_probability_examples():
    assert tail_probability_at(eye(1), 1.0, 5.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert tail_probability_at(eye(10), 1.0, 10.0) == 1.0
    assert tail_probability_at(eye(10), 1.0, 3.0) == 1.0
    # independent evaluation exp(-(17/32) h1(4 * 25 / 17)) with the naive h1 form
    p = tail_probability_at(SpectralSummary.from_rho([4.0, 1.0]), 1.0, 30.0)
    assert p == pytest.approx(0.17235233809903258, rel=1e-12)
    assert 0 < p < 1


def test_tail_probability_degenerate():
    assert tail_probability_at(eye(2), 0.0, 1.0) == 0.0
    assert tail_probability_at(eye(2), 0.0, 0.0) == 1.0
    assert tail_probability_at(SpectralSummary.from_rho([0.0]), 1.0, 1.0) == 0.0


# -- MGF and CGF bounds -------------------------------------------------------


def test_mgf_examples():
    b = mgf_upper_bound(eye(1), SubgaussianParams(1.0), 0.25)
    assert b == pytest.approx(math.exp(0.375), rel=1e-15)
    assert 1 / math.sqrt(1 - 2 * 0.25) <= b
    assert mgf_upper_bound(eye(3), SubgaussianParams(2.0), 0.0) == 1.0
    s = eye(2).with_mean_image_sq(1.0)
    assert mgf_upper_bound(s, SubgaussianParams(1.0, True), 0.1) == pytest.approx(math.exp(0.35), rel=1e-14)


def test_mgf_domain():
    with pytest.raises(DomainError, match="0.5"):
        mgf_upper_bound(eye(1), SubgaussianParams(1.0), 0.5)
    with pytest.raises(DomainError):
        mgf_upper_bound(eye(1), SubgaussianParams(1.0), -0.1)
    # zero operator norm: no upper limit on eta
    assert mgf_upper_bound(SpectralSummary.from_rho([0.0]), SubgaussianParams(1.0), 100.0) == 1.0


@pytest.mark.parametrize("gamma", [0.3, 1.0, 4.0])
@pytest.mark.parametrize("dim", [1, 3, 10])
def test_mgf_dominates_gaussian_mgf(gamma, dim):
    s = SpectralSummary.from_rho(np.full(dim, gamma))
    for eta in np.linspace(0.0, 1.0 / (2 * gamma), 200, endpoint=False):
        exact = (1 - 2 * gamma * eta) ** (-dim / 2)
        assert exact <= mgf_upper_bound(s, SubgaussianParams(1.0), eta) * (1 + 1e-14)


def test_cgf_examples():
    b = gaussian_cgf_bound([1.0], [0.0], 0.25)
    assert b == pytest.approx(0.375, rel=1e-15)
    assert -0.5 * math.log(0.5) == pytest.approx(0.34657359027997264)
    assert -0.5 * math.log(0.5) <= b
    assert gaussian_cgf_bound([0.0, 0.0], [1.0, 1.0], 0.0) == pytest.approx(1.0)
    assert gaussian_cgf_bound([2.0, 1.0], [0.0, 0.0], 0.1) == pytest.approx(0.3 + 0.05 / 0.6, rel=1e-14)


def test_cgf_errors():
    with pytest.raises(DomainError, match="0.25"):
        gaussian_cgf_bound([2.0], [0.0], 0.25)
    with pytest.raises(InputError):
        gaussian_cgf_bound([-1.0], [0.0], 0.0)
    with pytest.raises(InputError):
        gaussian_cgf_bound([1.0, 1.0], [0.0], 0.0)


def test_exact_cgf_oracle_against_quadrature():
    from scipy import integrate

    a, b, lam = 0.7, -0.4, 0.3
    val, _ = integrate.quad(lambda z: math.exp(-z * z / 2 + lam * a * z * z + b * z) / math.sqrt(2 * math.pi), -np.inf, np.inf)
    assert exact_gaussian_cgf([a], [b], lam) == pytest.approx(math.log(val), rel=1e-9)


@settings(max_examples=300)
@given(
    st.lists(st.tuples(st.floats(0.0, 5.0), st.floats(-5.0, 5.0)), min_size=1, max_size=4),
    st.floats(0.0, 0.999),
)
def test_cgf_bound_dominates_exact(pairs, frac):
    alpha = np.array([p[0] for p in pairs])
    beta = np.array([p[1] for p in pairs])
    assume(alpha.max() > 1e-6)
    lam = frac / (2 * alpha.max())
    assert exact_gaussian_cgf(alpha, beta, lam) <= gaussian_cgf_bound(alpha, beta, lam) * (1 + 1e-12) + 1e-12


# -- chi-square and martingale bounds -----------------------------------------


def test_chi2_examples():
    assert chi2_tail_bound([1.0], 1.0) == pytest.approx(5.0, rel=1e-15)
    assert chi2_1_sf(5.0) == pytest.approx(0.025347318677468252, rel=1e-12)
    assert chi2_1_sf(5.0) <= math.exp(-1)
    assert chi2_tail_bound([1, 1, 1, 1], 2.0) == pytest.approx(4 + 2 * math.sqrt(8) + 4, rel=1e-15)
    with pytest.raises(InputError):
        chi2_tail_bound([1.0, -0.1], 1.0)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_chi2_bound_single_term_oracle(t):
    assert chi2_1_sf(chi2_tail_bound([1.0], t)) <= math.exp(-t)


def test_bernstein_family_examples():
    assert bernstein_bound(2, 1, 2) == pytest.approx(math.sqrt(8) + 4 / 3)
    assert bernstein_bound(0, 1, 3) == pytest.approx(2.0)
    assert bernstein_bound(1, 0, 1) == pytest.approx(SQRT2)
    assert centered_norm_bound(1, 1, 1) == pytest.approx(math.sqrt(8) + 4 / 3)
    assert centered_norm_bound(0, 0, 5) == 0.0
    assert centered_norm_bound(2, 3, 0.5) == pytest.approx(math.sqrt(8) + 2)
    assert vector_bernstein_bound(1, 1, 1) == pytest.approx(1 + math.sqrt(8) + 4 / 3)
    assert vector_bernstein_bound(4, 0, 2) == pytest.approx(10.0)
    assert vector_bernstein_bound(1, 1, 9) == pytest.approx(1 + math.sqrt(72) + 12)


@pytest.mark.parametrize("f", [bernstein_bound, centered_norm_bound, vector_bernstein_bound])
def test_bernstein_family_errors(f):
    with pytest.raises(InputError):
        f(-1, 1, 1)
    with pytest.raises(InputError):
        f(1, -1, 1)
    with pytest.raises(DomainError):
        f(1, 1, 0)


@settings(max_examples=200)
@given(st.floats(0, 100), st.floats(0, 100), st.floats(1e-3, 100))
def test_vector_bernstein_decomposition(v, b, t):
    assert vector_bernstein_bound(v, b, t) == pytest.approx(math.sqrt(v) + centered_norm_bound(v, b, t), rel=1e-15)


# -- comparison -----------------------------------------------------------------


def test_compare_identity_100():
    c = compare_bounds(eye(100), np.ones(100), 25.0)
    assert c.theorem_bound == pytest.approx(250.0, rel=1e-15)
    assert c.bernstein_squared == pytest.approx((10 + math.sqrt(20000) + 100 / 3) ** 2, rel=1e-14)
    # exact value is 34134.3; ~34153 is a loose rounding of it
    assert c.bernstein_squared == pytest.approx(34153, rel=1e-3)
    assert c.ratio == pytest.approx(0.0073, abs=5e-5)


def test_compare_small_t_limit():
    A = np.random.default_rng(5).standard_normal((3, 4))
    c = compare_bounds(summarize(A), np.linalg.norm(A, axis=0), 1e-12)
    assert c.ratio == pytest.approx(1.0, rel=1e-4)


def test_compare_diag():
    A = np.diag(np.arange(1.0, 11.0))
    c = compare_bounds(summarize(A), np.linalg.norm(A, axis=0), 10.0)
    # direct evaluation of both closed forms
    assert c.theorem_bound == pytest.approx(3391.6379686858627, rel=1e-12)
    assert c.bernstein_squared == pytest.approx(107882.05504666141, rel=1e-12)
    assert c.ratio < 1


def test_compare_inconsistent_norms():
    with pytest.raises(InputError):
        compare_bounds(eye(4), np.full(4, 1.1), 1.0)
