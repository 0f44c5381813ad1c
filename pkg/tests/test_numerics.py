import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from dualphi.numerics.ecdf import (
    EcdfSummary,
    chi2_reference,
    ecdf_ks,
    half_chi2_reference,
    point_mass_reference,
    uniform_reference,
)
from dualphi.numerics.optimize import as_box, fd_gradient, maximize, minimax
from dualphi.numerics.quadrature import NonIntegrableError, gauss_kronrod
from dualphi.numerics.special import (
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    normal_cdf,
    normal_quantile,
)

# -- quadrature ---------------------------------------------------------------


@pytest.mark.parametrize("fn, a, b, exact", [
    (np.sin, 0.0, math.pi, 2.0),
    (lambda x: np.exp(-x * x), -8.0, 8.0, math.sqrt(math.pi)),
    (lambda x: 1.0 / (1.0 + x * x), -50.0, 50.0, 2 * math.atan(50.0)),
    (np.sqrt, 0.0, 1.0, 2.0 / 3.0),
])
def test_gauss_kronrod_known_integrals(fn, a, b, exact):
    assert gauss_kronrod(fn, a, b, rtol=1e-11) == pytest.approx(exact, rel=1e-10)


def test_gauss_kronrod_against_mpmath_oracle():
    f = lambda x: np.log1p(x) * np.cos(3 * x) ** 2
    ref = float(mp.quad(lambda x: mp.log(1 + x) * mp.cos(3 * x) ** 2, [0, 1, 2, 4]))
    assert gauss_kronrod(f, 0.0, 4.0, rtol=1e-12) == pytest.approx(ref, rel=1e-11)


def test_gauss_kronrod_reversed_and_empty_interval():
    assert gauss_kronrod(np.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), rel=1e-12)
    assert gauss_kronrod(np.cos, 2.0, 2.0) == 0.0


def test_gauss_kronrod_signals_infinities():
    with pytest.raises(NonIntegrableError):
        gauss_kronrod(lambda x: 1.0 / (x - 0.5), 0.0, 1.0)


def test_gauss_kronrod_returns_nodes():
    val, nodes = gauss_kronrod(np.exp, 0.0, 1.0, return_nodes=True)
    assert val == pytest.approx(math.e - 1, rel=1e-12)
    assert nodes.min() >= 0.0 and nodes.max() <= 1.0 and nodes.size >= 21


@given(st.floats(0.1, 5), st.floats(-2, 2))
def test_gauss_kronrod_gaussian_moments(s, m):
    f = lambda x: x * np.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
    assert gauss_kronrod(f, m - 12 * s, m + 12 * s) == pytest.approx(m, abs=1e-9)


# -- special functions --------------------------------------------------------


def test_chi2_quantile_value():
    ref = float(mp.findroot(lambda q: mp.gammainc(0.5, 0, q / 2, regularized=True) - mp.mpf("0.95"),
                            3.8))
    assert chi2_quantile(1, 0.95) == pytest.approx(ref, rel=1e-12)
    assert chi2_quantile(1, 0.95) == pytest.approx(3.841459, abs=1e-6)


def test_trivial_special_values():
    assert chi2_cdf(1, 0.0) == 0.0
    assert normal_cdf(0.0) == 0.5


@pytest.mark.parametrize("d", [1, 2, 5])
@pytest.mark.parametrize("p", [0.5, 0.9, 0.95, 0.99])
def test_chi2_quantile_inverts_cdf(d, p):
    q = chi2_quantile(d, p)
    assert chi2_cdf(d, q) == pytest.approx(p, abs=1e-9)
    assert chi2_sf(d, q) == pytest.approx(1 - p, abs=1e-9)
    ref = float(mp.gammainc(mp.mpf(d) / 2, 0, mp.mpf(q) / 2, regularized=True))
    assert chi2_cdf(d, q) == pytest.approx(ref, abs=1e-14)


@given(st.floats(-6, 6))
def test_normal_quantile_inverts_cdf(x):
    assert normal_quantile(normal_cdf(x)) == pytest.approx(x, abs=1e-8)


# -- ECDF / KS ----------------------------------------------------------------


def test_ks_against_half_mass_reference():
    assert ecdf_ks([0.0, 0.0, 0.0, 0.0], half_chi2_reference()) == pytest.approx(0.5)


def test_ks_matching_atom_is_zero():
    assert ecdf_ks([1.0], point_mass_reference(1.0)) == 0.0


def test_ks_large_sample_from_reference():
    rng = np.random.default_rng(3)
    x = rng.chisquare(1, 100_000)
    assert ecdf_ks(x, chi2_reference(1)) < 0.01


def test_ks_brute_force():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=50)
    grid = np.sort(np.concatenate([x, x - 1e-12]))
    ecdf = np.searchsorted(np.sort(x), grid, side="right") / x.size
    brute = np.max(np.abs(ecdf - np.clip(grid, 0, 1)))
    assert ecdf_ks(x, uniform_reference()) == pytest.approx(brute, abs=1e-10)


def test_ecdf_summary():
    e = EcdfSummary.from_sample([3.0, 1.0, 2.0])
    assert e(2.0) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        EcdfSummary.from_sample([])


# -- optimisation -------------------------------------------------------------


def test_maximize_interior():
    r = maximize(lambda x: -(x[0] - 2.0) ** 2, [(0.0, 5.0)], np.array([0.0]))
    assert r.argopt[0] == pytest.approx(2.0, abs=1e-8)
    assert not r.boundary_active


def test_maximize_boundary():
    r = maximize(lambda x: -(x[0] - 2.0) ** 2, [(0.0, 1.0)], np.array([0.0]))
    assert r.argopt[0] == 1.0 and r.boundary_active


def test_minimize_through_negation():
    r = maximize(lambda x: -(-math.log(x[0]) + x[0]), [(0.1, 10.0)], np.array([5.0]))
    assert r.argopt[0] == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("corner", [(-4, -4), (-4, 4), (4, -4), (4, 4)])
def test_maximize_concave_quadratic_from_corners(corner):
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = np.array([0.3, -0.7])
    f = lambda x: -0.5 * (x - c) @ A @ (x - c)
    g = lambda x: -A @ (x - c)
    r = maximize(f, [(-4, 4), (-4, 4)], np.array(corner, dtype=float), tol=1e-10, grad=g)
    assert r.iterations <= 50
    assert r.gradient_norm < 1e-10
    np.testing.assert_allclose(r.argopt, c, atol=1e-9)


def test_maximize_treats_infinite_values_as_infeasible():
    f = lambda x: -math.inf if x[0] > 1.5 else -(x[0] - 2.0) ** 2
    r = maximize(f, [(0.0, 5.0)], np.array([0.0]))
    assert r.argopt[0] <= 1.5 and r.value > -1.0


def test_as_box_accepts_both_layouts():
    lo, hi = as_box((np.array([0.0, 1.0]), np.array([2.0, 3.0])))
    np.testing.assert_array_equal(lo, [0.0, 1.0])
    lo2, hi2 = as_box([(0.0, 2.0), (1.0, 3.0)])
    np.testing.assert_array_equal(hi2, [2.0, 3.0])


def test_fd_gradient_against_analytic():
    f = lambda x: math.sin(x[0]) * math.exp(x[1])
    x = np.array([0.4, -0.2])
    g = fd_gradient(f, x, f(x), *as_box([(-1, 1), (-1, 1)]))
    np.testing.assert_allclose(g, [math.cos(0.4) * math.exp(-0.2), math.sin(0.4) * math.exp(-0.2)],
                               rtol=1e-8)
    # one-sided at a face
    g = fd_gradient(f, np.array([1.0, 0.0]), f(np.array([1.0, 0.0])), *as_box([(-1, 1), (-1, 1)]))
    assert g[0] == pytest.approx(math.cos(1.0), rel=1e-5)


def test_minimax_saddle():
    t = 0.3
    inner = lambda th, a: 0.5 * (th[0] - t) ** 2 - 0.5 * (a[0] - t) ** 2
    r = minimax(inner, [(-5, 5)], [(-5, 5)], np.array([-4.0]), np.array([4.0]))
    assert r.theta[0] == pytest.approx(t, abs=1e-6)
    assert r.alpha[0] == pytest.approx(t, abs=1e-6)


def test_minimax_far_corner():
    inner = lambda th, a: (th[0] - 1) ** 2 - (a[0] - 1) ** 2
    r = minimax(inner, [(-5, 5)], [(-5, 5)], np.array([-5.0]), np.array([5.0]))
    assert r.theta[0] == pytest.approx(1.0, abs=1e-6)
    assert r.alpha[0] == pytest.approx(1.0, abs=1e-6)


def test_minimax_degenerate_outer():
    inner = lambda th, a: -(a[0] - 2.0) ** 2 + 1.0
    r = minimax(inner, [(-1, 1)], [(-5, 5)], np.array([0.25]), np.array([0.0]))
    assert r.value == pytest.approx(1.0, abs=1e-10)
    assert -1 <= r.theta[0] <= 1


@given(st.floats(-2, 2))
def test_minimax_recovers_random_saddles(t):
    inner = lambda th, a: 0.5 * (th[0] - t) ** 2 - 0.5 * (a[0] - t) ** 2
    r = minimax(inner, [(-5, 5)], [(-5, 5)], np.array([0.0]), np.array([0.0]))
    assert r.theta[0] == pytest.approx(t, abs=1e-6)


def test_scipy_cauchy_weight_is_a_valid_pv_oracle():
    # sanity check of the oracle used for principal values elsewhere
    val, _ = integrate.quad(lambda x: 1.0, -1.0, 2.0, weight="cauchy", wvar=0.0)
    assert val == pytest.approx(math.log(2.0), rel=1e-12)
