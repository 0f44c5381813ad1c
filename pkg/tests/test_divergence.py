import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualphi.divergence import (
    DivergenceError,
    conjugate_eval,
    conjugate_of_derivative,
    custom,
    from_config,
    phi_eval,
    power,
    slope_sequence,
    solve_dphi,
)

GAMMAS = (-1.0, 0.0, 0.5, 1.0, 2.0)
mp.mp.dps = 40


def mp_phi(g, x):
    """Power generator in arbitrary precision."""
    x, g = mp.mpf(x), mp.mpf(g)
    if g == 0:
        return -mp.log(x) + x - 1
    if g == 1:
        return x * mp.log(x) - x + 1
    return (x ** g - g * x + g - 1) / (g * (g - 1))


def mp_conj(g, t):
    """Numeric sup_x {t x - phi(x)} from the stationarity condition."""
    g, t = mp.mpf(g), mp.mpf(t)
    # phi'(x) = (x^(g-1) - 1)/(g-1), or log x at g = 1
    x = mp.exp(t) if g == 1 else (1 + (g - 1) * t) ** (1 / (g - 1))
    return t * x - mp_phi(g, x)


# -- point values ------------------------------------------------------------


def test_phi_eval_kl_at_one():
    assert phi_eval(power(1), 1.0) == (0.0, 0.0, 1.0)


def test_phi_eval_chi2_at_three():
    assert phi_eval(power(2), 3.0) == pytest.approx((2.0, 2.0, 1.0), abs=1e-15)


def test_phi_eval_modified_kl_half():
    v, d1, d2 = phi_eval(power(0), 0.5)
    assert v == pytest.approx(float(mp_phi(0, 0.5)), rel=1e-15)
    assert (d1, d2) == pytest.approx((-1.0, 4.0), abs=1e-14)


def test_hellinger_at_zero_is_the_limit():
    v, d1, d2 = phi_eval(power(0.5), 0.0)
    assert v == pytest.approx(2.0, abs=1e-15)
    assert d1 == -math.inf and d2 == math.inf


@pytest.mark.parametrize("g, t, expected", [(2, 0.0, 0.0), (0, 0.5, math.log(2)), (2, 1.0, 1.5)])
def test_conjugate_values(g, t, expected):
    assert conjugate_eval(power(g), t) == pytest.approx(expected, rel=1e-14, abs=1e-15)


def test_conjugate_outside_domain_is_infinite():
    assert conjugate_eval(power(0), 1.0) == math.inf
    assert conjugate_eval(power(-1), 0.6) == math.inf


@pytest.mark.parametrize("g, x, expected", [(1, 1.0, 0.0), (2, 3.0, 4.0), (0, 0.5, -math.log(2))])
def test_conjugate_of_derivative_values(g, x, expected):
    assert conjugate_of_derivative(power(g), x) == pytest.approx(expected, abs=1e-14)


def test_conjugate_of_derivative_rejects_points_outside_domain():
    with pytest.raises(DivergenceError):
        conjugate_of_derivative(power(0), -1.0)


@pytest.mark.parametrize("g, closed", [
    (1, lambda x: x * math.log(x) - x + 1),
    (2, lambda x: 0.5 * (x - 1) ** 2),
    (-1, lambda x: 0.5 * (x - 1) ** 2 / x),
    (0.5, lambda x: 2 * (math.sqrt(x) - 1) ** 2),
])
@pytest.mark.parametrize("x", [0.5, 2.0])
def test_standard_family_members(g, closed, x):
    assert power(g).phi(np.array([x]))[0] == pytest.approx(closed(x), rel=1e-14)


def test_chi2_is_finite_on_the_whole_line():
    s = power(2)
    assert s.finite_on_reals
    assert s.phi(np.array([-3.0]))[0] == pytest.approx(8.0)
    assert power(0.5).phi(np.array([-0.1]))[0] == math.inf


# -- identities over a grid --------------------------------------------------

GRID = np.geomspace(1e-3, 1e3, 61)


@pytest.mark.parametrize("g", GAMMAS)
def test_phi_matches_high_precision(g):
    vals = power(g).phi(GRID)
    ref = np.array([float(mp_phi(g, x)) for x in GRID])
    np.testing.assert_allclose(vals, ref, rtol=1e-11, atol=1e-300)


@pytest.mark.parametrize("g", GAMMAS)
def test_near_one_uses_stable_form(g):
    x = 1.0 + np.array([-3e-5, -1e-7, 1e-9, 2e-6, 5e-5])
    ref = np.array([float(mp_phi(g, mp.mpf(v))) for v in x])
    np.testing.assert_allclose(power(g).phi(x), ref, rtol=1e-12)


@pytest.mark.parametrize("g", GAMMAS)
def test_conjugacy_round_trip(g):
    s = power(g)
    lhs = np.array([conjugate_of_derivative(s, x) for x in GRID])
    rhs = np.array([conjugate_eval(s, phi_eval(s, x)[1]) for x in GRID])
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("g", GAMMAS)
def test_conjugate_matches_high_precision_sup(g):
    s = power(g)
    ts = s.dphi(GRID[::6])
    ref = np.array([float(mp_conj(g, t)) for t in ts])
    np.testing.assert_allclose(s.conj(ts), ref, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("g", GAMMAS)
def test_biconjugacy(g):
    s = power(g)
    for x in GRID[::5]:
        # coarse t-grid around phi'(x), then Newton on t -> t x - phi*(t)
        t0 = s.dphi(np.array([x]))[0]
        ts = t0 + np.linspace(-0.5, 0.5, 101) * (abs(t0) + 0.1)
        ts = ts[np.isfinite(s.conj(ts))]
        vals = ts * x - s.conj(ts)
        t = ts[np.argmax(vals)]
        for _ in range(30):
            # (phi*)'(t) = (phi')^{-1}(t), (phi*)'' = 1 / phi''((phi')^{-1}(t))
            y = solve_dphi(s, t)
            t = t - (y - x) * s.d2phi(np.array([y]))[0]
        best = t * x - s.conj(np.array([t]))[0]
        assert best == pytest.approx(s.phi(np.array([x]))[0], rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("g", GAMMAS)
def test_convexity_and_normalisation(g):
    s = power(g)
    assert np.all(s.d2phi(GRID) >= 0)
    assert s.phi(np.array([1.0]))[0] == 0 and s.dphi(np.array([1.0]))[0] == 0
    assert s.d2phi(np.array([1.0]))[0] == s.phi2_at_one == 1.0


@pytest.mark.parametrize("g", GAMMAS)
def test_endpoint_slopes(g):
    s = power(g)
    for sign, stored in ((-1.0, s.a_conj), (1.0, s.b_conj)):
        if not math.isfinite(stored):
            continue
        # phi(y)/y approaches the Hellinger endpoint like y^(-1/2), so the
        # grid runs to 10^10 (at 10^6 the gap is still 4e-3)
        seq = slope_sequence(s, sign)
        assert abs(seq[-1] - stored) <= 1e-3 * max(1.0, abs(stored))


@given(st.floats(-6, 6), st.sampled_from(GAMMAS))
def test_log_kernels_agree_with_direct_forms(lr, g):
    s = power(g)
    r = np.array([math.exp(lr)])
    assert s.dphi_from_log(np.array([lr]))[0] == pytest.approx(s.dphi(r)[0], rel=1e-9, abs=1e-12)
    assert s.conj_deriv_from_log(np.array([lr]))[0] == pytest.approx(s.conj_deriv(r)[0],
                                                                     rel=1e-9, abs=1e-12)
    assert s.phi_from_log(np.array([lr]))[0] == pytest.approx(s.phi(r)[0], rel=1e-9, abs=1e-12)


def test_phi_from_log_survives_underflow():
    s = power(0)
    # r = exp(-800) underflows; phi(r) ~ -log r = 800
    assert s.phi_from_log(np.array([-800.0]))[0] == pytest.approx(799.0, rel=1e-15)


@given(st.floats(0.01, 50), st.sampled_from(GAMMAS))
def test_phi_nonnegative_and_zero_only_at_one(x, g):
    v = power(g).phi(np.array([x]))[0]
    assert v >= 0
    if abs(x - 1) > 1e-3:
        assert v > 0


@given(st.floats(-3, 1.4))
def test_generic_gamma_conjugate_via_newton(t):
    # gamma = 0.3 has no closed conjugate in the code; its domain ends at 1/0.7
    s = power(0.3)
    ref = float(mp_conj(0.3, t))
    assert s.conj(np.array([t]))[0] == pytest.approx(ref, rel=1e-9, abs=1e-12)


# -- construction ------------------------------------------------------------


def test_custom_spec_requires_normalisation():
    with pytest.raises(DivergenceError):
        custom(lambda x: (x - 1) ** 2 + 1, lambda x: 2 * (x - 1), lambda x: 2 + 0 * x, 2.0)


def test_custom_spec_rejects_inconsistent_curvature():
    with pytest.raises(DivergenceError):
        custom(lambda x: (x - 1) ** 2, lambda x: 2 * (x - 1), lambda x: 2 + 0 * x, 1.0)


def test_custom_quadratic_matches_chi2():
    s = custom(lambda x: 0.5 * (x - 1) ** 2, lambda x: x - 1, lambda x: 1 + 0 * x, 1.0)
    t = np.array([-0.5, 0.0, 0.7])
    np.testing.assert_allclose(s.conj(t), t + 0.5 * t * t, atol=1e-10)


def test_from_config():
    assert from_config({"family": "power", "gamma": 0.5}).gamma == 0.5
    with pytest.raises(DivergenceError):
        from_config({"family": "alpha"})
    with pytest.raises(DivergenceError):
        power(math.inf)
