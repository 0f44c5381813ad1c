import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualphi.divergence import power
from dualphi.dual import DualObjective
from dualphi.estimate import (
    SINGULAR_INFORMATION,
    LocalBall,
    composite_estimate,
    dual_estimate,
    fix_coordinates,
    identity_constraint,
    min_dual_estimate,
    population_sandwich,
    sigma2_simple,
)
from dualphi.model import Exponential, GaussianMean, GaussianMeanVector, TwoMixture, normal_component
from dualphi.numerics.optimize import fd_gradient

GAMMAS = (-1.0, 0.0, 0.5, 1.0, 2.0)


def gauss(g):
    return DualObjective(GaussianMean(), power(g))


def expo(g):
    return DualObjective(Exponential(), power(g))


# -- point estimates ---------------------------------------------------------


def test_modified_kl_estimate_is_exponential_mle():
    res = dual_estimate(expo(0), [5.0], np.array([0.0, 1.0, 2.0]))
    assert res.estimate[0] == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=20)
@given(st.floats(-2, 2), st.integers(0, 10_000))
def test_modified_kl_estimate_is_gaussian_mean(theta, seed):
    x = np.random.default_rng(seed).normal(0.3, 1.0, 50)
    res = dual_estimate(gauss(0), [theta], x)
    assert res.estimate[0] == pytest.approx(x.mean(), abs=1e-7)


def test_min_dual_modified_kl_is_mle():
    x = Exponential().sample([2.0], 400, 3)
    res = min_dual_estimate(expo(0), x)
    assert res.estimate[0] == pytest.approx(1 / x.mean(), abs=1e-6)
    assert res.covariance[0, 0] == pytest.approx(res.estimate[0] ** 2, rel=1e-6)


def test_chi2_divergence_estimate_is_consistent():
    x = GaussianMean().sample([0.0], 100_000, 21)
    res = dual_estimate(gauss(2), [0.5], x)
    assert res.objective_value == pytest.approx(0.5 * math.expm1(0.25), abs=0.02)
    assert res.estimate[0] == pytest.approx(0.0, abs=0.03)


def test_min_dual_chi2_is_consistent():
    x = GaussianMean().sample([0.3], 10_000, 5)
    res = min_dual_estimate(gauss(2), x)
    assert res.estimate[0] == pytest.approx(0.3, abs=0.04)
    assert res.converged


@pytest.mark.parametrize("g", GAMMAS)
def test_first_order_condition(g):
    d = gauss(g)
    x = GaussianMean().sample([0.2], 500, 8)
    res = dual_estimate(d, [0.6], x)
    obj = lambda a: d.empirical_objective([0.6], a, x)
    grad = fd_gradient(obj, res.estimate, obj(res.estimate), *d.model.box)
    assert abs(grad[0]) < 1e-5
    assert res.objective_value >= 0


def test_estimate_is_a_maximum_over_a_grid():
    d = expo(1)
    x = Exponential().sample([1.0], 300, 9)
    res = dual_estimate(d, [1.6], x)
    grid = np.linspace(0.3, 3.0, 200)
    brute = max(d.empirical_objective([1.6], [a], x) for a in grid)
    assert res.objective_value >= brute - 1e-9


# -- constraints -------------------------------------------------------------


def test_composite_fixed_coordinate_is_constrained_mle():
    m = GaussianMeanVector(2)
    d = DualObjective(m, power(0))
    x = m.sample([0.4, 0.0], 300, 4)
    res = composite_estimate(d, fix_coordinates(m, {1: 0.0}), x)
    assert res.beta[0] == pytest.approx(x[:, 0].mean(), abs=1e-5)
    np.testing.assert_allclose(res.estimate, [res.beta[0], 0.0])
    np.testing.assert_allclose(res.companion, x.mean(axis=0), atol=1e-5)


def test_identity_constraint_reproduces_min_dual():
    d = gauss(2)
    x = GaussianMean().sample([0.1], 200, 6)
    a = composite_estimate(d, identity_constraint(d.model), x)
    b = min_dual_estimate(d, x)
    np.testing.assert_array_equal(a.estimate, b.estimate)
    assert a.objective_value == b.objective_value


def test_constraint_consistency_check():
    m = GaussianMeanVector(3)
    c = fix_coordinates(m, {0: 1.0, 2: -0.5})
    assert (c.beta_dim, c.l) == (1, 2)
    c.check([np.array([0.3]), np.array([-2.0])])
    with pytest.raises(ValueError):
        fix_coordinates(m, {5: 0.0})


@settings(max_examples=15)
@given(st.floats(-1, 1), st.floats(0.05, 0.5), st.integers(0, 1000))
def test_local_ball_stays_inside(center, radius, seed):
    x = np.random.default_rng(seed).normal(1.5, 1.0, 100)
    res = dual_estimate(gauss(2), [0.0], x, mode=LocalBall(np.array([center]), radius))
    assert abs(res.estimate[0] - center) <= radius + 1e-12


def test_local_ball_default_radius():
    assert LocalBall(np.array([0.0])).resolved_radius(1000) == pytest.approx(0.1)


# -- variances ---------------------------------------------------------------


@pytest.mark.parametrize("g", GAMMAS)
def test_sigma2_vanishes_at_the_truth(g):
    assert sigma2_simple(gauss(g), [0.4], theta_true=[0.4]) == 0.0


def test_sigma2_modified_kl_gaussian():
    # h = -(x - 1/2) up to a constant, so its variance is 1
    assert sigma2_simple(gauss(0), [1.0], theta_true=[0.0]) == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("g", [0.0, 2.0])
def test_sigma2_plug_in_agrees_with_population(g):
    d = gauss(g)
    x = GaussianMean().sample([0.0], 100_000, 13)
    pop = sigma2_simple(d, [0.5], theta_true=[0.0])
    assert sigma2_simple(d, [0.5], sample=x) == pytest.approx(pop, rel=0.05)


def test_sigma2_needs_exactly_one_source():
    with pytest.raises(ValueError):
        sigma2_simple(gauss(0), [0.0])


@pytest.mark.parametrize("g", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("make, t, inv_info", [(gauss, 0.0, 1.0), (expo, 1.5, 2.25)])
def test_population_sandwich_collapses_to_inverse_information(make, t, inv_info, g):
    V = population_sandwich(make(g), [t], [t])
    assert V[0, 0] == pytest.approx(inv_info, rel=1e-4)


def test_empirical_sandwich_near_inverse_information():
    x = GaussianMean().sample([0.0], 20_000, 17)
    res = dual_estimate(gauss(2), [0.0], x)
    assert res.covariance[0, 0] == pytest.approx(1.0, rel=0.1)
    assert SINGULAR_INFORMATION not in res.flags


def test_unidentified_weight_is_flagged():
    # two identical components: the weight does not move the density
    m = TwoMixture(normal_component(0.0), normal_component(0.0))
    x = np.random.default_rng(1).normal(size=100)
    res = dual_estimate(DualObjective(m, power(2)), [0.5], x)
    assert SINGULAR_INFORMATION in res.flags
    assert res.covariance is None
