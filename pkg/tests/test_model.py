import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualphi.model import (
    Binomial,
    Exponential,
    GaussianMean,
    GaussianMeanVector,
    ModelConfigError,
    TwoMixture,
    extend,
    from_config,
    integrate_against,
    make_builtin,
    normal_component,
    sample,
    two_normal_mixture,
)
from dualphi.numerics.ecdf import ecdf_ks

SCALAR_MODELS = {
    "gaussian": (GaussianMean(), [-1.0, -0.3, 0.0, 0.4, 1.5]),
    "exponential": (Exponential(), [0.3, 0.8, 1.0, 2.0, 5.0]),
    "mixture": (two_normal_mixture(), [0.05, 0.2, 0.5, 0.7, 0.95]),
}


def test_gaussian_density_value():
    assert GaussianMean().density([0.0], np.array([0.0]))[0] == pytest.approx(
        float(1 / mp.sqrt(2 * mp.pi)), rel=1e-15)


def test_exponential_fisher():
    assert Exponential().fisher_information([2.0])[0, 0] == pytest.approx(0.25, rel=1e-12)


def test_zero_weight_mixture_is_first_component():
    m = two_normal_mixture()
    x = np.linspace(-5, 5, 41)
    np.testing.assert_allclose(m.density([0.0], x), GaussianMean().density([0.0], x), rtol=1e-14)


@pytest.mark.parametrize("model, theta, u, expected", [
    (GaussianMean(), [0.0], lambda x: x * x, 1.0),
    (Exponential(), [1.0], lambda x: x, 1.0),
    (GaussianMean(), [0.0], lambda x: np.ones_like(x), 1.0),
])
def test_integrate_against(model, theta, u, expected):
    assert integrate_against(model, theta, u) == pytest.approx(expected, abs=1e-8)


def test_sample_moments_and_determinism():
    g = sample(GaussianMean(), [0.0], 100_000, 7)
    assert abs(g.mean()) <= 4 / math.sqrt(1e5)
    e = sample(Exponential(), [2.0], 100_000, 7)
    assert abs(e.mean() - 0.5) <= 4 * 0.5 / math.sqrt(1e5)
    np.testing.assert_array_equal(g, sample(GaussianMean(), [0.0], 100_000, 7))


@pytest.mark.parametrize("name", sorted(SCALAR_MODELS))
def test_density_integrates_to_one(name):
    model, thetas = SCALAR_MODELS[name]
    for t in thetas:
        assert model.integrate([t], lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("name", sorted(SCALAR_MODELS))
def test_score_has_zero_mean(name):
    model, thetas = SCALAR_MODELS[name]
    for t in thetas:
        assert model.integrate([t], lambda x: model.score([t], x)[..., 0]) == pytest.approx(0, abs=1e-6)


@pytest.mark.parametrize("name", sorted(SCALAR_MODELS))
def test_fisher_is_score_outer_product(name):
    model, thetas = SCALAR_MODELS[name]
    for t in thetas:
        info = model.fisher_information([t])
        direct = model.integrate([t], lambda x: model.score([t], x)[..., 0] ** 2)
        assert info[0, 0] > 0
        assert info[0, 0] == pytest.approx(direct, abs=1e-5)


def test_mixture_fisher_at_boundary():
    # at weight 0: E0[(p1/p0 - 1)^2] = exp(0.25) - 1
    info = two_normal_mixture().fisher_information([0.0])[0, 0]
    assert info == pytest.approx(math.expm1(0.25), abs=1e-7)


@pytest.mark.parametrize("name", sorted(SCALAR_MODELS))
def test_sampler_matches_cdf(name):
    model, thetas = SCALAR_MODELS[name]
    x = model.sample([thetas[2]], 10_000, 11)
    ks = ecdf_ks(x, lambda v: model.cdf([thetas[2]], v))
    assert ks < 1.95 / math.sqrt(1e4) * 1.2


def test_vector_model():
    m = GaussianMeanVector(2)
    t = [0.3, -0.2]
    assert m.integrate(t, lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(m.fisher_information(t), np.eye(2), atol=1e-8)
    means = [m.integrate(t, lambda x, i=i: x[:, i]) for i in range(2)]
    np.testing.assert_allclose(means, t, atol=1e-10)
    x = m.sample(t, 5, 1)
    assert x.shape == (5, 2)


def test_binomial_sums_over_the_support():
    m = Binomial(6)
    assert m.integrate([0.3], lambda x: x) == pytest.approx(1.8, rel=1e-12)
    assert m.fisher_information([0.3])[0, 0] == pytest.approx(6 / (0.3 * 0.7), rel=1e-6)


@given(st.floats(-0.5, 1.5))
def test_signed_extension_has_unit_mass(w):
    m = extend(two_normal_mixture())
    assert m.integrate([w], lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-8)
    assert m.weights([w]).sum() == pytest.approx(1.0, abs=1e-15)


@given(st.floats(0, 1))
def test_probability_weights_stay_in_unit_interval(w):
    ws = two_normal_mixture().weights([w])
    assert np.all((ws >= 0) & (ws <= 1))


def test_signed_density_changes_sign():
    m = extend(two_normal_mixture())
    # weight -0.3 on N(0.5, 1): zero near x = 0.25 + 2 log(1 + 1/0.3)
    x0 = 0.25 + 2 * math.log(1 + 1 / 0.3)
    d = m.density([-0.3], np.array([x0 - 0.1, x0 + 0.1]))
    assert d[0] > 0 > d[1]


def test_mixture_sampler_rejects_signed_weights():
    with pytest.raises((ValueError, ModelConfigError)):
        extend(two_normal_mixture()).sample([-0.2], 10, 0)


def test_mixture_pack_round_trip():
    m = make_builtin("KMixture", components=[{"family": "normal", "mean": 0.0},
                                             {"family": "normal", "mean": 1.0},
                                             {"family": "normal", "mean": 3.0}])
    t = m.pack([0.2, 0.5, 0.3])
    np.testing.assert_allclose(m.weights(t), [0.2, 0.5, 0.3])
    assert m.integrate(t, lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-8)


def test_make_builtin_names():
    assert isinstance(make_builtin("normal"), GaussianMean)
    assert isinstance(from_config({"name": "two_mixture"}), TwoMixture)
    assert from_config({"name": "gaussian_mean_vector", "dim": 3}).dim == 3
    with pytest.raises(ModelConfigError):
        make_builtin("cauchy")


def test_box_checks():
    m = Exponential()
    assert m.contains([1.0]) and not m.contains([-1.0])
    assert TwoMixture(normal_component(0.0), normal_component(0.5)).contains([0.3])
