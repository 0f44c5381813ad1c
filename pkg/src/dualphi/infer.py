"""Divergence tests, power approximation and boundary-safe mixture inference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .divergence import power
from .dual import DualObjective
from .estimate import (
    ConstraintSpec,
    EstimateResult,
    EstimationError,
    composite_estimate,
    dual_estimate,
    _beta_pilot,
    _n_obs,
)
from .model import MixtureModel, ParametricModel, TwoMixture
from .numerics.optimize import maximize
from .numerics.special import chi2_quantile, chi2_sf, normal_cdf, normal_quantile


class PlanningImpossible(ValueError):
    """No finite sample size reaches the requested power."""


@dataclass
class TestReport:
    statistic: float
    dof: int
    critical_value: float
    p_value: float
    reject: Optional[bool]
    level: float
    estimate: Optional[EstimateResult] = None
    flags: list = field(default_factory=list)

    __test__ = False  # not a pytest class


def _report(stat, dof, level, est=None, flags=None) -> TestReport:
    flags = list(flags or [])
    if dof == 0:
        return TestReport(0.0, 0, 0.0, 1.0, False, level, est, flags)
    crit = chi2_quantile(dof, 1.0 - level)
    if not math.isfinite(stat):
        return TestReport(stat, dof, crit, math.nan, None, level, est, flags + ["EstimationFailed"])
    return TestReport(stat, dof, crit, float(chi2_sf(dof, stat)), bool(stat > crit), level, est, flags)


def _check_level(level):
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")


# ---------------------------------------------------------------------------
# simple and composite divergence tests


def simple_test(dual: DualObjective, theta0, sample, level: float = 0.05, init=None,
                mode="global") -> TestReport:
    """Reject ``theta_T = theta0`` when ``2n D_hat(theta0) / phi''(1)`` exceeds ``q_{d, level}``."""
    _check_level(level)
    model = dual.model
    t0 = model.param(theta0)
    try:
        est = dual_estimate(dual, t0, sample, init=init, mode=mode, covariance=False)
    except EstimationError:
        return _report(math.nan, model.dim, level, None, ["EstimationFailed"])
    if est.objective_value < 0:
        # alpha = theta0 gives exactly 0; restart there
        est = dual_estimate(dual, t0, sample, init=t0, mode=mode, covariance=False)
    n = est.n
    stat = 2.0 * n * max(est.objective_value, 0.0) / dual.phi2
    return _report(stat, model.dim, level, est, est.flags)


def composite_test(dual: DualObjective, constraint: ConstraintSpec, sample, level: float = 0.05,
                   beta_init=None, alpha_init=None) -> TestReport:
    """Reject ``theta_T in {s(beta)}`` for large ``2n D_hat(Theta_0) / phi''(1)``; ``l`` dof."""
    _check_level(level)
    if constraint.l == 0:
        return _report(0.0, 0, level)
    est = composite_estimate(dual, constraint, sample, beta_init=beta_init, alpha_init=alpha_init)
    stat = 2.0 * est.n * max(est.objective_value, 0.0) / dual.phi2
    return _report(stat, constraint.l, level, est, est.flags)


# ---------------------------------------------------------------------------
# power approximation


@dataclass
class PowerPlan:
    divergence: float
    sigma: float
    dof: int
    level: float
    phi2: float
    n: Optional[int] = None
    power: Optional[float] = None
    target: Optional[float] = None
    n0: Optional[float] = None
    n_star: Optional[int] = None
    a: Optional[float] = None
    b: Optional[float] = None


def approx_power(D: float, sigma: float, n, dof: int = 1, level: float = 0.05,
                 phi2: float = 1.0):
    """``1 - Phi( sqrt(n)/sigma * (phi''(1) q / (2n) - D) )``."""
    q = chi2_quantile(dof, 1.0 - level)
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.sqrt(n) / sigma * (phi2 * q / (2.0 * n) - D)
    # Phi(-arg) keeps the small powers accurate
    return normal_cdf(-arg)


def power_plan(D: float, sigma: float, dof: int = 1, level: float = 0.05, n: Optional[int] = None,
               target: Optional[float] = None, phi2: float = 1.0) -> PowerPlan:
    """Approximate power at ``n``, or the sample size reaching power ``target``.

    The sample size solves ``approx_power(n) = target`` exactly:
    ``n0 = (a + b - sign(z) sqrt(a (a + 2b))) / (2 D^2)`` with
    ``z = Phi^-1(1 - target)``, ``a = sigma^2 z^2`` and ``b = phi''(1) q D``,
    and ``n_star = floor(n0) + 1``.
    """
    _check_level(level)
    if (n is None) == (target is None):
        raise ValueError("give exactly one of n and target")
    if sigma <= 0 or not math.isfinite(sigma):
        raise ValueError("sigma must be positive")
    plan = PowerPlan(D, sigma, dof, level, phi2)
    if n is not None:
        plan.n = int(n)
        plan.power = float(approx_power(D, sigma, n, dof, level, phi2))
        return plan
    if not 0 < target < 1:
        raise ValueError("target power must lie in (0, 1)")
    if D <= 0:
        raise PlanningImpossible("the alternative has zero divergence from the null")
    q = chi2_quantile(dof, 1.0 - level)
    z = normal_quantile(1.0 - target)
    a = sigma * sigma * z * z
    b = phi2 * q * D
    n0 = (a + b - math.copysign(1.0, z) * math.sqrt(a * (a + 2.0 * b))) / (2.0 * D * D)
    plan.target, plan.a, plan.b, plan.n0 = target, a, b, n0
    plan.n_star = int(math.floor(n0)) + 1
    plan.n = plan.n_star
    plan.power = float(approx_power(D, sigma, plan.n_star, dof, level, phi2))
    return plan


# ---------------------------------------------------------------------------
# likelihood ratio


def _mean_loglik(model, theta, sample):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = float(np.mean(model.log_density(theta, sample)))
    return v if not math.isnan(v) else -math.inf


def glr_statistic(model: ParametricModel, sample, theta0=None, constraint: ConstraintSpec = None,
                  init=None, tol: float = 1e-10) -> float:
    """``2 [sup_Theta l - sup_Theta0 l]`` with ``l`` the log-likelihood.

    Give ``theta0`` for a simple null or ``constraint`` for a composite one.
    """
    if (theta0 is None) == (constraint is None):
        raise ValueError("give exactly one of theta0 and constraint")
    n = _n_obs(model, sample)
    obj = lambda t: _mean_loglik(model, t, sample)
    start = model.pilot(sample) if init is None else model.param(init)
    full = maximize(obj, model.box, start, tol=tol)
    if theta0 is not None:
        t0 = model.param(theta0)
        null_val = obj(t0)
        if null_val > full.value:
            full = maximize(obj, model.box, t0, tol=tol)
    else:
        if constraint.beta_dim == 0:
            null_val = obj(constraint.embed(np.zeros(0)))
        else:
            lo, hi = (np.asarray(b, dtype=float).reshape(constraint.beta_dim)
                      for b in constraint.beta_box)
            b0 = _beta_pilot(constraint, start, lo, hi)
            null = maximize(lambda b: obj(constraint.embed(b)), (lo, hi), b0, tol=tol)
            null_val = null.value
    return max(2.0 * n * (full.value - null_val), 0.0)


# ---------------------------------------------------------------------------
# signed mixtures


@dataclass
class MixtureChi2:
    """``value`` is the dual chi-square estimate; ``statistic = 2 n value``."""

    value: float
    statistic: float
    alpha: np.ndarray
    strict_feasible: bool
    roots: tuple
    estimate: EstimateResult


def _require_chi2(dual: DualObjective):
    s = dual.spec
    if not dual.model.signed:
        raise ValueError("mixture statistics need a signed (extended) mixture model")
    if not s.finite_on_reals:
        raise ValueError("the generator must be finite on the whole line")


def mixture_dual(model: MixtureModel, theta_e: str = "principal_value") -> DualObjective:
    """Chi-square dual objective on a signed mixture."""
    if not model.signed:
        from .model import extend
        model = extend(model)
    return DualObjective(model, power(2.0), theta_e=theta_e)


def mixture_dual_chi2(dual: DualObjective, theta, sample, search_box=None, init=None,
                      tol: float = 1e-9) -> MixtureChi2:
    """``sup_alpha P_theta f(theta, alpha) - P_n g(theta, alpha)`` over the extended weights."""
    _require_chi2(dual)
    model = dual.model
    t = model.param(theta)
    box = None
    if search_box is not None:
        box = tuple(np.asarray(np.atleast_1d(b), dtype=float).reshape(model.dim) for b in search_box)
    est = dual_estimate(dual, t, sample, init=t if init is None else init, tol=tol,
                        covariance=False, box=box)
    n = est.n
    value = max(est.objective_value, 0.0)
    pr = dual.probe(t, est.estimate)
    return MixtureChi2(value, 2.0 * n * value, est.estimate, pr.strict_feasible, pr.roots, est)


def _component_null(model: MixtureModel, k0: int) -> ConstraintSpec:
    """Weights of the dropped components fixed at zero."""
    k = model.k
    if not 1 <= k0 <= k - 1:
        raise ValueError("k0 must lie in [1, k - 1]")
    if isinstance(model, TwoMixture):
        # parameter is the weight of p_1; the null keeps p_0 only
        return ConstraintSpec(s=lambda b: np.zeros(1), r=lambda t: np.asarray(t, dtype=float)[:1],
                              beta_dim=0, l=1, beta_box=(np.zeros(0), np.zeros(0)),
                              S=lambda b: np.zeros((1, 0)), R=lambda t: np.eye(1), name="p1-weight-zero")
    # keep the first k0 components; their k0 - 1 free weights and their free parameters
    sizes = [c.n_free for c in model.components]
    offsets = np.cumsum([k - 1] + sizes)[:-1]
    lo, hi = model.box
    keep_w = list(range(k0 - 1))
    keep_p = [offsets[i] + j for i in range(k0) for j in range(sizes[i])]
    idx = keep_w + keep_p
    base = model.pilot(np.zeros(1))

    def s(beta):
        th = base.copy()
        th[: k - 1] = 0.0
        th[idx] = beta
        th[k0 - 1] = 1.0 - float(np.sum(th[: k0 - 1]))
        return th

    def r(theta):
        w = model.weights(theta)
        return w[k0:]

    return ConstraintSpec(s=s, r=r, beta_dim=len(idx), l=k - k0,
                          beta_box=(lo[idx], hi[idx]), name=f"first-{k0}-components")


def mixture_component_test(dual: DualObjective, k0: int, sample, level: float = 0.05) -> TestReport:
    """Test ``k0`` components against the ``k``-component mixture; ``k - k0`` dof."""
    _check_level(level)
    _require_chi2(dual)
    model = dual.model
    cons = _component_null(model, k0)
    dof = model.k - k0
    if cons.beta_dim == 0:
        res = mixture_dual_chi2(dual, cons.embed(np.zeros(0)), sample)
        return _report(res.statistic, dof, level, res.estimate)
    est = composite_estimate(dual, cons, sample)
    stat = 2.0 * est.n * max(est.objective_value, 0.0)
    return _report(stat, dof, level, est, est.flags)


@dataclass
class ConfidenceRegion:
    points: np.ndarray
    hull: Optional[tuple]
    statistics: np.ndarray
    grid: np.ndarray
    critical_value: float
    dof: int


def confidence_region(dual: DualObjective, sample, level: float = 0.05,
                      grid: Optional[Sequence] = None) -> ConfidenceRegion:
    """Grid points ``theta`` with ``2n chi2_tilde(theta) <= q_{d, level}``.

    ``grid`` defaults to 101 points of the probability weight range
    ``[0, 1]`` for two-component mixtures.
    """
    _check_level(level)
    _require_chi2(dual)
    model = dual.model
    d = model.dim
    if grid is None:
        if d != 1:
            raise ValueError("a grid is required beyond one parameter")
        grid = np.linspace(0.0, 1.0, 101)
    g = np.asarray(grid, dtype=float)
    g = g.reshape(-1, d) if d > 1 else g.reshape(-1, 1)
    q = chi2_quantile(d, 1.0 - level)
    stats = np.array([mixture_dual_chi2(dual, th, sample).statistic for th in g])
    keep = stats <= q
    pts = g[keep]
    hull = None
    if len(pts):
        hull = (pts.min(axis=0), pts.max(axis=0))
    if d == 1:
        pts = np.sort(pts.ravel())
        g = g.ravel()
        if hull is not None:
            hull = (float(hull[0][0]), float(hull[1][0]))
    return ConfidenceRegion(pts, hull, stats, g, q, d)
