"""Dual divergence estimators and their asymptotic covariances.

``dual_estimate``        sup over alpha of the empirical objective at fixed theta.
``min_dual_estimate``    inf over theta of that supremum.
``composite_estimate``   the same min-max restricted to ``theta = s(beta)``.

Covariances are those of the ``sqrt(n)``-scaled limit laws, i.e. divide by
``n`` for standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dual import DualObjective, _fd_jacobian, fd_hessian
from .numerics.optimize import OptimizeReport, maximize, minimax

SINGULAR_INFORMATION = "SingularInformation"
_COND_LIMIT = 1e12
# curvature below this is finite-difference noise, i.e. an unidentified direction
_EIG_FLOOR = 1e-6


class EstimationError(RuntimeError):
    """The objective is infeasible everywhere the optimizer looked."""


@dataclass(frozen=True)
class LocalBall:
    """Restrict the search to ``|x - center| <= radius`` (default ``n^(-1/3)``)."""

    center: np.ndarray
    radius: Optional[float] = None

    def resolved_radius(self, n: int) -> float:
        return float(self.radius) if self.radius is not None else n ** (-1.0 / 3.0)


GLOBAL = "global"


@dataclass
class EstimateResult:
    estimate: np.ndarray
    objective_value: float
    covariance: Optional[np.ndarray]
    report: OptimizeReport
    mode: object = GLOBAL
    companion: Optional[np.ndarray] = None
    flags: list = field(default_factory=list)
    n: int = 0
    beta: Optional[np.ndarray] = None
    inner_report: Optional[OptimizeReport] = None

    @property
    def converged(self) -> bool:
        ok = self.report.converged
        if self.inner_report is not None:
            ok = ok and self.inner_report.converged
        return bool(ok)


# ---------------------------------------------------------------------------
# constraints


@dataclass
class ConstraintSpec:
    """Null set ``{s(beta)}`` described both by an embedding and by ``r(theta) = 0``.

    ``S`` and ``R`` are the Jacobians of ``s`` and ``r``; they default to
    central differences when omitted.
    """

    s: Callable[[np.ndarray], np.ndarray]
    r: Callable[[np.ndarray], np.ndarray]
    beta_dim: int
    l: int
    beta_box: tuple
    S: Optional[Callable] = None
    R: Optional[Callable] = None
    name: str = ""

    def embed(self, beta) -> np.ndarray:
        return np.asarray(self.s(np.atleast_1d(np.asarray(beta, dtype=float))), dtype=float)

    def jacobian_s(self, beta) -> np.ndarray:
        b = np.atleast_1d(np.asarray(beta, dtype=float))
        if self.S is not None:
            return np.atleast_2d(np.asarray(self.S(b), dtype=float))
        box = (np.full(b.size, -np.inf), np.full(b.size, np.inf))
        return _fd_jacobian(self.embed, b, box)

    def jacobian_r(self, theta) -> np.ndarray:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.R is not None:
            return np.atleast_2d(np.asarray(self.R(t), dtype=float))
        box = (np.full(t.size, -np.inf), np.full(t.size, np.inf))
        return _fd_jacobian(lambda z: np.atleast_1d(self.r(z)), t, box)

    def check(self, betas, atol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless ``r(s(beta)) = 0`` and both Jacobians have full rank."""
        for b in betas:
            th = self.embed(b)
            if self.l and np.max(np.abs(self.r(th))) > atol:
                raise ValueError("r(s(beta)) is not zero")
            if self.beta_dim:
                sv = np.linalg.svd(self.jacobian_s(b), compute_uv=False)
                if sv.min() <= 1e-10 * max(1.0, sv.max()):
                    raise ValueError("Jacobian of s is rank deficient")
            if self.l:
                sv = np.linalg.svd(self.jacobian_r(th), compute_uv=False)
                if sv.min() <= 1e-10 * max(1.0, sv.max()):
                    raise ValueError("Jacobian of r is rank deficient")


def identity_constraint(model) -> ConstraintSpec:
    """``s = identity``, ``l = 0``: the unconstrained problem."""
    d = model.dim
    return ConstraintSpec(
        s=lambda b: np.asarray(b, dtype=float), r=lambda t: np.zeros(0),
        beta_dim=d, l=0, beta_box=model.box, S=lambda b: np.eye(d),
        R=lambda t: np.zeros((0, d)), name="identity")


def fix_coordinates(model, fixed: dict) -> ConstraintSpec:
    """Null set where coordinate ``i`` equals ``fixed[i]``."""
    d = model.dim
    idx = sorted(int(i) for i in fixed)
    if any(i < 0 or i >= d for i in idx):
        raise ValueError("fixed coordinate out of range")
    vals = np.array([float(fixed[i]) for i in idx])
    free = [i for i in range(d) if i not in idx]
    lo, hi = model.box

    def s(beta):
        th = np.empty(d)
        th[free] = beta
        th[idx] = vals
        return th

    def r(theta):
        return np.asarray(theta, dtype=float)[idx] - vals

    S = np.zeros((d, len(free)))
    S[free, np.arange(len(free))] = 1.0
    R = np.zeros((len(idx), d))
    R[np.arange(len(idx)), idx] = 1.0
    return ConstraintSpec(s=s, r=r, beta_dim=len(free), l=len(idx),
                          beta_box=(lo[free], hi[free]), S=lambda b: S, R=lambda t: R,
                          name=f"fix{dict(zip(idx, vals.tolist()))}")


# ---------------------------------------------------------------------------
# helpers


def _search_box(model, mode, n, box=None):
    lo, hi = (np.asarray(b, dtype=float).copy() for b in (model.box if box is None else box))
    project = None
    if isinstance(mode, LocalBall):
        c = model.param(mode.center)
        rad = mode.resolved_radius(n)
        lo = np.maximum(lo, c - rad)
        hi = np.minimum(hi, c + rad)
        if np.any(lo > hi):
            raise EstimationError("ball does not meet the parameter box")
        if model.dim > 1:
            def project(z, c=c, rad=rad):
                v = z - c
                nv = float(np.linalg.norm(v))
                return z if nv <= rad else c + v * (rad / nv)
    return (lo, hi), project


def _n_obs(model, sample):
    x = np.asarray(sample)
    return x.shape[0] if model.obs_dim > 1 or x.ndim > 1 else x.size


def _sandwich(dual: DualObjective, theta, alpha, sample, box):
    """``S^-1 M S^-1`` with empirical plug-ins at ``alpha``."""
    obj = lambda a: dual.empirical_objective(theta, a, sample)
    S = -fd_hessian(obj, alpha, box)
    try:
        grads = dual.h_gradient_alpha(theta, alpha, sample)
    except ArithmeticError:
        return None
    M = grads.T @ grads / grads.shape[0]
    if not np.all(np.isfinite(S)) or not np.all(np.isfinite(M)):
        return None
    if np.linalg.cond(S) > _COND_LIMIT or np.any(np.linalg.eigvalsh(0.5 * (S + S.T)) <= _EIG_FLOOR):
        return None
    Si = np.linalg.inv(S)
    V = Si @ M @ Si
    return 0.5 * (V + V.T)


# ---------------------------------------------------------------------------
# estimators


def dual_estimate(dual: DualObjective, theta, sample, init=None, mode=GLOBAL,
                  tol: float = 1e-9, covariance: bool = True, box=None) -> EstimateResult:
    """``alpha_hat(theta)`` and ``D_hat(theta)``: maximise ``P_n h(theta, .)``.

    Parameters
    ----------
    theta : array_like
        First argument of the divergence (e.g. the null value).
    init : array_like, optional
        Start of the ascent.  Global mode defaults to the model's moment
        pilot; LocalBall starts at the ball centre.  When the start is
        infeasible the ascent restarts from ``theta``, where ``h`` is 0.
    box : (lo, hi), optional
        Search box for ``alpha``; the model's parameter box by default.
    """
    model = dual.model
    t = model.param(theta)
    n = _n_obs(model, sample)
    box, project = _search_box(model, mode, n, box)
    obj = lambda a: dual.empirical_objective(t, a, sample)
    if init is None:
        init = model.param(mode.center) if isinstance(mode, LocalBall) else model.pilot(sample)
    start = np.clip(model.param(init), *box)
    if project is not None:
        start = project(start)
    rep = maximize(obj, box, start, tol=tol, project=project)
    fallback = np.clip(t, *box)
    if (not math.isfinite(rep.value) or rep.value < 0) and not np.array_equal(start, fallback):
        # theta itself is always admissible with objective 0
        alt = maximize(obj, box, fallback if project is None else project(fallback),
                       tol=tol, project=project)
        if alt.value > rep.value or not math.isfinite(rep.value):
            rep = alt
    if not math.isfinite(rep.value):
        raise EstimationError("empirical objective is infeasible at every visited point")
    flags = []
    cov = None
    if covariance:
        cov = _sandwich(dual, t, rep.argopt, sample, box)
        if cov is None:
            flags.append(SINGULAR_INFORMATION)
    if not rep.converged:
        flags.append("NotConverged")
    return EstimateResult(rep.argopt, rep.value, cov, rep, mode, None, flags, n)


def composite_estimate(dual: DualObjective, constraint: ConstraintSpec, sample,
                       beta_init=None, alpha_init=None, mode=GLOBAL, tol: float = 1e-8,
                       covariance: bool = False) -> EstimateResult:
    """``inf_beta sup_alpha P_n h(s(beta), alpha)``.

    ``estimate`` is the lifted ``s(beta_hat)``, ``beta`` holds ``beta_hat``
    and ``companion`` the inner ``alpha_hat``.  With ``covariance=True`` the
    joint ``(beta, alpha)`` matrix ``A^-1 F A^-1`` is attached.
    """
    model = dual.model
    n = _n_obs(model, sample)
    abox, aproj = _search_box(model, mode, n)
    pilot = model.pilot(sample)
    if alpha_init is None:
        alpha_init = model.param(mode.center) if isinstance(mode, LocalBall) else pilot
    alpha_init = np.clip(model.param(alpha_init), *abox)

    if constraint.beta_dim == 0:
        theta0 = constraint.embed(np.zeros(0))
        res = dual_estimate(dual, theta0, sample, init=alpha_init, mode=mode,
                            tol=tol / 10.0, covariance=False)
        return EstimateResult(theta0, res.objective_value, None, res.report, mode,
                              res.estimate, res.flags, n, np.zeros(0), res.report)

    blo, bhi = (np.asarray(b, dtype=float).reshape(constraint.beta_dim) for b in constraint.beta_box)
    if isinstance(mode, LocalBall) and constraint.name == "identity":
        blo, bhi = abox
    if beta_init is None:
        beta_init = _beta_pilot(constraint, pilot, blo, bhi)
    beta_init = np.clip(np.atleast_1d(np.asarray(beta_init, dtype=float)), blo, bhi)

    def inner(beta, alpha):
        return dual.empirical_objective(constraint.embed(beta), alpha, sample)

    mm = minimax(inner, (blo, bhi), abox, beta_init, alpha_init, tol=tol,
                 inner_project=aproj, outer_project=aproj if constraint.name == "identity" else None)
    beta_hat = mm.theta
    theta_hat = constraint.embed(beta_hat)
    flags = [] if mm.converged else ["NotConverged"]
    cov = None
    if covariance:
        cov = _joint_covariance(dual, constraint, beta_hat, mm.alpha, sample)
        if cov is None:
            flags.append(SINGULAR_INFORMATION)
    return EstimateResult(theta_hat, mm.value, cov, mm.outer, mode, mm.alpha, flags, n,
                          beta_hat, mm.inner)


def _beta_pilot(constraint, theta_pilot, lo, hi):
    """Least-squares pull-back of an unconstrained pilot through ``s``."""
    finite = np.isfinite(lo) & np.isfinite(hi)
    b = np.clip(np.where(finite, 0.5 * (np.where(finite, lo, 0) + np.where(finite, hi, 0)), 0.0), lo, hi)
    for _ in range(20):
        J = constraint.jacobian_s(b)
        resid = constraint.embed(b) - theta_pilot
        step, *_ = np.linalg.lstsq(J, -resid, rcond=None)
        nb = np.clip(b + step, lo, hi)
        if np.allclose(nb, b, rtol=0, atol=1e-12):
            break
        b = nb
    return b


def min_dual_estimate(dual: DualObjective, sample, theta_init=None, alpha_init=None,
                      mode=GLOBAL, tol: float = 1e-8) -> EstimateResult:
    """``theta_hat = arg inf_theta sup_alpha P_n h(theta, alpha)``.

    The covariance is ``I(theta_hat)^-1``.  The inner optimum is returned as
    ``companion``.
    """
    res = composite_estimate(dual, identity_constraint(dual.model), sample,
                             beta_init=theta_init, alpha_init=alpha_init, mode=mode, tol=tol)
    try:
        info = dual.model.fisher_information(res.estimate)
        res.covariance = np.linalg.inv(info)
    except (np.linalg.LinAlgError, ArithmeticError, ValueError):
        res.covariance = None
        res.flags.append(SINGULAR_INFORMATION)
    return res


def _joint_covariance(dual, constraint, beta, alpha, sample):
    """``A^-1 F A^-1`` for the stacked ``(beta, alpha)`` estimating equations."""
    model = dual.model
    kb = constraint.beta_dim
    z0 = np.concatenate([beta, alpha])
    inf = np.full(z0.size, np.inf)

    def split(z):
        return constraint.embed(z[:kb]), z[kb:]

    def mean_h(z):
        th, a = split(z)
        return dual.empirical_objective(th, a, sample)

    def h_vec(z):
        th, a = split(z)
        return dual.h_values(th, a, sample)

    lo = np.concatenate([np.asarray(constraint.beta_box[0], dtype=float).reshape(kb), model.box[0]])
    hi = np.concatenate([np.asarray(constraint.beta_box[1], dtype=float).reshape(kb), model.box[1]])
    A = fd_hessian(mean_h, z0, (lo, hi))
    try:
        G = _fd_jacobian(h_vec, z0, (-inf, inf))
    except ArithmeticError:
        return None
    F = G.T @ G / G.shape[0]
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(F))) or np.linalg.cond(A) > _COND_LIMIT:
        return None
    if np.min(np.abs(np.linalg.eigvalsh(0.5 * (A + A.T)))) <= _EIG_FLOOR:
        return None
    Ai = np.linalg.inv(A)
    V = Ai @ F @ Ai
    return 0.5 * (V + V.T)


# ---------------------------------------------------------------------------
# variances of the divergence estimates


def _h_variance_population(dual, theta, theta_true):
    m = dual.model
    t, tt = m.param(theta), m.param(theta_true)
    if np.array_equal(t, tt):
        return 0.0
    # h = const - g, so its variance is that of g
    g1 = m.integrate(tt, lambda x: dual.g_values(t, tt, x))
    g2 = m.integrate(tt, lambda x: dual.g_values(t, tt, x) ** 2)
    return max(g2 - g1 * g1, 0.0)


def sigma2_simple(dual: DualObjective, theta, theta_true=None, sample=None) -> float:
    """Variance of the ``sqrt(n)`` limit of ``D_hat(theta)`` under an alternative.

    With ``theta_true`` the population value is integrated; with ``sample``
    the plug-in uses ``alpha_hat(theta)`` and sample moments of ``h``.
    """
    if (theta_true is None) == (sample is None):
        raise ValueError("give exactly one of theta_true and sample")
    if theta_true is not None:
        return _h_variance_population(dual, theta, theta_true)
    est = dual_estimate(dual, theta, sample, covariance=False)
    h = dual.h_values(theta, est.estimate, sample)
    return float(np.var(h))


def sigma2_composite(dual: DualObjective, constraint: ConstraintSpec, beta_star,
                     theta_true=None, sample=None) -> float:
    return sigma2_simple(dual, constraint.embed(beta_star), theta_true=theta_true, sample=sample)


def population_sandwich(dual: DualObjective, theta, theta_true) -> np.ndarray:
    """``S^-1 M S^-1`` integrated under ``P_{theta_T}`` at ``alpha = theta_T``.

    ``S`` is assembled as the Hessian of the moment term minus the
    integral of pointwise second differences of ``g``, which avoids
    differencing a quadrature result.
    """
    m = dual.model
    t, tt = m.param(theta), m.param(theta_true)
    d = m.dim
    hstep = np.finfo(float).eps ** 0.25 * np.maximum(1.0, np.abs(tt))
    Hm = fd_hessian(lambda a: dual.moment_term(t, a), tt, m.box)

    def g_at(a, x):
        return dual.g_values(t, a, x)

    def g_second(x, i, j):
        ei = np.zeros(d)
        ei[i] = hstep[i]
        if i == j:
            return (g_at(tt + ei, x) - 2 * g_at(tt, x) + g_at(tt - ei, x)) / hstep[i] ** 2
        ej = np.zeros(d)
        ej[j] = hstep[j]
        return (g_at(tt + ei + ej, x) - g_at(tt + ei - ej, x) - g_at(tt - ei + ej, x)
                + g_at(tt - ei - ej, x)) / (4 * hstep[i] * hstep[j])

    S = np.empty((d, d))
    M = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            S[i, j] = S[j, i] = -(Hm[i, j] - m.integrate(tt, lambda x, i=i, j=j: g_second(x, i, j)))
            M[i, j] = M[j, i] = m.integrate(
                tt, lambda x, i=i, j=j: _grad_entry(dual.h_gradient_alpha(t, tt, x), i, j))
    Si = np.linalg.inv(S)
    return Si @ M @ Si


def _grad_entry(G, i, j):
    return G[..., i] * G[..., j]
