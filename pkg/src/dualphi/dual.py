"""Dual objective ``h(theta, alpha, x) = P_theta f(theta, alpha) - g(theta, alpha, x)``.

With ``r = p_theta / p_alpha``:

* ``f = phi'(r)``
* ``g = r phi'(r) - phi(r)``
* the moment term ``P_theta f`` is a population integral, computed in
  closed form for the built-in location/rate families and by adaptive
  quadrature otherwise.

For a signed mixture the density ``p_alpha`` may change sign on the
support, so ``P_theta f`` has poles.  Two policies decide which ``alpha``
are admissible:

``"strict"``
    ``alpha`` is feasible only if ``p_alpha > 0`` across the truncated
    support; otherwise the moment term is non-integrable.
``"principal_value"``
    simple zeros of ``p_alpha`` are integrated as Cauchy principal values
    (the pole is folded onto itself and cancels).  Sample points sitting
    near a zero still drive the objective to ``-inf`` through ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .divergence import DivergenceSpec
from .model import ParametricModel
from .numerics.quadrature import NonIntegrableError, gauss_kronrod

STRICT = "strict"
PRINCIPAL_VALUE = "principal_value"
_POLICIES = (STRICT, PRINCIPAL_VALUE)
_ROOT_GRID = 2001
_CACHE_LIMIT = 200_000


class SingularRatioError(ArithmeticError):
    """``p_alpha`` vanishes at an observation (signed regime)."""


def _key(v: np.ndarray):
    return tuple(float(f"{x:.12g}") for x in v)


@dataclass
class MomentProbe:
    """Diagnostics of one signed moment evaluation."""

    roots: tuple
    strict_feasible: bool


class DualObjective:
    """Kernels, moment term and objectives for one (model, divergence) pair.

    Parameters
    ----------
    model : ParametricModel
    spec : DivergenceSpec
    theta_e : {"strict", "principal_value"}
        Admissibility policy for signed mixtures; ignored for probability
        models.
    rtol : float
        Relative tolerance of moment quadratures.
    """

    def __init__(self, model: ParametricModel, spec: DivergenceSpec,
                 theta_e: str = PRINCIPAL_VALUE, rtol: float = 1e-9, cache: bool = True):
        if theta_e not in _POLICIES:
            raise ValueError(f"theta_e must be one of {_POLICIES}")
        self.model = model
        self.spec = spec
        self.theta_e = theta_e
        self.rtol = rtol
        self.use_cache = cache
        self._cache = {}

    @property
    def signed(self) -> bool:
        return bool(self.model.signed)

    @property
    def phi2(self) -> float:
        return self.spec.phi2_at_one

    def clear_cache(self):
        self._cache.clear()

    # -- pointwise kernels -----------------------------------------------

    def _ratio_fg(self, theta, alpha, x):
        m = self.model
        if not self.signed:
            lr = m.log_ratio(theta, alpha, x)
            return self.spec.dphi_from_log(lr), self.spec.conj_deriv_from_log(lr)
        pa = m.density(alpha, x)
        pt = m.density(theta, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(pa != 0, pt / np.where(pa != 0, pa, 1.0), np.nan)
        f = np.where(np.isnan(r), np.nan, self.spec.dphi(np.nan_to_num(r)))
        g = np.where(np.isnan(r), np.nan, self.spec.conj_deriv(np.nan_to_num(r)))
        return f, g

    def kernels(self, theta, alpha, x):
        """``(f, g, -g)`` at the observations ``x``.

        ``nan`` marks observations where ``p_alpha`` vanishes in the signed
        regime; ``+inf`` marks ratios outside the domain of ``phi``.
        """
        t, a = self.model.param(theta), self.model.param(alpha)
        if np.array_equal(t, a):
            z = np.zeros(np.shape(self.model.log_density(t, x)) if not self.signed
                         else np.shape(self.model.density(t, x)))
            return z, z.copy(), z.copy()
        f, g = self._ratio_fg(t, a, x)
        return f, g, -g

    def g_values(self, theta, alpha, x):
        return self.kernels(theta, alpha, x)[1]

    # -- moment term -----------------------------------------------------

    def moment_term(self, theta, alpha) -> float:
        """``P_theta phi'(p_theta / p_alpha)``.

        Raises
        ------
        NonIntegrableError
            ``alpha`` lies outside the admissible set.
        """
        t, a = self.model.param(theta), self.model.param(alpha)
        if np.array_equal(t, a):
            return 0.0
        closed = self._closed_moment(t, a)
        if closed is not None:
            if not math.isfinite(closed):
                raise NonIntegrableError("moment term diverges")
            return closed
        if not self.use_cache:
            return self._quad_moment(t, a)
        key = (_key(t), _key(a))
        hit = self._cache.get(key)
        if hit is None:
            try:
                hit = self._quad_moment(t, a)
            except NonIntegrableError:
                hit = NonIntegrableError
            if len(self._cache) > _CACHE_LIMIT:
                self._cache.clear()
            self._cache[key] = hit
        if hit is NonIntegrableError:
            raise NonIntegrableError("moment term diverges")
        return hit

    def _closed_moment(self, t, a):
        spec, m = self.spec, self.model
        if not spec.is_power or self.signed:
            return None
        g = spec.gamma
        if g == 0:
            # P_theta (1 - p_alpha/p_theta) = 1 - 1
            return 0.0
        if g == 1:
            v = m.mean_log_ratio(t, a)
            return None if v is None else float(v)
        lm = m.log_power_moment(t, a, g - 1.0)
        if lm is None:
            return None
        if lm == math.inf:
            return math.inf
        return math.expm1(lm) / (g - 1.0)

    def _quad_moment(self, t, a):
        m = self.model
        if not self.signed:
            spec = self.spec
            return m.integrate(t, lambda x: spec.dphi_from_log(m.log_ratio(t, a, x)),
                               rtol=self.rtol)
        return self._signed_moment(t, a)[0]

    def _signed_pieces(self, t, a):
        m = self.model
        lo, hi = m.integration_domain(t)
        grid = np.linspace(lo, hi, _ROOT_GRID)
        pa = m.density(a, grid)
        roots = []
        for i in np.nonzero(np.sign(pa[:-1]) * np.sign(pa[1:]) <= 0)[0]:
            if pa[i] == 0:
                roots.append(float(grid[i]))
            elif pa[i + 1] != 0:
                roots.append(brentq(lambda z: float(m.density(a, np.array([z]))[0]),
                                    grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
        roots = sorted(set(roots))
        return lo, hi, roots

    def _signed_moment(self, t, a):
        m, spec = self.model, self.spec
        lo, hi, roots = self._signed_pieces(t, a)
        probe = MomentProbe(tuple(roots), not roots)

        def integrand(x):
            pt = m.density(t, x)
            pa = m.density(a, x)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = pt / pa
            return spec.dphi(r) * pt

        if not roots:
            return gauss_kronrod(integrand, lo, hi, rtol=self.rtol), probe
        if self.theta_e == STRICT:
            raise NonIntegrableError("signed density changes sign on the support")
        # fold each simple pole symmetrically: PV int = int_0^d [F(x0+u) + F(x0-u)] du
        marks = [lo] + roots + [hi]
        total = 0.0
        cursor = lo
        for j, x0 in enumerate(roots):
            d = min(0.5 * min(x0 - marks[j], marks[j + 2] - x0), 1.0)
            if d <= 0:
                raise NonIntegrableError("zero of the signed density on the support edge")

            def folded(u, x0=x0):
                return integrand(x0 + u) + integrand(x0 - u)

            total += gauss_kronrod(integrand, cursor, x0 - d, rtol=self.rtol, atol=1e-15)
            total += gauss_kronrod(folded, 0.0, d, rtol=self.rtol, atol=1e-15)
            cursor = x0 + d
        total += gauss_kronrod(integrand, cursor, hi, rtol=self.rtol, atol=1e-15)
        return total, probe

    def probe(self, theta, alpha) -> MomentProbe:
        """Zeros of ``p_alpha`` on the truncated support of ``P_theta``."""
        t, a = self.model.param(theta), self.model.param(alpha)
        if not self.signed:
            return MomentProbe((), True)
        _, _, roots = self._signed_pieces(t, a)
        return MomentProbe(tuple(roots), not roots)

    # -- objectives -----------------------------------------------------

    def h_values(self, theta, alpha, x):
        """``h(theta, alpha, x_i)``; raises on a non-integrable moment term."""
        return self.moment_term(theta, alpha) - self.g_values(theta, alpha, x)

    def empirical_objective(self, theta, alpha, sample) -> float:
        """``P_theta f - P_n g``; ``-inf`` where ``alpha`` is inadmissible."""
        try:
            mom = self.moment_term(theta, alpha)
        except NonIntegrableError:
            return -math.inf
        g = self.g_values(theta, alpha, sample)
        if np.any(np.isnan(g)):
            return -math.inf
        val = mom - float(np.mean(g))
        return val if not math.isnan(val) else -math.inf

    def population_objective(self, theta, alpha, theta_true) -> float:
        """``P_theta f - P_{theta_T} g`` by quadrature under ``theta_T``."""
        try:
            mom = self.moment_term(theta, alpha)
        except NonIntegrableError:
            return -math.inf
        t, a = self.model.param(theta), self.model.param(alpha)
        if np.array_equal(t, a):
            return 0.0
        try:
            pg = self.model.integrate(theta_true, lambda x: self.g_values(t, a, x), rtol=self.rtol)
        except NonIntegrableError:
            return -math.inf
        return mom - pg

    def divergence(self, theta, theta_true) -> float:
        """``int phi(p_theta / p_{theta_T}) dP_{theta_T}`` by direct quadrature."""
        m, spec = self.model, self.spec
        t = m.param(theta)
        if self.signed:
            return m.integrate(theta_true, lambda x: spec.phi(m.density(t, x) / m.density(theta_true, x)),
                               rtol=self.rtol)
        return m.integrate(theta_true,
                           lambda x: spec.phi_from_log(m.log_ratio(t, theta_true, x)), rtol=self.rtol)

    # -- derivatives in alpha (finite differences) -----------------------

    def h_gradient_alpha(self, theta, alpha, x, step=None):
        """Per-observation ``d h / d alpha`` as an ``(n, d)`` array."""
        return _fd_jacobian(lambda a: self.h_values(theta, a, x), self.model.param(alpha),
                            self.model.box, step)


def _fd_jacobian(fn, z, box, step=None):
    step = np.finfo(float).eps ** (1.0 / 3.0) if step is None else step
    cols = []
    lo, hi = box
    for i in range(z.size):
        h = step * max(1.0, abs(z[i]))
        up, dn = z.copy(), z.copy()
        up[i] = min(z[i] + h, hi[i])
        dn[i] = max(z[i] - h, lo[i])
        cols.append((np.asarray(fn(up)) - np.asarray(fn(dn))) / (up[i] - dn[i]))
    return np.stack(cols, axis=-1)


def fd_hessian(fn, z, box, step=None):
    """Central second differences of a scalar function (step ``eps^(1/4)``)."""
    step = np.finfo(float).eps ** 0.25 if step is None else step
    z = np.asarray(z, dtype=float)
    lo, hi = box
    d = z.size
    h = step * np.maximum(1.0, np.abs(z))
    # keep the stencil inside the box by shifting its centre if needed
    c = np.clip(z, lo + h, hi - h) if np.all(hi - lo > 2 * h) else z
    f0 = fn(c)
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (fn(c + ei) - 2 * f0 + fn(c - ei)) / (h[i] * h[i])
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            v = (fn(c + ei + ej) - fn(c + ei - ej) - fn(c - ei + ej) + fn(c - ei - ej)) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H


def kernels(dual: DualObjective, theta, alpha, x):
    return dual.kernels(theta, alpha, x)


def moment_term(dual: DualObjective, theta, alpha) -> float:
    return dual.moment_term(theta, alpha)


def empirical_objective(dual: DualObjective, theta, alpha, sample) -> float:
    return dual.empirical_objective(theta, alpha, sample)


def population_objective(dual: DualObjective, theta, alpha, theta_true) -> float:
    return dual.population_objective(theta, alpha, theta_true)
