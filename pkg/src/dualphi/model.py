"""Parametric families with densities, samplers and integration helpers.

Every model exposes ``log_density``/``density`` vectorised over observations,
a seeded sampler, quantiles for support truncation and an ``integrate``
method computing ``int u dP_theta``.  Parameters are always 1-d float
arrays of length ``dim``; scalars are accepted and promoted.

Built-ins
---------
``GaussianMean``        unit-variance normal location family.
``Exponential``         rate family ``theta exp(-theta x)`` on ``[0, inf)``.
``GaussianMeanVector``  ``d`` independent unit-variance coordinates.
``Binomial``            fixed number of trials, success probability.
``MixtureModel``        finite mixtures, optionally with signed weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special as sp

from .numerics.quadrature import NonIntegrableError, gauss_kronrod

TAIL = 1e-10
_TAIL_SLABS = 40
INTEGRATION_RTOL = 1e-9
INTEGRATION_ATOL = 1e-13
FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ModelConfigError(ValueError):
    pass


def _vec(theta, dim):
    t = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    if t.size != dim:
        raise ValueError(f"parameter has length {t.size}, model dimension is {dim}")
    return t


class ParametricModel:
    """Base class; subclasses fill in the density and the sampler.

    Attributes
    ----------
    dim : int
        Parameter dimension ``d``.
    box : tuple of arrays
        ``(lo, hi)`` parameter bounds, possibly infinite.
    support : tuple of float
        Observation interval shared by all parameter values.
    discrete : bool
        Counting measure on the integers of ``support`` instead of Lebesgue.
    signed : bool
        Densities may be negative (signed-measure extension).
    obs_dim : int
        Length of one observation (1 for scalar data).
    """

    name = "model"
    discrete = False
    signed = False
    obs_dim = 1

    def __init__(self, dim: int, box, support=(-math.inf, math.inf)):
        self.dim = int(dim)
        lo, hi = (np.asarray(b, dtype=float).reshape(self.dim) for b in box)
        if np.any(lo >= hi):
            raise ModelConfigError("parameter box must have lo < hi")
        self.box = (lo, hi)
        self.support = (float(support[0]), float(support[1]))

    # -- parameters ------------------------------------------------------

    def param(self, theta) -> np.ndarray:
        return _vec(theta, self.dim)

    def box_pairs(self):
        return list(zip(self.box[0], self.box[1]))

    def contains(self, theta) -> bool:
        t = self.param(theta)
        return bool(np.all(t >= self.box[0]) and np.all(t <= self.box[1]))

    def box_center(self) -> np.ndarray:
        lo, hi = self.box
        c = np.zeros(self.dim)
        for i, (a, b) in enumerate(zip(lo, hi)):
            if math.isfinite(a) and math.isfinite(b):
                c[i] = 0.5 * (a + b)
            elif math.isfinite(a):
                c[i] = max(a, 0.0) + 1.0
            elif math.isfinite(b):
                c[i] = min(b, 0.0) - 1.0
        return c

    # -- densities -------------------------------------------------------

    def log_density(self, theta, x):
        raise NotImplementedError

    def density(self, theta, x):
        return np.exp(self.log_density(theta, x))

    def log_ratio(self, theta, alpha, x):
        """``log p_theta(x) - log p_alpha(x)``."""
        return self.log_density(theta, x) - self.log_density(alpha, x)

    def score(self, theta, x):
        """``d/dtheta log p_theta(x)`` as an ``(n, d)`` array (central differences)."""
        t = self.param(theta)
        x = np.asarray(x, dtype=float)
        cols = []
        for i in range(self.dim):
            h = FD_STEP * max(1.0, abs(t[i]))
            lo, hi = self.box[0][i], self.box[1][i]
            up, dn = t.copy(), t.copy()
            up[i] = min(t[i] + h, hi)
            dn[i] = max(t[i] - h, lo)
            cols.append((self.log_density(up, x) - self.log_density(dn, x)) / (up[i] - dn[i]))
        return np.stack(cols, axis=-1)

    # -- sampling --------------------------------------------------------

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        """``n`` draws from ``P_theta``; bit-reproducible for a given seed."""
        if n < 1:
            raise ValueError("n must be positive")
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        return self._draw(self.param(theta), int(n), rng)

    def _draw(self, theta, n, rng):
        raise NotImplementedError

    # -- distribution helpers -------------------------------------------

    def quantile(self, theta, p):
        raise NotImplementedError

    def cdf(self, theta, x):
        """Distribution function by quadrature of the density."""
        t = self.param(theta)
        lo = self.quantile(t, TAIL) if not math.isfinite(self.support[0]) else self.support[0]
        out = []
        for v in np.atleast_1d(x):
            if v <= lo:
                out.append(0.0)
                continue
            out.append(gauss_kronrod(lambda z: self.density(t, z), lo, float(v),
                                     rtol=1e-10, atol=1e-14))
        return np.clip(np.array(out), 0.0, 1.0)

    def integration_domain(self, theta):
        """Truncated support ``[q(1e-10), q(1 - 1e-10)]``; finite support ends are kept."""
        t = self.param(theta)
        a, b = self.support
        lo = a if math.isfinite(a) else float(self.quantile(t, TAIL))
        hi = b if math.isfinite(b) else float(self.quantile(t, 1.0 - TAIL))
        return lo, hi

    def integrate(self, theta, u: Callable, rtol: float = INTEGRATION_RTOL,
                  atol: float = INTEGRATION_ATOL) -> float:
        """``int u(x) p_theta(x) dx`` over the truncated support.

        Raises
        ------
        NonIntegrableError
            The integrand is infinite on a node or refinement fails.
        """
        t = self.param(theta)
        lo, hi = self.integration_domain(t)
        total = gauss_kronrod(lambda x: u(x) * self.density(t, x), lo, hi, rtol=rtol, atol=atol)
        # The truncation is set by p_theta alone; integrands that grow in the
        # tails (density ratios) can carry mass beyond it, so slabs are added
        # outward until they stop contributing.
        a, b = self.support
        width = hi - lo
        for side, edge in ((-1.0, lo), (1.0, hi)):
            if math.isfinite(a if side < 0 else b):
                continue
            w = width
            for _ in range(_TAIL_SLABS):
                nxt = edge + side * w
                part = gauss_kronrod(lambda x: _tail_product(u, self.density(t, x), x),
                                     min(edge, nxt), max(edge, nxt), rtol=rtol, atol=atol,
                                     initial_intervals=2)
                total += part
                edge = nxt
                if abs(part) <= max(atol, rtol * abs(total)):
                    break
                w *= 1.5
            else:
                raise NonIntegrableError("tail contributions do not decay")
        return total

    def fisher_information(self, theta) -> np.ndarray:
        t = self.param(theta)
        d = self.dim
        out = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                v = self.integrate(t, lambda x, i=i, j=j: _outer_entry(self.score(t, x), i, j))
                out[i, j] = out[j, i] = v
        return out

    # -- optional closed forms used by the dual objective -----------------

    def log_power_moment(self, theta, alpha, a: float) -> Optional[float]:
        """``log E_theta[(p_theta/p_alpha)^a]`` in closed form, or ``None``.

        ``+inf`` signals a divergent expectation.
        """
        return None

    def mean_log_ratio(self, theta, alpha) -> Optional[float]:
        """``E_theta log(p_theta/p_alpha)`` in closed form, or ``None``."""
        return None

    def pilot(self, sample) -> np.ndarray:
        """Moment-based starting value inside the box."""
        return self.box_center()

    def clip(self, theta):
        return np.clip(self.param(theta), self.box[0], self.box[1])


def _tail_product(u, dens, x):
    # where the density has underflowed the product is zero whatever u is
    pos = dens != 0
    if np.all(pos):
        return u(x) * dens
    out = np.zeros(np.shape(dens))
    if np.any(pos):
        xs = np.asarray(x)[pos]
        out[pos] = u(xs) * dens[pos]
    return out


def _outer_entry(s, i, j):
    return s[..., i] * s[..., j]


class GaussianMean(ParametricModel):
    """``N(theta, 1)``; Fisher information 1."""

    name = "gaussian_mean"

    def __init__(self, box=(-math.inf, math.inf)):
        super().__init__(1, ([box[0]], [box[1]]))

    def log_density(self, theta, x):
        m = self.param(theta)[0]
        z = np.asarray(x, dtype=float) - m
        return -0.5 * z * z - _LOG_SQRT_2PI

    def log_ratio(self, theta, alpha, x):
        t, a = self.param(theta)[0], self.param(alpha)[0]
        return (t - a) * (np.asarray(x, dtype=float) - 0.5 * (t + a))

    def score(self, theta, x):
        return (np.asarray(x, dtype=float) - self.param(theta)[0])[..., None]

    def _draw(self, theta, n, rng):
        return theta[0] + rng.standard_normal(n)

    def quantile(self, theta, p):
        return self.param(theta)[0] + sp.ndtri(p)

    def cdf(self, theta, x):
        return sp.ndtr(np.asarray(x, dtype=float) - self.param(theta)[0])

    def fisher_information(self, theta):
        return np.eye(1)

    def log_power_moment(self, theta, alpha, a):
        delta = self.param(theta)[0] - self.param(alpha)[0]
        return 0.5 * a * (a + 1.0) * delta * delta

    def mean_log_ratio(self, theta, alpha):
        delta = self.param(theta)[0] - self.param(alpha)[0]
        return 0.5 * delta * delta

    def pilot(self, sample):
        return self.clip(np.mean(sample))


class Exponential(ParametricModel):
    """Rate family ``theta exp(-theta x)``; Fisher information ``1/theta^2``."""

    name = "exponential"

    def __init__(self, rate_box=(1e-6, 1e6)):
        if not (rate_box[0] > 0 and rate_box[1] > rate_box[0]):
            raise ModelConfigError("exponential rate box must lie in (0, inf)")
        super().__init__(1, ([rate_box[0]], [rate_box[1]]), support=(0.0, math.inf))

    def log_density(self, theta, x):
        t = self.param(theta)[0]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x >= 0, math.log(t) - t * x, -math.inf)

    def log_ratio(self, theta, alpha, x):
        t, a = self.param(theta)[0], self.param(alpha)[0]
        return math.log(t / a) - (t - a) * np.asarray(x, dtype=float)

    def score(self, theta, x):
        t = self.param(theta)[0]
        return (1.0 / t - np.asarray(x, dtype=float))[..., None]

    def _draw(self, theta, n, rng):
        return rng.standard_exponential(n) / theta[0]

    def quantile(self, theta, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.param(theta)[0]

    def cdf(self, theta, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.param(theta)[0] * np.maximum(x, 0)), 0.0)

    def fisher_information(self, theta):
        t = self.param(theta)[0]
        return np.array([[1.0 / (t * t)]])

    def log_power_moment(self, theta, alpha, a):
        t, al = self.param(theta)[0], self.param(alpha)[0]
        # E_t[(t/al)^a exp(-a (t - al) X)] = (t/al)^a t / (t + a (t - al))
        rel = a * (t - al) / t
        if rel <= -1.0:
            return math.inf
        return a * math.log(t / al) - math.log1p(rel)

    def mean_log_ratio(self, theta, alpha):
        t, al = self.param(theta)[0], self.param(alpha)[0]
        return math.log(t / al) - 1.0 + al / t

    def pilot(self, sample):
        return self.clip(1.0 / np.mean(sample))


class GaussianMeanVector(ParametricModel):
    """``N(theta, I_d)``; observations are rows of an ``(n, d)`` array."""

    name = "gaussian_mean_vector"

    def __init__(self, dim: int = 2, box=None):
        if dim < 1:
            raise ModelConfigError("dimension must be positive")
        if box is None:
            box = ([-math.inf] * dim, [math.inf] * dim)
        super().__init__(dim, box)
        self.obs_dim = dim

    def _obs(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(-1, self.dim) if x.ndim == 1 else x

    def log_density(self, theta, x):
        z = self._obs(x) - self.param(theta)
        return -0.5 * np.sum(z * z, axis=-1) - self.dim * _LOG_SQRT_2PI

    def log_ratio(self, theta, alpha, x):
        t, a = self.param(theta), self.param(alpha)
        return (self._obs(x) - 0.5 * (t + a)) @ (t - a)

    def score(self, theta, x):
        return self._obs(x) - self.param(theta)

    def _draw(self, theta, n, rng):
        return theta + rng.standard_normal((n, self.dim))

    def quantile(self, theta, p):
        return self.param(theta) + sp.ndtri(p)

    def cdf(self, theta, x):
        return np.prod(sp.ndtr(self._obs(x) - self.param(theta)), axis=-1)

    def integrate(self, theta, u, rtol=INTEGRATION_RTOL, atol=INTEGRATION_ATOL):
        """Tensor Gauss-Hermite rule, accepted when doubling the order agrees."""
        t = self.param(theta)
        prev = None
        m = 16
        while m ** self.dim <= 2_000_000:
            z, w = np.polynomial.hermite_e.hermegauss(m)
            w = w / math.sqrt(2.0 * math.pi)
            grids = np.meshgrid(*([z] * self.dim), indexing="ij")
            nodes = np.stack([g.ravel() for g in grids], axis=-1) + t
            weights = np.ones(1)
            for _ in range(self.dim):
                weights = np.multiply.outer(weights, w).ravel()
            with np.errstate(all="ignore"):
                vals = np.asarray(u(nodes), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise NonIntegrableError("integrand is not finite on a quadrature node")
            cur = float(weights @ vals)
            if prev is not None and abs(cur - prev) <= max(atol, rtol * abs(cur)):
                return cur
            prev = cur
            m *= 2
        raise NonIntegrableError("Gauss-Hermite rule did not settle")

    def fisher_information(self, theta):
        return np.eye(self.dim)

    def log_power_moment(self, theta, alpha, a):
        delta = self.param(theta) - self.param(alpha)
        return 0.5 * a * (a + 1.0) * float(delta @ delta)

    def mean_log_ratio(self, theta, alpha):
        delta = self.param(theta) - self.param(alpha)
        return 0.5 * float(delta @ delta)

    def pilot(self, sample):
        return self.clip(np.mean(self._obs(sample), axis=0))


class Binomial(ParametricModel):
    """``Binomial(trials, theta)``: counting measure on ``{0, ..., trials}``."""

    name = "binomial"
    discrete = True

    def __init__(self, trials: int, box=(1e-9, 1 - 1e-9)):
        if trials < 1:
            raise ModelConfigError("trials must be positive")
        if not (0 < box[0] < box[1] < 1):
            raise ModelConfigError("binomial box must lie inside (0, 1)")
        self.trials = int(trials)
        super().__init__(1, ([box[0]], [box[1]]), support=(0.0, float(trials)))
        k = np.arange(self.trials + 1)
        self._log_choose = sp.gammaln(self.trials + 1) - sp.gammaln(k + 1) - sp.gammaln(self.trials - k + 1)

    def log_density(self, theta, x):
        p = self.param(theta)[0]
        k = np.asarray(x, dtype=float)
        ok = (k >= 0) & (k <= self.trials) & (k == np.round(k))
        ki = np.where(ok, k, 0).astype(int)
        val = self._log_choose[ki] + k * math.log(p) + (self.trials - k) * math.log1p(-p)
        return np.where(ok, val, -math.inf)

    def score(self, theta, x):
        p = self.param(theta)[0]
        k = np.asarray(x, dtype=float)
        return (k / p - (self.trials - k) / (1.0 - p))[..., None]

    def _draw(self, theta, n, rng):
        return rng.binomial(self.trials, theta[0], size=n).astype(float)

    def quantile(self, theta, p):
        from scipy.stats import binom
        return binom.ppf(p, self.trials, self.param(theta)[0])

    def cdf(self, theta, x):
        from scipy.stats import binom
        return binom.cdf(x, self.trials, self.param(theta)[0])

    def integrate(self, theta, u, rtol=INTEGRATION_RTOL, atol=INTEGRATION_ATOL):
        k = np.arange(self.trials + 1, dtype=float)
        with np.errstate(all="ignore"):
            vals = np.asarray(u(k), dtype=float) * self.density(theta, k)
        if not np.all(np.isfinite(vals)):
            raise NonIntegrableError("summand is not finite")
        return float(np.sum(vals))

    def fisher_information(self, theta):
        p = self.param(theta)[0]
        return np.array([[self.trials / (p * (1.0 - p))]])

    def pilot(self, sample):
        return self.clip(np.mean(sample) / self.trials)


# ---------------------------------------------------------------------------
# mixtures


@dataclass(frozen=True)
class Component:
    """A mixture component: a base model, its parameter, and whether it is free."""

    model: ParametricModel
    params: np.ndarray
    free: bool = False

    @property
    def n_free(self) -> int:
        return self.model.dim if self.free else 0


class MixtureModel(ParametricModel):
    """Finite mixture ``sum_i w_i P_i``.

    The parameter vector holds the first ``k - 1`` weights (the last is
    ``1 - sum``) followed by the free parameters of each component, so
    ``d = k - 1 + d_1 + ... + d_k``.

    With ``signed=True`` the weight box may leave ``[0, 1]``; the density is
    then a signed function with total mass one and ``log_density`` is no
    longer meaningful, so the dual objective divides densities directly.
    """

    name = "mixture"

    def __init__(self, components: Sequence[Component], weight_box=None,
                 param_box=None, signed: bool = False):
        comps = [Component(c.model, np.asarray(c.params, dtype=float).reshape(c.model.dim), c.free)
                 for c in components]
        if len(comps) < 2:
            raise ModelConfigError("a mixture needs at least two components")
        supports = {c.model.support for c in comps}
        if len(supports) != 1:
            raise ModelConfigError("components must share their support")
        if any(c.model.obs_dim != 1 or c.model.discrete for c in comps):
            raise ModelConfigError("mixture components must be scalar continuous models")
        self.components = comps
        self.k = len(comps)
        self.signed = bool(signed)
        if weight_box is None:
            weight_box = (-0.5, 1.5) if signed else (0.0, 1.0)
        if not signed and (weight_box[0] < 0 or weight_box[1] > 1):
            raise ModelConfigError("probability mixtures need weights inside [0, 1]")
        lo = [weight_box[0]] * (self.k - 1)
        hi = [weight_box[1]] * (self.k - 1)
        for c in comps:
            if c.free:
                clo, chi = c.model.box if param_box is None else param_box
                lo.extend(np.broadcast_to(clo, (c.model.dim,)))
                hi.extend(np.broadcast_to(chi, (c.model.dim,)))
        super().__init__(len(lo), (lo, hi), support=next(iter(supports)))

    # -- parameter bookkeeping ---------------------------------------------

    def weights(self, theta) -> np.ndarray:
        t = self.param(theta)
        w = t[: self.k - 1]
        return np.append(w, 1.0 - np.sum(w))

    def component_params(self, theta):
        t = self.param(theta)
        pos = self.k - 1
        out = []
        for c in self.components:
            if c.free:
                out.append(t[pos: pos + c.model.dim])
                pos += c.model.dim
            else:
                out.append(c.params)
        return out

    def pack(self, weights, params=None) -> np.ndarray:
        """Inverse of ``weights``/``component_params``."""
        w = np.asarray(weights, dtype=float)
        parts = [w[: self.k - 1]]
        for i, c in enumerate(self.components):
            if c.free:
                parts.append(np.asarray(params[i] if params is not None else c.params,
                                        dtype=float).reshape(c.model.dim))
        return np.concatenate(parts)

    def is_probability(self, theta) -> bool:
        w = self.weights(theta)
        return bool(np.all(w >= 0) and np.all(w <= 1))

    # -- densities ---------------------------------------------------------

    def component_densities(self, theta, x):
        x = np.asarray(x, dtype=float)
        return [c.model.density(p, x) for c, p in zip(self.components, self.component_params(theta))]

    def density(self, theta, x):
        w = self.weights(theta)
        dens = self.component_densities(theta, x)
        return sum(wi * di for wi, di in zip(w, dens))

    def log_density(self, theta, x):
        w = self.weights(theta)
        x = np.asarray(x, dtype=float)
        if np.any(w < 0):
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.log(self.density(theta, x))
        logs = [c.model.log_density(p, x) for c, p in zip(self.components, self.component_params(theta))]
        with np.errstate(divide="ignore"):
            lw = np.log(w)
        return sp.logsumexp(np.stack([l + a for l, a in zip(logs, lw)]), axis=0)

    def log_ratio(self, theta, alpha, x):
        return self.log_density(theta, x) - self.log_density(alpha, x)

    def score(self, theta, x):
        """Analytic in the weights, chain rule through component scores."""
        x = np.asarray(x, dtype=float)
        w = self.weights(theta)
        dens = self.component_densities(theta, x)
        total = sum(wi * di for wi, di in zip(w, dens))
        cols = [(dens[i] - dens[-1]) / total for i in range(self.k - 1)]
        for wi, di, c, p in zip(w, dens, self.components, self.component_params(theta)):
            if c.free:
                s = c.model.score(p, x)
                cols.extend(wi * di * s[..., j] / total for j in range(c.model.dim))
        return np.stack(cols, axis=-1)

    def _draw(self, theta, n, rng):
        w = self.weights(theta)
        if np.any(w < 0):
            raise ValueError("cannot sample from a signed mixture")
        u = rng.random(n)
        idx = np.searchsorted(np.cumsum(w)[:-1], u, side="right")
        out = np.empty(n)
        for i, (c, p) in enumerate(zip(self.components, self.component_params(theta))):
            m = idx == i
            cnt = int(m.sum())
            if cnt:
                out[m] = c.model._draw(p, cnt, rng)
        return out

    def cdf(self, theta, x):
        w = self.weights(theta)
        return sum(wi * c.model.cdf(p, x) for wi, c, p in
                   zip(w, self.components, self.component_params(theta)))

    def quantile(self, theta, p):
        """Quantile of a probability mixture by bracketing on the CDF."""
        from scipy.optimize import brentq
        ps = np.atleast_1d(np.asarray(p, dtype=float))
        cps = self.component_params(theta)
        out = []
        for pv in ps:
            qs = [float(c.model.quantile(cp, pv)) for c, cp in zip(self.components, cps)]
            lo, hi = min(qs), max(qs)
            def gap(z):
                return float(self.cdf(theta, np.array([z]))[0]) - pv

            if gap(lo) >= 0:
                out.append(lo)
            elif gap(hi) <= 0:
                out.append(hi)
            else:
                out.append(brentq(gap, lo, hi, xtol=1e-12))
        return out[0] if np.ndim(p) == 0 else np.array(out)

    def integration_domain(self, theta):
        t = self.param(theta)
        if self.is_probability(t):
            return super().integration_domain(t)
        # signed measures: union of the component ranges
        lo, hi = [], []
        for c, p in zip(self.components, self.component_params(t)):
            a, b = c.model.integration_domain(p)
            lo.append(a)
            hi.append(b)
        return min(lo), max(hi)

    def fisher_information(self, theta):
        t = self.param(theta)
        if not self.is_probability(t):
            raise ValueError("Fisher information needs a probability mixture")
        return super().fisher_information(t)

    def pilot(self, sample):
        """Equal weights and the configured component parameters."""
        w = np.full(self.k, 1.0 / self.k)
        return self.clip(self.pack(w, [c.params for c in self.components]))


class TwoMixture(MixtureModel):
    """``(1 - theta) p_0 + theta p_1`` with known components.

    The scalar parameter is the weight of ``p_1`` so that ``theta = 0`` is the
    one-component null.  ``signed=True`` lets ``theta`` leave ``[0, 1]``.
    """

    name = "two_mixture"

    def __init__(self, p0: Component, p1: Component, weight_box=None, signed: bool = False):
        super().__init__([p1, p0], weight_box=weight_box, signed=signed)

    def pilot(self, sample):
        mu0 = float(self.components[1].model.integrate(self.components[1].params, lambda x: x))
        mu1 = float(self.components[0].model.integrate(self.components[0].params, lambda x: x))
        if mu1 == mu0:
            return self.clip(0.5 * (self.box[0] + self.box[1]))
        return self.clip((np.mean(sample) - mu0) / (mu1 - mu0))


def normal_component(mean: float = 0.0, free: bool = False) -> Component:
    return Component(GaussianMean(), np.array([mean]), free)


def exponential_component(rate: float = 1.0, free: bool = False) -> Component:
    return Component(Exponential(), np.array([rate]), free)


def two_normal_mixture(mean0: float = 0.0, mean1: float = 0.5, signed: bool = False,
                       weight_box=None) -> TwoMixture:
    """The unit-variance pair used for boundary experiments."""
    return TwoMixture(normal_component(mean0), normal_component(mean1),
                      weight_box=weight_box, signed=signed)


def extend(model: MixtureModel, weight_box=(-0.5, 1.5)) -> MixtureModel:
    """Signed-weight version of a probability mixture."""
    if isinstance(model, TwoMixture):
        return TwoMixture(model.components[1], model.components[0],
                          weight_box=weight_box, signed=True)
    return MixtureModel(model.components, weight_box=weight_box, signed=True)


# ---------------------------------------------------------------------------
# module-level helpers


_COMPONENT_FAMILIES = {
    "normal": lambda spec: normal_component(spec.get("mean", 0.0), spec.get("free", False)),
    "exponential": lambda spec: exponential_component(spec.get("rate", 1.0), spec.get("free", False)),
}


def _component_from_config(spec) -> Component:
    if isinstance(spec, Component):
        return spec
    fam = spec.get("family", "normal")
    if fam not in _COMPONENT_FAMILIES:
        raise ModelConfigError(f"unknown component family {fam!r}")
    if fam == "normal" and spec.get("sd", 1.0) != 1.0:
        raise ModelConfigError("normal components have unit variance")
    return _COMPONENT_FAMILIES[fam](spec)


def make_builtin(name: str, **params) -> ParametricModel:
    """Build one of the named models.

    Names (case and underscores ignored): ``GaussianMean``, ``Exponential``,
    ``GaussianMeanVector``, ``Binomial``, ``TwoMixtureKnown``, ``KMixture``.
    """
    key = name.replace("_", "").replace("-", "").lower()
    if key in ("gaussianmean", "normal", "gaussian"):
        return GaussianMean(box=tuple(params.get("box", (-math.inf, math.inf))))
    if key == "exponential":
        return Exponential(rate_box=tuple(params.get("rate_box", (1e-6, 1e6))))
    if key in ("gaussianmeanvector", "normalvector"):
        return GaussianMeanVector(dim=int(params.get("dim", 2)))
    if key == "binomial":
        return Binomial(int(params["trials"]))
    if key in ("twomixtureknown", "twomixture"):
        p0 = _component_from_config(params.get("p0", {"family": "normal", "mean": 0.0}))
        p1 = _component_from_config(params.get("p1", {"family": "normal", "mean": 0.5}))
        if p0.free or p1.free:
            raise ModelConfigError("two_mixture components are known")
        return TwoMixture(p0, p1, weight_box=params.get("weight_box"),
                          signed=bool(params.get("signed", False)))
    if key == "kmixture":
        comps = [_component_from_config(c) for c in params["components"]]
        return MixtureModel(comps, weight_box=params.get("weight_box"),
                            signed=bool(params.get("signed", False)))
    raise ModelConfigError(f"unknown model {name!r}")


def from_config(cfg: dict) -> ParametricModel:
    cfg = dict(cfg)
    return make_builtin(cfg.pop("name"), **cfg)


def integrate_against(model: ParametricModel, theta, u: Callable) -> float:
    return model.integrate(theta, u)


def sample(model: ParametricModel, theta, n: int, seed: int) -> np.ndarray:
    return model.sample(theta, n, seed)
