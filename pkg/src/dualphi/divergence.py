"""Convex divergence generators, their derivatives and Fenchel conjugates.

The power family ``phi_gamma`` covers the usual divergences:

====================  =======
divergence            gamma
====================  =======
modified chi-square   -1
modified KL (KL_m)     0
Hellinger              1/2
Kullback-Leibler       1
chi-square             2
====================  =======

Values outside the domain of ``phi`` are represented by ``+inf`` rather than
raised as errors; callers that optimize treat an infinite objective as
infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

# Half-width of the window around x = 1 where the Taylor series replaces the
# closed form (the closed form cancels catastrophically there).
SERIES_RADIUS = 1e-4
_SERIES_ORDER = 7
_SLOPE_GRID = 10.0 ** np.arange(2, 11)


class DivergenceError(ValueError):
    """Raised for inadmissible divergence specifications or domain violations."""


def _is_even_integer(g: float) -> bool:
    return float(g).is_integer() and int(g) % 2 == 0 and g >= 2


@dataclass(frozen=True)
class DivergenceSpec:
    """A strictly convex generator ``phi`` with ``phi(1) = phi'(1) = 0``.

    Use :func:`power` or :func:`custom` to build one; both validate the
    normalisation and the conjugate-domain endpoints at construction.
    """

    kind: str
    gamma: Optional[float]
    phi2_at_one: float
    a_phi: float
    b_phi: float
    a_conj: float
    b_conj: float
    name: str = ""
    _phi: Optional[ArrayFn] = field(default=None, repr=False, compare=False)
    _dphi: Optional[ArrayFn] = field(default=None, repr=False, compare=False)
    _d2phi: Optional[ArrayFn] = field(default=None, repr=False, compare=False)
    _conj: Optional[ArrayFn] = field(default=None, repr=False, compare=False)

    @property
    def is_power(self) -> bool:
        return self.kind == "power"

    @property
    def finite_on_reals(self) -> bool:
        return self.a_phi == -math.inf

    # -- phi and its derivatives -------------------------------------------

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_power:
            return _power_phi(self.gamma, x, self.finite_on_reals)
        return self._guarded(self._phi, x, math.inf)

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_power:
            return _power_dphi(self.gamma, x, self.finite_on_reals)
        return self._guarded(self._dphi, x, math.inf)

    def d2phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_power:
            return _power_d2phi(self.gamma, x, self.finite_on_reals)
        return self._guarded(self._d2phi, x, math.inf)

    def conj_deriv(self, x):
        """``x phi'(x) - phi(x)``, which equals ``phi*(phi'(x))``."""
        x = np.asarray(x, dtype=float)
        if self.is_power:
            return _power_conj_deriv(self.gamma, x, self.finite_on_reals)
        out = np.full(x.shape, math.inf)
        inside = (x > self.a_phi) & (x < self.b_phi)
        xi = x[inside]
        out[inside] = xi * self._dphi(xi) - self._phi(xi)
        return out

    # Kernels written in terms of the log density ratio ``lr = log r``;
    # these avoid overflow/underflow of ``r`` itself for the power family.

    def phi_from_log(self, lr):
        """``phi(exp(lr))``, safe when ``exp(lr)`` under- or overflows."""
        lr = np.asarray(lr, dtype=float)
        near = np.abs(lr) < 0.5
        if not self.is_power or np.all(near):
            return self.phi(np.exp(lr))
        g = self.gamma
        with np.errstate(over="ignore", invalid="ignore"):
            if g == 0:
                far = np.expm1(lr) - lr
            elif g == 1:
                far = np.exp(lr) * lr - np.expm1(lr)
            else:
                far = (np.expm1(g * lr) - g * np.expm1(lr)) / (g * (g - 1.0))
        return np.where(near, self.phi(np.exp(np.where(near, lr, 0.0))), far)

    def dphi_from_log(self, lr):
        lr = np.asarray(lr, dtype=float)
        if not self.is_power:
            return self.dphi(np.exp(lr))
        g = self.gamma
        if g == 1:
            return lr.copy()
        return np.expm1((g - 1.0) * lr) / (g - 1.0)

    def conj_deriv_from_log(self, lr):
        lr = np.asarray(lr, dtype=float)
        if not self.is_power:
            return self.conj_deriv(np.exp(lr))
        g = self.gamma
        if g == 0:
            return lr.copy()
        return np.expm1(g * lr) / g

    def d2phi_times_r2_from_log(self, lr):
        """``r^2 phi''(r)``, the factor in the alpha-derivative of ``g``."""
        lr = np.asarray(lr, dtype=float)
        if self.is_power:
            return np.exp(self.gamma * lr)
        r = np.exp(lr)
        return r * r * self.d2phi(r)

    def _guarded(self, fn, x, outside):
        out = np.full(x.shape, outside, dtype=float)
        inside = (x > self.a_phi) & (x < self.b_phi)
        if np.any(inside):
            out[inside] = fn(x[inside])
        return out

    # -- conjugate -----------------------------------------------------------

    def conj(self, t):
        t = np.asarray(t, dtype=float)
        if self._conj is not None:
            return self._conj(t)
        if self.is_power and self.gamma in (0.0, 1.0, 2.0):
            return _power_conj_closed(self.gamma, t)
        flat = np.array([self._conj_newton(float(v)) for v in t.ravel()])
        return flat.reshape(t.shape)

    def _conj_newton(self, t: float) -> float:
        if not (self.a_conj <= t <= self.b_conj) or (
            t == self.b_conj and self.b_phi == math.inf
        ):
            return math.inf
        if t == 0.0:
            return 0.0
        a, b = self.a_phi, self.b_phi
        if math.isfinite(a):
            d_at_a = float(self.dphi(np.array(a + 1e-300)))
            if math.isfinite(d_at_a) and t <= d_at_a:
                # supremum sits on the domain edge
                return t * a - float(self.phi(np.array(a)))
        x = solve_dphi(self, t)
        return t * x - float(self.phi(np.array(x)))


def solve_dphi(spec: DivergenceSpec, t: float, xtol: float = 4e-16) -> float:
    """Solve ``phi'(x) = t`` on ``(a_phi, b_phi)`` by safeguarded Newton."""
    a, b = spec.a_phi, spec.b_phi

    def d1(x):
        return float(spec.dphi(np.array(x)))

    lo, hi = 1.0, 1.0
    if t > 0:
        hi = 2.0 if b == math.inf else 0.5 * (1.0 + b)
        for _ in range(2000):
            if d1(hi) >= t:
                break
            lo = hi
            hi = 2.0 * hi if b == math.inf else 0.5 * (hi + b)
        else:
            raise DivergenceError(f"phi' never reaches {t}")
    else:
        lo = 0.0 if a == -math.inf else 0.5 * (1.0 + a)
        for _ in range(2000):
            if d1(lo) <= t:
                break
            hi = lo
            lo = 2.0 * lo - 1.0 if a == -math.inf else 0.5 * (lo + a)
        else:
            raise DivergenceError(f"phi' never reaches {t}")

    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = d1(x) - t
        if f == 0.0:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        slope = float(spec.d2phi(np.array(x)))
        step_ok = False
        if slope > 0 and math.isfinite(slope):
            xn = x - f / slope
            step_ok = lo < xn < hi
        if not step_ok:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= xtol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


# ---------------------------------------------------------------------------
# power family


def _series_coeffs(g: float, order: int):
    # phi^{(k)}(1) = prod_{j=2}^{k-1} (g - j) for k >= 2
    coeffs = []
    c = 1.0
    for k in range(2, order + 1):
        if k > 2:
            c *= g - (k - 1)
        coeffs.append(c / math.factorial(k))
    return coeffs


def _power_phi(g, x, finite_on_reals):
    out = np.empty(x.shape)
    with np.errstate(all="ignore"):
        if finite_on_reals:
            pos = np.ones(x.shape, dtype=bool)
        else:
            pos = x > 0
            out[x < 0] = math.inf
            out[x == 0] = _power_phi_at_zero(g)
        xp = x[pos]
        e = xp - 1.0
        if g == 0:
            v = e - np.log1p(e)
        elif g == 1:
            v = xp * np.log(xp) - e
        else:
            v = (np.power(xp, g) - g * xp + g - 1.0) / (g * (g - 1.0))
        near = np.abs(e) < SERIES_RADIUS
        if np.any(near):
            en = e[near]
            coeffs = _series_coeffs(g, _SERIES_ORDER)
            s = np.full(en.shape, coeffs[-1])
            for c in reversed(coeffs[:-1]):
                s = s * en + c
            v[near] = s * en * en
        out[pos] = v
    return out


def _power_phi_at_zero(g):
    if g <= 0:
        return math.inf
    return 1.0 / g


def _power_dphi(g, x, finite_on_reals):
    out = np.empty(x.shape)
    with np.errstate(all="ignore"):
        if finite_on_reals:
            # even integer gamma: x**(g-1) is an odd power, fine on negatives
            return (np.power(x, g - 1.0) - 1.0) / (g - 1.0)
        pos = x > 0
        out[x < 0] = math.inf
        out[x == 0] = -math.inf if g <= 1 else -1.0 / (g - 1.0)
        xp = x[pos]
        if g == 1:
            out[pos] = np.log(xp)
        else:
            out[pos] = np.expm1((g - 1.0) * np.log(xp)) / (g - 1.0)
    return out


def _power_d2phi(g, x, finite_on_reals):
    with np.errstate(all="ignore"):
        if finite_on_reals:
            return np.power(x, g - 2.0)
        out = np.empty(x.shape)
        pos = x > 0
        out[x < 0] = math.inf
        out[x == 0] = math.inf if g < 2 else 0.0
        out[pos] = np.power(x[pos], g - 2.0)
    return out


def _power_conj_deriv(g, x, finite_on_reals):
    # x phi'(x) - phi(x) = (x^g - 1) / g   (log x for g = 0)
    with np.errstate(all="ignore"):
        if finite_on_reals:
            return (np.power(x, g) - 1.0) / g
        out = np.empty(x.shape)
        pos = x > 0
        out[x < 0] = math.inf
        if g < 0:
            out[x == 0] = math.inf
        elif g == 0:
            out[x == 0] = -math.inf
        else:
            out[x == 0] = -1.0 / g
        xp = x[pos]
        if g == 0:
            out[pos] = np.log(xp)
        else:
            out[pos] = np.expm1(g * np.log(xp)) / g
    return out


def _power_conj_closed(g, t):
    with np.errstate(all="ignore"):
        if g == 2:
            return t + 0.5 * t * t
        if g == 1:
            return np.expm1(t)
        out = np.full(t.shape, math.inf)
        ok = t < 1
        out[ok] = -np.log1p(-t[ok])
        return out


def power(gamma: float) -> DivergenceSpec:
    """The Cressie-Read power generator ``phi_gamma``.

    Off ``[0, inf)`` the generator is ``+inf``, except for even integers
    ``gamma >= 2`` where the polynomial is convex on the whole line.
    """
    g = float(gamma)
    if not math.isfinite(g):
        raise DivergenceError("gamma must be finite")
    finite = _is_even_integer(g)
    a_phi = -math.inf if finite else 0.0
    b_conj = math.inf if g >= 1 else 1.0 / (1.0 - g)
    names = {-1.0: "modified chi-square", 0.0: "modified KL", 0.5: "Hellinger",
             1.0: "KL", 2.0: "chi-square"}
    spec = DivergenceSpec(
        kind="power",
        gamma=g,
        phi2_at_one=1.0,
        a_phi=a_phi,
        b_phi=math.inf,
        a_conj=-math.inf,
        b_conj=b_conj,
        name=names.get(g, f"power({g:g})"),
    )
    _check_slopes(spec)
    return spec


def custom(
    phi: ArrayFn,
    dphi: ArrayFn,
    d2phi: ArrayFn,
    phi2_at_one: float,
    a_phi: float = -math.inf,
    b_phi: float = math.inf,
    conjugate: Optional[ArrayFn] = None,
    a_conj: Optional[float] = None,
    b_conj: Optional[float] = None,
    name: str = "custom",
) -> DivergenceSpec:
    """Wrap user callables as a divergence generator.

    The callables receive numpy arrays of points strictly inside
    ``(a_phi, b_phi)``.  ``phi2_at_one`` is required: it fixes the scale of
    every test statistic, so it is never estimated numerically.  Essential
    smoothness cannot be verified by machine and is assumed.
    """
    if not a_phi < 1.0 < b_phi:
        raise DivergenceError("domain must satisfy a_phi < 1 < b_phi")
    if not phi2_at_one > 0:
        raise DivergenceError("phi''(1) must be positive")
    one = np.array([1.0])
    if abs(float(phi(one)[0])) > 1e-12 or abs(float(dphi(one)[0])) > 1e-12:
        raise DivergenceError("phi must satisfy phi(1) = phi'(1) = 0")
    if abs(float(d2phi(one)[0]) - phi2_at_one) > 1e-8 * phi2_at_one:
        raise DivergenceError("phi2_at_one disagrees with d2phi(1)")
    grid = _domain_grid(a_phi, b_phi)
    if np.any(d2phi(grid) < 0):
        raise DivergenceError("phi'' is negative somewhere in the domain")
    slopes_lo, slopes_hi = _slopes(phi, a_phi, b_phi)
    a_c = slopes_lo if a_conj is None else float(a_conj)
    b_c = slopes_hi if b_conj is None else float(b_conj)
    spec = DivergenceSpec(
        kind="custom",
        gamma=None,
        phi2_at_one=float(phi2_at_one),
        a_phi=float(a_phi),
        b_phi=float(b_phi),
        a_conj=a_c,
        b_conj=b_c,
        name=name,
        _phi=phi,
        _dphi=dphi,
        _d2phi=d2phi,
        _conj=conjugate,
    )
    if not spec.a_conj < 0 < spec.b_conj:
        raise DivergenceError("conjugate domain must contain 0 in its interior")
    _check_slopes(spec)
    return spec


def _domain_grid(a, b):
    lo = a if math.isfinite(a) else -50.0
    hi = b if math.isfinite(b) else 50.0
    inner = np.concatenate([np.linspace(lo, hi, 401)[1:-1], 1.0 + np.geomspace(1e-6, 1e-1, 6),
                            1.0 - np.geomspace(1e-6, 1e-1, 6)])
    return inner[(inner > a) & (inner < b)]


def _slopes(phi, a, b):
    """Estimate ``lim phi(y)/y`` at both ends on a geometric grid."""
    def limit(sign, edge):
        if math.isfinite(edge):
            # phi is +inf beyond a finite edge
            return sign * math.inf
        y = sign * _SLOPE_GRID
        vals = phi(y) / y
        last = float(vals[-1])
        if abs(last) > 1e6:
            return sign * math.inf
        return last
    return limit(-1.0, a), limit(1.0, b)


def slope_sequence(spec: DivergenceSpec, sign: float, exponents=range(2, 11)):
    """``phi(y) / y`` at ``y = sign * 10**k``."""
    y = sign * 10.0 ** np.asarray(list(exponents), dtype=float)
    with np.errstate(all="ignore"):
        return spec.phi(y) / y


def _check_slopes(spec: DivergenceSpec) -> None:
    for sign, stored in ((-1.0, spec.a_conj), (1.0, spec.b_conj)):
        if not math.isfinite(stored):
            continue
        seq = slope_sequence(spec, sign)
        if abs(seq[-1] - stored) > 1e-3 * max(1.0, abs(stored)):
            raise DivergenceError(
                f"endpoint slope {seq[-1]:.6g} disagrees with conjugate endpoint {stored:.6g}"
            )


def from_config(cfg: dict) -> DivergenceSpec:
    """Build a ``DivergenceSpec`` from ``{family = "power", gamma = <real>}``."""
    family = cfg.get("family", "power")
    if family != "power":
        raise DivergenceError(f"unknown divergence family {family!r}")
    if "gamma" not in cfg:
        raise DivergenceError("power divergence needs a gamma")
    return power(float(cfg["gamma"]))


# ---------------------------------------------------------------------------
# scalar operations


def phi_eval(spec: DivergenceSpec, x: float):
    """Return ``(phi(x), phi'(x), phi''(x))`` with ``inf`` sentinels."""
    arr = np.array([float(x)])
    return float(spec.phi(arr)[0]), float(spec.dphi(arr)[0]), float(spec.d2phi(arr)[0])


def conjugate_eval(spec: DivergenceSpec, t: float) -> float:
    """Fenchel conjugate ``sup_x {t x - phi(x)}``; ``inf`` off its domain."""
    return float(spec.conj(np.array([float(t)]))[0])


def conjugate_of_derivative(spec: DivergenceSpec, x: float) -> float:
    """``phi*(phi'(x)) = x phi'(x) - phi(x)`` for ``x`` inside the domain."""
    if not spec.a_phi < x < spec.b_phi:
        raise DivergenceError(f"x = {x} lies outside ({spec.a_phi}, {spec.b_phi})")
    return float(spec.conj_deriv(np.array([float(x)]))[0])
