"""Box-constrained smooth maximisation and nested saddle-point search.

``maximize`` is a projected BFGS ascent with an Armijo backtracking line
search.  Objectives may return ``-inf`` (or ``nan``) to mark infeasible
points; the line search simply backs away from them.  ``minimax`` solves
``inf_theta sup_alpha inner(theta, alpha)`` by nesting ``maximize`` inside a
compass search that is then polished by finite-difference BFGS on the value
function.

When an optimum is not unique the first one reached from ``init`` is
returned; a different ``init`` can legitimately yield a different optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_HALVINGS = 40
INNER_TOL_RATIO = 10.0
_EPS = np.finfo(float).eps
FD_STEP = _EPS ** (1.0 / 3.0)


@dataclass
class OptimizeReport:
    argopt: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    boundary_active: np.ndarray
    evaluations: int = 0
    message: str = ""


@dataclass
class MinimaxResult:
    theta: np.ndarray
    alpha: np.ndarray
    value: float
    outer: OptimizeReport
    inner: OptimizeReport
    converged: bool = field(init=False)

    def __post_init__(self):
        self.converged = bool(self.outer.converged and self.inner.converged)


def as_box(box, dim: Optional[int] = None):
    """Normalise a box to ``(lo, hi)`` arrays.

    A tuple of two 1-d arrays is read as ``(lo, hi)``; anything else as a
    sequence of per-coordinate ``(lo, hi)`` pairs.
    """
    if isinstance(box, tuple) and len(box) == 2 and all(isinstance(b, np.ndarray) and b.ndim == 1
                                                         for b in box):
        lo, hi = (np.asarray(b, dtype=float).copy() for b in box)
        if dim is not None and lo.size != dim:
            raise ValueError(f"box has {lo.size} coordinates, expected {dim}")
        if np.any(lo > hi):
            raise ValueError("box lower bounds exceed upper bounds")
        return lo, hi
    arr = np.asarray(box, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr[None, :]
    if arr.ndim == 2 and arr.shape[1] == 2:
        lo, hi = arr[:, 0].copy(), arr[:, 1].copy()
    elif arr.ndim == 2 and arr.shape[0] == 2:
        lo, hi = arr[0].copy(), arr[1].copy()
    else:
        raise ValueError(f"cannot interpret box of shape {arr.shape}")
    if dim is not None and lo.size != dim:
        raise ValueError(f"box has {lo.size} coordinates, expected {dim}")
    if np.any(lo > hi):
        raise ValueError("box lower bounds exceed upper bounds")
    return lo, hi


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        v = float(self.fn(x))
        if math.isnan(v):
            return -math.inf
        return v


def fd_gradient(fn, x, fx, lo, hi, step=FD_STEP):
    """Central differences, shrunk or made one-sided near the box faces."""
    g = np.zeros_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        room_hi, room_lo = hi[i] - x[i], x[i] - lo[i]
        hc = min(h, room_hi, room_lo)
        e = np.zeros_like(x)
        if hc >= 1e-3 * h:
            e[i] = hc
            fp, fm = fn(x + e), fn(x - e)
            if math.isfinite(fp) and math.isfinite(fm):
                g[i] = (fp - fm) / (2.0 * hc)
                continue
        # one-sided towards the side with room and a finite value
        for sgn, room in ((1.0, room_hi), (-1.0, room_lo)):
            if room >= 1e-3 * h:
                hs = min(h, room)
                e[:] = 0.0
                e[i] = sgn * hs
                fs = fn(x + e)
                if math.isfinite(fs):
                    g[i] = sgn * (fs - fx) / hs
                    break
    return g


def maximize(
    objective: Callable[[np.ndarray], float],
    box,
    init,
    tol: float = 1e-8,
    max_iter: int = 200,
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    max_step: Optional[float] = None,
) -> OptimizeReport:
    """Maximise a smooth ``objective`` over a box.

    Parameters
    ----------
    objective : callable
        Maps a parameter vector to an extended real; ``-inf``/``nan`` are
        infeasible.
    box : sequence of (lo, hi)
        Per-coordinate bounds (may be infinite).
    init : array_like
        Starting point, clipped into the box.
    tol : float
        Target for the projected-gradient residual ``|x - P(x + grad)|``.
    grad : callable, optional
        Analytic gradient; central finite differences otherwise.
    project : callable, optional
        Extra projection applied after clipping (e.g. onto a ball).

    Returns
    -------
    OptimizeReport
        Best iterate found.  Running out of iterations or line-search room
        leaves ``converged`` false but never raises.
    """
    x0 = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    lo, hi = as_box(box, x0.size)
    f = _Counted(objective)

    def proj(z):
        z = np.clip(z, lo, hi)
        return project(z) if project is not None else z

    def gradient(z, fz):
        if grad is not None:
            return np.atleast_1d(np.asarray(grad(z), dtype=float))
        return fd_gradient(f, z, fz, lo, hi)

    def residual(z, gz):
        return float(np.linalg.norm(z - proj(z + gz)))

    def report(z, fz, gz, it, ok, msg):
        scale = np.maximum(1.0, np.abs(z))
        active = (np.abs(z - lo) <= 1e-10 * scale) | (np.abs(hi - z) <= 1e-10 * scale)
        if project is not None and not np.allclose(project(z), z, rtol=0, atol=1e-12):
            active[:] = True
        return OptimizeReport(z, fz, residual(z, gz) if gz is not None else math.inf,
                              it, ok, active, f.calls, msg)

    x = proj(x0)
    fx = f(x)
    if not math.isfinite(fx):
        return report(x, fx, None, 0, False, "objective infeasible at the starting point")
    g = gradient(x, fx)
    n = x.size
    H = np.eye(n)
    fresh = True
    for it in range(1, max_iter + 1):
        if residual(x, g) <= tol:
            return report(x, fx, g, it - 1, True, "projected gradient below tolerance")
        blocked = ((x <= lo) & (g < 0)) | ((x >= hi) & (g > 0))
        free = ~blocked
        d = np.zeros(n)
        d[free] = H[np.ix_(free, free)] @ g[free]
        slope = float(g @ d)
        if not slope > 0:
            H = np.eye(n)
            fresh = True
            d = np.where(free, g, 0.0)
            slope = float(g @ d)
        dn = float(np.linalg.norm(d))
        cap = max_step if max_step is not None else 10.0 * max(1.0, float(np.linalg.norm(x)))
        t = min(1.0, cap / dn) if dn > 0 else 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            xn = proj(x + t * d)
            fn_ = f(xn)
            if math.isfinite(fn_) and fn_ >= fx + ARMIJO_C * float(g @ (xn - x)):
                accepted = True
                break
            t *= BACKTRACK
        if not accepted or np.array_equal(xn, x):
            if fresh:
                return report(x, fx, g, it, residual(x, g) <= tol, "line search stalled")
            H = np.eye(n)
            fresh = True
            continue
        gn = gradient(xn, fn_)
        s = xn - x
        y = g - gn
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            if fresh:
                H = np.eye(n) * (sy / float(y @ y))
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
            fresh = False
        x, fx, g = xn, fn_, gn
    return report(x, fx, g, max_iter, residual(x, g) <= tol, "iteration limit reached")


def _pattern_search(value, x, lo, hi, step, min_step, max_evals=400):
    fx = value(x)
    evals = 0
    while np.any(step >= min_step) and evals < max_evals:
        improved = False
        for i in range(x.size):
            if step[i] < min_step[i]:
                continue
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] = np.clip(trial[i] + sgn * step[i], lo[i], hi[i])
                if trial[i] == x[i]:
                    continue
                ft = value(trial)
                evals += 1
                if ft < fx:
                    x, fx, improved = trial, ft, True
                    break
        if not improved:
            step = step * 0.5
    return x, fx


def minimax(
    inner: Callable[[np.ndarray, np.ndarray], float],
    outer_box,
    inner_box,
    outer_init,
    inner_init,
    tol: float = 1e-8,
    max_iter: int = 100,
    inner_project=None,
    outer_project=None,
    pattern_rtol: float = 1e-2,
) -> MinimaxResult:
    """``inf_theta sup_alpha inner(theta, alpha)`` by nested optimisation.

    The inner problem is solved to ``tol / 10`` at every outer evaluation
    and warm-started from the previous inner optimum.
    """
    th0 = np.atleast_1d(np.asarray(outer_init, dtype=float)).copy()
    lo, hi = as_box(outer_box, th0.size)
    th0 = np.clip(th0, lo, hi)
    if outer_project is not None:
        th0 = outer_project(th0)
    warm = {"alpha": np.atleast_1d(np.asarray(inner_init, dtype=float)).copy()}
    memo = {}

    def solve_inner(theta):
        key = theta.tobytes()
        if key not in memo:
            rep = maximize(lambda a: inner(theta, a), inner_box, warm["alpha"],
                           tol=tol / INNER_TOL_RATIO, project=inner_project)
            if math.isfinite(rep.value):
                warm["alpha"] = rep.argopt
            memo[key] = rep
        return memo[key]

    def value(theta):
        v = solve_inner(np.asarray(theta, dtype=float)).value
        # an infeasible inner problem means the outer point is unusable
        return v if math.isfinite(v) or v > 0 else math.inf

    width = hi - lo
    scale = np.maximum(1.0, np.abs(th0))
    step = np.where(np.isfinite(width), np.minimum(0.25 * width, 0.5 * scale), 0.5 * scale)
    th, _ = _pattern_search(value, th0, lo, hi, step, pattern_rtol * scale)
    outer = maximize(lambda t: -value(t), (lo, hi), th, tol=tol, max_iter=max_iter,
                     project=outer_project)
    outer.value = -outer.value
    inner_rep = solve_inner(outer.argopt)
    return MinimaxResult(outer.argopt, inner_rep.argopt, inner_rep.value, outer, inner_rep)
