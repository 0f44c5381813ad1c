"""Vectorised adaptive Gauss-Kronrod (10/21-point) quadrature.

The integrand is called on whole arrays of nodes, one call per refinement
sweep.  Non-finite integrand values and exhausted subdivision budgets are
reported as :class:`NonIntegrableError`; the dual objective relies on that
signal to decide whether a moment integral exists.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

# QUADPACK qk21 abscissae (non-negative half) and weights.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077665465549266,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# full 21-node rule on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(21)
# Gauss nodes are the odd-indexed Kronrod abscissae (1, 3, ..., 9)
for _i, _w in enumerate(_WG):
    _GW[1 + 2 * _i] = _w
    _GW[19 - 2 * _i] = _w


class NonIntegrableError(ArithmeticError):
    """The integral is infinite, undefined, or failed to converge."""


def gauss_kronrod(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-9,
    atol: float = 1e-13,
    initial_intervals: int = 8,
    max_intervals: int = 4000,
    return_nodes: bool = False,
):
    """Integrate ``fn`` over the finite interval ``[a, b]``.

    Returns the integral estimate, or ``(estimate, nodes)`` when
    ``return_nodes`` is set, ``nodes`` being every abscissa visited by the
    final partition.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("gauss_kronrod needs a finite interval")
    if a == b:
        return (0.0, np.empty(0)) if return_nodes else 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    edges = np.linspace(a, b, initial_intervals + 1)
    lo, hi = edges[:-1], edges[1:]
    done_val = 0.0
    done_err = 0.0
    kept_nodes = []
    while True:
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = center[:, None] + half[:, None] * _NODES[None, :]
        with np.errstate(all="ignore"):
            y = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(y)):
            raise NonIntegrableError("integrand is not finite on a quadrature node")
        kron = half * (y @ _KW)
        gauss = half * (y @ _GW)
        err = np.abs(kron - gauss)

        total = done_val + kron.sum()
        tol = max(atol, rtol * abs(total))
        if done_err + err.sum() <= tol:
            if return_nodes:
                kept_nodes.append(x.ravel())
                return sign * total, np.concatenate(kept_nodes)
            return sign * total

        # freeze intervals whose share of the error budget is already met
        split = err > 0.5 * tol * (hi - lo) / (b - a)
        if not np.any(split):
            split = err >= err.max()
        done_val += kron[~split].sum()
        done_err += err[~split].sum()
        if return_nodes:
            kept_nodes.append(x[~split].ravel())
        mid = center[split]
        lo = np.concatenate([lo[split], mid])
        hi = np.concatenate([mid, hi[split]])
        if len(lo) > max_intervals:
            raise NonIntegrableError("subdivision budget exhausted")
        if np.min(hi - lo) <= 8 * np.finfo(float).eps * max(abs(a), abs(b), 1.0):
            raise NonIntegrableError("subdivision reached machine resolution")
