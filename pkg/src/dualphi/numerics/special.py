"""Chi-square and standard normal distribution functions.

Thin wrappers over the regularized incomplete gamma function and the error
function from :mod:`scipy.special`, with domain checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sc


def _check_prob(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")


def _check_dof(dof: int) -> None:
    if dof <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")


def chi2_cdf(dof: int, x):
    """``P(chi2_dof <= x)``; zero for ``x <= 0``."""
    _check_dof(dof)
    x = np.asarray(x, dtype=float)
    out = sc.gammainc(0.5 * dof, 0.5 * np.maximum(x, 0.0))
    return float(out) if out.ndim == 0 else out


def chi2_sf(dof: int, x):
    """Upper tail ``P(chi2_dof > x)``, accurate far into the tail."""
    _check_dof(dof)
    x = np.asarray(x, dtype=float)
    out = sc.gammaincc(0.5 * dof, 0.5 * np.maximum(x, 0.0))
    return float(out) if out.ndim == 0 else out


def chi2_quantile(dof: int, p: float) -> float:
    """The ``p``-quantile of the chi-square law with ``dof`` degrees of freedom."""
    _check_dof(dof)
    _check_prob(p)
    return 2.0 * float(sc.gammaincinv(0.5 * dof, p))


def normal_cdf(x):
    x = np.asarray(x, dtype=float)
    out = 0.5 * sc.erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def normal_quantile(p: float) -> float:
    _check_prob(p)
    return float(sc.ndtri(p))
