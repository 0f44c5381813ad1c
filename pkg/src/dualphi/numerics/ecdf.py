"""Empirical distribution functions and Kolmogorov-Smirnov distances.

Reference laws may carry atoms (the GLR limit ``0.5 delta_0 + 0.5 chi2_1``
has one at zero), so every reference exposes its left limit as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .special import chi2_cdf


@dataclass(frozen=True)
class ReferenceCdf:
    """A distribution function with an optional left-limit ``F(x-)``."""

    cdf: Callable[[np.ndarray], np.ndarray]
    left: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, x):
        return self.cdf(x)

    def left_limit(self, x):
        return self.cdf(x) if self.left is None else self.left(x)


def chi2_reference(dof: int) -> ReferenceCdf:
    return ReferenceCdf(lambda x: chi2_cdf(dof, np.asarray(x, dtype=float)), name=f"chi2_{dof}")


def half_chi2_reference() -> ReferenceCdf:
    """``0.5 delta_0 + 0.5 chi2_1``, the boundary GLR limit."""

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 0.5 + 0.5 * chi2_cdf(1, x), 0.0)

    def left(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, 0.5 + 0.5 * chi2_cdf(1, x), 0.0)

    return ReferenceCdf(cdf, left, name="0.5*delta0+0.5*chi2_1")


def point_mass_reference(at: float) -> ReferenceCdf:
    return ReferenceCdf(
        lambda x: (np.asarray(x, dtype=float) >= at).astype(float),
        lambda x: (np.asarray(x, dtype=float) > at).astype(float),
        name=f"delta_{at:g}",
    )


def uniform_reference() -> ReferenceCdf:
    return ReferenceCdf(lambda x: np.clip(np.asarray(x, dtype=float), 0.0, 1.0), name="uniform")


@dataclass(frozen=True)
class EcdfSummary:
    values: np.ndarray

    @classmethod
    def from_sample(cls, sample) -> "EcdfSummary":
        v = np.sort(np.asarray(sample, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empty sample")
        return cls(v)

    def __call__(self, x):
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.values.size

    def ks_distance_to(self, reference) -> float:
        return ecdf_ks(self.values, reference)


def ecdf_ks(sample, reference) -> float:
    """Sup-distance between the empirical CDF of ``sample`` and ``reference``.

    ``reference`` is a :class:`ReferenceCdf` or a plain continuous CDF.
    The supremum is attained at a jump point of the ECDF, either at the
    point itself or just to its left, so both one-sided gaps are checked
    against the matching side of the reference.
    """
    if not isinstance(reference, ReferenceCdf):
        reference = ReferenceCdf(reference)
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    jumps = np.unique(x)
    n = x.size
    f_right = np.searchsorted(x, jumps, side="right") / n
    f_left = np.searchsorted(x, jumps, side="left") / n
    ref_right = np.asarray(reference(jumps), dtype=float)
    ref_left = np.asarray(reference.left_limit(jumps), dtype=float)
    d = max(np.max(np.abs(f_right - ref_right)), np.max(np.abs(f_left - ref_left)))
    return float(min(max(d, 0.0), 1.0))
