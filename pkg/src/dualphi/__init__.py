"""Dual-form phi-divergence estimation and testing for parametric models."""

__version__ = "0.1.0"

from .divergence import DivergenceSpec, power
from .dual import DualObjective
from .estimate import (
    ConstraintSpec,
    EstimateResult,
    LocalBall,
    composite_estimate,
    dual_estimate,
    fix_coordinates,
    min_dual_estimate,
)
from .infer import (
    confidence_region,
    composite_test,
    glr_statistic,
    mixture_component_test,
    mixture_dual,
    mixture_dual_chi2,
    power_plan,
    simple_test,
)
from .model import make_builtin

__all__ = [
    "ConstraintSpec",
    "DivergenceSpec",
    "DualObjective",
    "EstimateResult",
    "LocalBall",
    "composite_estimate",
    "composite_test",
    "confidence_region",
    "dual_estimate",
    "fix_coordinates",
    "glr_statistic",
    "make_builtin",
    "min_dual_estimate",
    "mixture_component_test",
    "mixture_dual",
    "mixture_dual_chi2",
    "power",
    "power_plan",
    "simple_test",
]
