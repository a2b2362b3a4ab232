"""Condition constants, star norms, implication graphs and GD/HB rate checks."""

__version__ = "0.1.0"

from .conditions import (  # noqa: E402
    ConditionConstant,
    ConditionKind,
    EstimationGrid,
    defining_ratio,
    estimate_constant,
    verify_membership,
)
from .objective import MinimizerSet, Objective, objective_from_label  # noqa: E402

__all__ = [
    "ConditionConstant",
    "ConditionKind",
    "EstimationGrid",
    "MinimizerSet",
    "Objective",
    "defining_ratio",
    "estimate_constant",
    "objective_from_label",
    "verify_membership",
]
