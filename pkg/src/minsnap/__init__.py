"""Minimum-snap piecewise-polynomial trajectories in linear time."""

from .basis import build_A, build_Gamma, build_Q, build_selection, condition_number
from .errors import (
    ConditioningError,
    DomainError,
    GridError,
    IllPosedError,
    MinSnapError,
    ValidationError,
)
from .model import (
    ConstraintSet,
    Frame,
    ProblemSpec,
    SegmentPolynomial,
    SolveReport,
    Spline,
    TimeGrid,
    continuity_residuals,
    eval_derivative,
    eval_spline,
    evaluate,
    snap_cost,
)
from .oracle import assemble_kkt, solve_dense, solve_full_qp
from .solver import kkt_residual, solve_minimum_snap

__all__ = [
    "ConditioningError",
    "ConstraintSet",
    "DomainError",
    "Frame",
    "GridError",
    "IllPosedError",
    "MinSnapError",
    "ProblemSpec",
    "SegmentPolynomial",
    "SolveReport",
    "Spline",
    "TimeGrid",
    "ValidationError",
    "assemble_kkt",
    "build_A",
    "build_Gamma",
    "build_Q",
    "build_selection",
    "condition_number",
    "continuity_residuals",
    "eval_derivative",
    "eval_spline",
    "evaluate",
    "kkt_residual",
    "snap_cost",
    "solve_dense",
    "solve_full_qp",
    "solve_minimum_snap",
]
