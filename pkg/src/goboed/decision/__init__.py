"""Robust convex decision layer: risk functionals, solvers, sensitivities."""

from .core import (
    DecisionSolution,
    envelope_grad,
    kkt_residual,
    solve_chance,
    solve_cvar,
    solve_mean,
)
from .problems import (
    DoseProblem,
    LinearThetaProblem,
    QuarantineProblem,
    UnconstrainedQuadratic,
)
from .risk import RiskSpec, cvar_value, cvar_value_many, pad_infeasible, select_scenarios

__all__ = [
    "DecisionSolution",
    "DoseProblem",
    "LinearThetaProblem",
    "QuarantineProblem",
    "RiskSpec",
    "UnconstrainedQuadratic",
    "cvar_value",
    "cvar_value_many",
    "envelope_grad",
    "kkt_residual",
    "pad_infeasible",
    "select_scenarios",
    "solve_chance",
    "solve_cvar",
    "solve_mean",
]
