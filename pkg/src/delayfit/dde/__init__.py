"""Constant-lag DDE integration with dense output."""

from delayfit.dde.history import HistoryFunction
from delayfit.dde.solver import MIN_STEP, SolverConfig, integrate, seed_breakpoints
from delayfit.dde.trajectory import SolveStats, Trajectory

__all__ = [
    "HistoryFunction",
    "SolverConfig",
    "SolveStats",
    "Trajectory",
    "integrate",
    "seed_breakpoints",
    "MIN_STEP",
]
