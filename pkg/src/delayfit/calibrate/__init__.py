"""Forward simulation, misfit and weight fitting."""

from delayfit.calibrate.fit import (
    FitResult,
    fit_weights,
    grid_search,
    kkt_residual,
    model_minimizer,
    spectral_step,
)
from delayfit.calibrate.objective import (
    FITTABLE,
    ObjectiveSpec,
    compartment_errors,
    fitted_errors,
    misfit,
    objective,
    relative_l2_error,
    residuals,
)
from delayfit.calibrate.simplex import project_simplex, simplex_lattice
from delayfit.calibrate.simulate import ForwardModel, Simulation, simulate, synthesize

__all__ = [
    # Types
    "ObjectiveSpec",
    "FitResult",
    "ForwardModel",
    "Simulation",
    "FITTABLE",
    # Operations
    "simulate",
    "synthesize",
    "objective",
    "misfit",
    "residuals",
    "project_simplex",
    "simplex_lattice",
    "fit_weights",
    "grid_search",
    "kkt_residual",
    "spectral_step",
    "model_minimizer",
    "relative_l2_error",
    "compartment_errors",
    "fitted_errors",
]
