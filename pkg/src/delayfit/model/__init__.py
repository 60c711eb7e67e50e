"""Delayed SIRD model: kernel, rates, vector field, stability bound."""

from delayfit.model.kernel import DelayKernel, delay_grid
from delayfit.model.params import BetaSchedule, ModelParams, TransmissionMode
from delayfit.model.sird import (
    COMPARTMENTS,
    State,
    delayed_incidence,
    effective_beta,
    is_stable,
    rhs,
    sird_field,
    stability_margin,
    unstable_lags,
    warn_if_unstable,
)

__all__ = [
    # Types
    "DelayKernel",
    "BetaSchedule",
    "ModelParams",
    "TransmissionMode",
    "State",
    "COMPARTMENTS",
    # Operations
    "delay_grid",
    "delayed_incidence",
    "effective_beta",
    "rhs",
    "sird_field",
    "stability_margin",
    "unstable_lags",
    "is_stable",
    "warn_if_unstable",
]
