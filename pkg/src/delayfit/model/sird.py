"""Delayed SIRD vector field and its stability bound.

History access is vectorized: a ``history_eval`` takes an array of times and
returns an ``(n, 4)`` array of ``(s, i, r, d)`` rows, raising ``DomainError``
with the failing ``time`` when asked about a time it does not cover.
"""

import logging
from collections.abc import Callable
from typing import NamedTuple

import numpy as np

from delayfit.errors import DomainError
from delayfit.model.kernel import DelayKernel
from delayfit.model.params import ModelParams, TransmissionMode

logger = logging.getLogger(__name__)

HistoryEval = Callable[[np.ndarray], np.ndarray]

COMPARTMENTS = ("s", "i", "r", "d")


class State(NamedTuple):
    s: float
    i: float
    r: float
    d: float


def effective_beta(t: float, params: ModelParams) -> float:
    """Contact rate in force at day ``t``, per persons per day."""
    beta = params.beta_schedule.at(t)
    if params.mode is TransmissionMode.FREQUENCY:
        beta /= params.n0
    return beta


def _offending_sigma(exc: DomainError, t: float, kernel: DelayKernel) -> float:
    if exc.time is None:
        return kernel.max_lag
    idx = int(np.argmin(np.abs((t - kernel.sigmas) - exc.time)))
    return float(kernel.sigmas[idx])


def delayed_incidence(history_eval: HistoryEval, t: float, kernel: DelayKernel) -> float:
    """Weighted sum of lagged infected counts, sum_j w_j * i(t - sigma_j)."""
    times = t - kernel.sigmas
    try:
        states = np.asarray(history_eval(times), dtype=float)
    except DomainError as exc:
        sigma = _offending_sigma(exc, t, kernel)
        raise DomainError(
            f"lag sigma={sigma:g} reaches t={t - sigma:g}, outside the history domain",
            time=t - sigma,
            sigma=sigma,
        ) from exc
    return float(kernel.weights @ states[:, 1])


def rhs(
    t: float,
    current: np.ndarray,
    history_eval: HistoryEval,
    params: ModelParams,
    kernel: DelayKernel,
) -> np.ndarray:
    """Time derivative of (s, i, r, d) in persons per day."""
    c = delayed_incidence(history_eval, t, kernel)
    infection = effective_beta(t, params) * current[0] * c
    return np.array(
        [
            -infection,
            infection - params.removal_rate * c,
            params.phi_r * c,
            params.phi_d * c,
        ]
    )


def sird_field(params: ModelParams, kernel: DelayKernel):
    """Bind params and kernel into the ``fun(t, y, lagged)`` form the integrator expects."""

    def field(t: float, y: np.ndarray, lagged: HistoryEval) -> np.ndarray:
        return rhs(t, y, lagged, params, kernel)

    return field


def stability_margin(params: ModelParams, kernel: DelayKernel) -> np.ndarray:
    """pi / (2 sigma_j) - (phi_d + phi_r) per lag; positive everywhere means stable."""
    return np.pi / (2.0 * kernel.sigmas) - params.removal_rate


def unstable_lags(params: ModelParams, kernel: DelayKernel) -> list[float]:
    margins = stability_margin(params, kernel)
    return [float(s) for s, m in zip(kernel.sigmas, margins) if m <= 0]


def is_stable(params: ModelParams, kernel: DelayKernel) -> bool:
    return not unstable_lags(params, kernel)


def warn_if_unstable(params: ModelParams, kernel: DelayKernel) -> bool:
    """Log a warning for lags outside the stable regime; fits still proceed."""
    lags = unstable_lags(params, kernel)
    if lags:
        logger.warning(
            "stability bound violated for sigma in %s (phi_r + phi_d = %.6g)",
            ", ".join(f"{s:g}" for s in lags),
            params.removal_rate,
        )
    return not lags
