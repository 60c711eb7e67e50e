"""Discretized delay kernel: lag grid plus convex weights."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-12


def _frozen(values: Sequence[float]) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def delay_grid(sigma_min: float, sigma_max: float, count: int) -> np.ndarray:
    """Uniform partition of [sigma_min, sigma_max] into ``count`` lags.

    >>> delay_grid(2, 35, 12).tolist()[:3]
    [2.0, 5.0, 8.0]
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        if sigma_min != sigma_max:
            raise ValueError("a single-lag grid needs sigma_min == sigma_max")
        return np.array([float(sigma_min)])
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    return np.linspace(float(sigma_min), float(sigma_max), count)


@dataclass(frozen=True, eq=False)
class DelayKernel:
    """Lags ``sigmas`` (days) with weights ``weights`` on the probability simplex."""

    sigmas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        sigmas = _frozen(self.sigmas)
        weights = _frozen(self.weights)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "weights", weights)

        if sigmas.ndim != 1 or sigmas.size < 1:
            raise ValueError("kernel needs at least one lag")
        if weights.shape != sigmas.shape:
            raise ValueError(
                f"{weights.size} weights given for {sigmas.size} lags"
            )
        if not np.all(np.isfinite(sigmas)) or np.any(sigmas <= 0):
            raise ValueError("lags must be finite and > 0")
        if np.any(np.diff(sigmas) <= 0):
            raise ValueError("lags must be strictly increasing")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")

    @classmethod
    def uniform(cls, sigmas: Sequence[float]) -> "DelayKernel":
        k = len(sigmas)
        return cls(sigmas, np.full(k, 1.0 / k))

    @classmethod
    def dirac(cls, sigmas: Sequence[float], sigma: float) -> "DelayKernel":
        """All mass on the grid lag equal to ``sigma``."""
        grid = np.asarray(sigmas, dtype=float)
        hits = np.flatnonzero(np.isclose(grid, sigma, rtol=0, atol=1e-9))
        if hits.size != 1:
            raise ValueError(f"sigma={sigma} is not on the lag grid")
        weights = np.zeros(grid.size)
        weights[hits[0]] = 1.0
        return cls(grid, weights)

    def with_weights(self, weights: Sequence[float]) -> "DelayKernel":
        return DelayKernel(self.sigmas, weights)

    @property
    def k(self) -> int:
        return int(self.sigmas.size)

    @property
    def max_lag(self) -> float:
        return float(self.sigmas[-1])

    @property
    def min_lag(self) -> float:
        return float(self.sigmas[0])

    def __eq__(self, other):
        if not isinstance(other, DelayKernel):
            return NotImplemented
        return np.array_equal(self.sigmas, other.sigmas) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self):
        return hash((self.sigmas.tobytes(), self.weights.tobytes()))
