"""Epidemic rates, intervention schedule and transmission mode."""

from dataclasses import dataclass, field, replace
from enum import Enum


class TransmissionMode(str, Enum):
    """Density mode uses beta as given; frequency mode divides it by n0."""

    DENSITY = "density"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class BetaSchedule:
    """Piecewise-constant contact rate.

    ``breakpoints`` holds ``(day, multiplier)`` pairs; from ``day`` on (inclusive)
    the rate is multiplied by ``multiplier``, cumulatively with earlier ones.
    """

    base_beta: float
    breakpoints: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        points = tuple((float(t), float(m)) for t, m in self.breakpoints)
        object.__setattr__(self, "breakpoints", points)
        if not self.base_beta > 0:
            raise ValueError("base_beta must be > 0")
        times = [t for t, _ in points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")
        if any(not m > 0 for _, m in points):
            raise ValueError("breakpoint multipliers must be > 0")

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.breakpoints)

    def at(self, t: float) -> float:
        beta = self.base_beta
        for when, multiplier in self.breakpoints:
            if when > t:
                break
            beta *= multiplier
        return beta

    def with_base(self, base_beta: float) -> "BetaSchedule":
        return replace(self, base_beta=base_beta)


@dataclass(frozen=True)
class ModelParams:
    beta_schedule: BetaSchedule
    phi_r: float
    phi_d: float
    n0: float
    mode: TransmissionMode = field(default=TransmissionMode.DENSITY)

    def __post_init__(self):
        object.__setattr__(self, "mode", TransmissionMode(self.mode))
        for name in ("phi_r", "phi_d", "n0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def removal_rate(self) -> float:
        return self.phi_r + self.phi_d

    def as_dict(self) -> dict:
        """Flat view for logs, error context and reports."""
        return {
            "beta": self.beta_schedule.base_beta,
            "phi_r": self.phi_r,
            "phi_d": self.phi_d,
        }
