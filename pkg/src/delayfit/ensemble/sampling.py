"""Gaussian draws of the epidemic rates, one independent stream per run."""

from dataclasses import dataclass

import numpy as np

from delayfit.errors import SamplingError
from delayfit.model import BetaSchedule, ModelParams, TransmissionMode

MAX_REJECTIONS = 100


@dataclass(frozen=True)
class ParamDistributions:
    """Independent normals N(mean, rel_std * mean) for beta, phi_r and phi_d.

    ``beta_mean`` is in the units of ``mode``; the breakpoints of the
    intervention schedule are applied to every drawn beta.
    """

    beta_mean: float
    phi_r_mean: float
    phi_d_mean: float
    n0: float
    rel_std: float = 0.05
    mode: TransmissionMode = TransmissionMode.FREQUENCY
    breakpoints: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", TransmissionMode(self.mode))
        object.__setattr__(
            self, "breakpoints", tuple((float(t), float(m)) for t, m in self.breakpoints)
        )
        for name in ("beta_mean", "phi_r_mean", "phi_d_mean", "n0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.rel_std >= 0:
            raise ValueError("rel_std must be >= 0")
        BetaSchedule(self.beta_mean, self.breakpoints)

    @property
    def means(self) -> np.ndarray:
        return np.array([self.beta_mean, self.phi_r_mean, self.phi_d_mean])

    def params(self, beta: float, phi_r: float, phi_d: float) -> ModelParams:
        return ModelParams(
            beta_schedule=BetaSchedule(float(beta), self.breakpoints),
            phi_r=float(phi_r),
            phi_d=float(phi_d),
            n0=self.n0,
            mode=self.mode,
        )

    def mean_params(self) -> ModelParams:
        return self.params(*self.means)


@dataclass(frozen=True)
class ParameterDraw:
    index: int
    params: ModelParams
    redraws: int = 0


def draw_params(dists: ParamDistributions, draw_index: int, seed: int) -> ParameterDraw:
    """Draw for run ``draw_index``; the stream depends only on ``(seed, draw_index)``.

    Draws with any non-positive rate are discarded and the triple redrawn.

    Raises:
        SamplingError: ``MAX_REJECTIONS`` consecutive draws were rejected
    """
    rng = np.random.default_rng([seed, draw_index])
    means = dists.means
    scales = dists.rel_std * means
    for redraws in range(MAX_REJECTIONS):
        beta, phi_r, phi_d = rng.normal(means, scales)
        if beta > 0 and phi_r > 0 and phi_d > 0:
            return ParameterDraw(draw_index, dists.params(beta, phi_r, phi_d), redraws)
    raise SamplingError(
        f"draw {draw_index}: {MAX_REJECTIONS} consecutive draws had a non-positive rate "
        f"(rel_std={dists.rel_std:g} is too wide)"
    )


def sample_params(dists: ParamDistributions, draw_index: int, seed: int) -> ModelParams:
    return draw_params(dists, draw_index, seed).params
