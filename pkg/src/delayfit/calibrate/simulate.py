"""Forward solves of the delayed SIRD model over a fitting window."""

import logging
from dataclasses import dataclass, replace

import numpy as np

from delayfit.data import EpidemicSeries, FittingData
from delayfit.dde import SolverConfig, Trajectory, integrate
from delayfit.errors import DomainError, SolverError
from delayfit.model import DelayKernel, ModelParams, sird_field

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Simulation:
    """Daily samples (``(n, 4)`` rows of s, i, r, d) and the dense solve behind them."""

    days: np.ndarray
    states: np.ndarray
    trajectory: Trajectory

    def column(self, compartment: str) -> np.ndarray:
        return self.states[:, "sird".index(compartment)]


class ForwardModel:
    """Fixed rates, data and lag grid; solves for any weight vector on that grid.

    The history interpolant and the breakpoint set are built once and shared
    by every solve, which is what a fit needs.
    """

    def __init__(
        self,
        params: ModelParams,
        sigmas,
        data: FittingData,
        config: SolverConfig | None = None,
    ):
        self.params = params
        self.sigmas = np.asarray(sigmas, dtype=float)
        self.data = data
        t_end = data.t_end
        if not t_end > 0:
            raise DomainError("the fitting window needs at least two days")
        self.t_end = t_end
        self.history = data.history_function(float(self.sigmas.max()))
        config = config or SolverConfig()
        extra = tuple(t for t in params.beta_schedule.times if 0 < t < t_end)
        self.config = replace(config, forced_breakpoints=config.forced_breakpoints + extra)
        self.solves = 0

    def kernel(self, weights) -> DelayKernel:
        return DelayKernel(self.sigmas, weights)

    def solve(self, weights, mesh=None) -> Trajectory:
        self.solves += 1
        try:
            return integrate(
                sird_field(self.params, self.kernel(weights)),
                self.history,
                (0.0, self.t_end),
                self.sigmas,
                self.config,
                mesh=mesh,
            )
        except SolverError as exc:
            if exc.params is not None:
                raise
            raise SolverError(str(exc), params=self.params.as_dict()) from exc

    def sample(self, trajectory: Trajectory, days=None) -> np.ndarray:
        days = self.data.sample_days if days is None else np.asarray(days, dtype=float)
        return trajectory(days)

    def run(self, weights, mesh=None) -> Simulation:
        trajectory = self.solve(weights, mesh=mesh)
        days = self.data.sample_days
        return Simulation(days=days, states=self.sample(trajectory, days), trajectory=trajectory)


def simulate(
    params: ModelParams,
    kernel: DelayKernel,
    data: FittingData,
    config: SolverConfig | None = None,
) -> Simulation:
    """One integration from the measured state at day 0, sampled at every data day.

    Raises:
        DomainError: the history segment is shorter than the kernel's largest lag
        SolverError: the integrator failed; the rates in use are attached
    """
    model = ForwardModel(params, kernel.sigmas, data, config)
    result = model.run(kernel.weights)
    logger.debug(
        "simulated %d days with %d steps", result.days.size, result.trajectory.segments
    )
    return result


def synthesize(
    params: ModelParams,
    kernel: DelayKernel,
    data: FittingData,
    config: SolverConfig | None = None,
) -> FittingData:
    """Replace the measured window with model output; the history is kept.

    Data generated this way has a known optimum at ``kernel.weights``.
    """
    states = simulate(params, kernel, data, config).states
    window = data.window
    synthetic = EpidemicSeries(
        dates=window.dates,
        infected=states[:, 1],
        recovered=states[:, 2],
        deceased=states[:, 3],
        n0=window.n0,
        origin=window.origin,
    )
    return FittingData(window=synthetic, history=data.history)
