"""Least-squares misfit between simulated and measured compartments."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from delayfit.calibrate.simulate import ForwardModel, Simulation
from delayfit.data import FittingData
from delayfit.dde import SolverConfig
from delayfit.errors import DataError
from delayfit.model import COMPARTMENTS, DelayKernel, ModelParams

FITTABLE = ("i", "r", "d")


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """Which compartments enter the misfit and on which days.

    ``sample_times`` defaults to every day of the fitting window. With
    ``normalize`` each compartment's squared residual sum is divided by the
    squared norm of its measured values.
    """

    compartments: tuple[str, ...] = ("i", "d")
    sample_times: np.ndarray | None = None
    normalize: bool = False

    def __post_init__(self):
        comps = tuple(dict.fromkeys(str(c).lower() for c in self.compartments))
        if not comps:
            raise ValueError("at least one compartment is required")
        bad = [c for c in comps if c not in FITTABLE]
        if bad:
            raise ValueError(f"unknown compartment(s) {bad}; choose from {list(FITTABLE)}")
        object.__setattr__(self, "compartments", comps)
        if self.sample_times is not None:
            times = np.array(self.sample_times, dtype=float)
            if times.ndim != 1 or times.size == 0:
                raise ValueError("sample_times must be a non-empty list")
            times.setflags(write=False)
            object.__setattr__(self, "sample_times", times)

    @property
    def label(self) -> str:
        return ",".join(self.compartments)

    def rows(self, data: FittingData) -> np.ndarray:
        """Indices of the sample times among the window's data days."""
        days = data.sample_days
        if self.sample_times is None:
            return np.arange(days.size)
        idx = np.searchsorted(days, self.sample_times)
        ok = (idx < days.size) & (days[np.minimum(idx, days.size - 1)] == self.sample_times)
        if not ok.all():
            bad = self.sample_times[~ok][0]
            raise DataError(f"sample time {bad:g} is not a data day of the fitting window")
        return idx

    def columns(self) -> list[int]:
        return [COMPARTMENTS.index(c) for c in self.compartments]


def residuals(states: np.ndarray, spec: ObjectiveSpec, data: FittingData) -> np.ndarray:
    """Stacked (simulated - measured) over the selected compartments and sample days.

    With ``spec.normalize`` each compartment's block is divided by the norm of
    its measured values, so the misfit is always the squared norm of this vector.
    """
    rows = spec.rows(data)
    measured = data.window.states()[rows]
    blocks = []
    for col in spec.columns():
        block = states[rows, col] - measured[:, col]
        if spec.normalize:
            scale = float(np.linalg.norm(measured[:, col]))
            if scale == 0.0:
                raise DataError(
                    f"cannot normalize compartment {COMPARTMENTS[col]}: "
                    "measured values are all zero"
                )
            block = block / scale
        blocks.append(block)
    return np.concatenate(blocks)


def misfit(states: np.ndarray, spec: ObjectiveSpec, data: FittingData) -> float:
    """Objective value for already sampled states (rows aligned with the window)."""
    r = residuals(states, spec, data)
    return float(r @ r)


def objective(
    weights,
    params: ModelParams,
    spec: ObjectiveSpec,
    data: FittingData,
    sigmas: Sequence[float],
    config: SolverConfig | None = None,
) -> float:
    """Sum over sample days and selected compartments of (simulated - measured)^2."""
    model = ForwardModel(params, sigmas, data, config)
    return misfit(model.run(weights).states, spec, data)


def relative_l2_error(sim, meas) -> float:
    """||sim - meas||_2 / ||meas||_2.

    >>> relative_l2_error([2.0, 4.0], [1.0, 2.0])
    1.0
    """
    sim = np.asarray(sim, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if sim.shape != meas.shape or sim.ndim != 1 or sim.size == 0:
        raise ValueError(f"need equal non-empty 1-d series, got {sim.shape} and {meas.shape}")
    norm = float(np.linalg.norm(meas))
    if norm == 0.0:
        raise DataError("relative error undefined: measured series is identically zero")
    return float(np.linalg.norm(sim - meas)) / norm


def compartment_errors(simulation: Simulation, data: FittingData) -> dict[str, float]:
    measured = data.window.states()
    return {
        name: relative_l2_error(simulation.states[:, j], measured[:, j])
        for j, name in enumerate(COMPARTMENTS)
    }


def fitted_errors(
    params: ModelParams,
    kernel: DelayKernel,
    data: FittingData,
    config: SolverConfig | None = None,
) -> dict[str, float]:
    """Relative L2 error of each of s, i, r, d over the fitting window."""
    model = ForwardModel(params, kernel.sigmas, data, config)
    return compartment_errors(model.run(kernel.weights), data)
