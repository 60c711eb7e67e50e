"""Plot-ready files written by the simulate and fit commands."""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from delayfit.calibrate import FitResult, Simulation
from delayfit.data import FittingData
from delayfit.model import COMPARTMENTS, DelayKernel, ModelParams, stability_margin

FLOAT_FORMAT = "%.17g"


def trajectory_frame(simulation: Simulation, data: FittingData, residuals: bool = True):
    window = data.window
    frame = pd.DataFrame(
        {
            "day": simulation.days.astype(int),
            "date": [d.isoformat() for d in window.dates],
        }
    )
    for j, name in enumerate(COMPARTMENTS):
        frame[name] = simulation.states[:, j]
    if residuals:
        measured = window.states()
        for j, name in enumerate(COMPARTMENTS):
            frame[f"{name}_residual"] = simulation.states[:, j] - measured[:, j]
    return frame


def write_trajectory(path, simulation: Simulation, data: FittingData, residuals: bool = True):
    path = Path(path)
    trajectory_frame(simulation, data, residuals).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def write_weights(path, kernel: DelayKernel) -> Path:
    path = Path(path)
    pd.DataFrame({"sigma": kernel.sigmas, "weight": kernel.weights}).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def fit_document(
    fit: FitResult,
    errors: dict[str, float],
    params: ModelParams,
    compartments,
) -> dict:
    margins = stability_margin(params, fit.kernel)
    return {
        "fit": fit.to_dict(),
        "compartments": list(compartments),
        "params": params.as_dict(),
        "errors": {name: errors[name] for name in COMPARTMENTS},
        "stability": {
            "margins": [float(m) for m in margins],
            "min_margin": float(np.min(margins)),
            "stable": bool(np.all(margins > 0)),
        },
    }


def write_fit(path, document: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(document, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path
