from datetime import date, timedelta

import numpy as np
import pytest

from delayfit.data import DataWindow, EpidemicSeries, load_reference, slice_window
from delayfit.model import BetaSchedule, ModelParams, TransmissionMode, delay_grid

N0 = 60_000_000
BETA = 0.1131
PHI_R = 1 / 24
PHI_D = 1 / 940


@pytest.fixture(scope="session")
def reference():
    return load_reference()


@pytest.fixture
def published_params():
    return ModelParams(
        beta_schedule=BetaSchedule(BETA, ((73.0, 1 / 3),)),
        phi_r=PHI_R,
        phi_d=PHI_D,
        n0=N0,
        mode=TransmissionMode.FREQUENCY,
    )


@pytest.fixture
def published_grid():
    return delay_grid(2, 35, 12)


@pytest.fixture(scope="session")
def published_data(reference):
    """Published window: 150 fitting days after 35 history days."""
    return slice_window(reference, DataWindow(date(2020, 9, 11), date(2021, 2, 7), 35))


@pytest.fixture(scope="session")
def short_data(reference):
    """First 40 days of the published window; fast enough for fits in unit tests."""
    return slice_window(reference, DataWindow(date(2020, 9, 11), date(2020, 10, 20), 35))


def make_series(infected, recovered, deceased, n0=1000.0, start=date(2020, 1, 1)):
    dates = tuple(start + timedelta(days=k) for k in range(len(infected)))
    return EpidemicSeries(
        dates=dates,
        infected=np.asarray(infected, dtype=float),
        recovered=np.asarray(recovered, dtype=float),
        deceased=np.asarray(deceased, dtype=float),
        n0=n0,
    )


def write_rows(path, rows, header="date,infected,recovered,deceased"):
    path.write_text("\n".join([header, *rows]) + "\n")
    return path
