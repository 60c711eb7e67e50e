"""Fitting windows and the data-driven history that precedes them.

Day 0 is the window's first date; history rows carry negative day offsets.
"""

import logging
import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from delayfit.data.series import EpidemicSeries
from delayfit.dde import HistoryFunction
from delayfit.errors import DomainError

logger = logging.getLogger(__name__)

_TOL = 1e-9


@dataclass(frozen=True)
class DataWindow:
    start_date: date
    end_date: date
    history_days: int = 0

    def __post_init__(self):
        if self.end_date < self.start_date:
            raise ValueError(
                f"end_date {self.end_date.isoformat()} precedes start_date "
                f"{self.start_date.isoformat()}"
            )
        if self.history_days < 0:
            raise ValueError("history_days must be >= 0")

    @classmethod
    def covering(cls, series: EpidemicSeries, history_days: int = 0) -> "DataWindow":
        """Everything after the first ``history_days`` rows of ``series``."""
        return cls(series.start + timedelta(days=history_days), series.end, history_days)

    @property
    def length(self) -> int:
        return (self.end_date - self.start_date).days + 1

    def check_lag(self, max_lag: float) -> None:
        if self.history_days < max_lag:
            raise DomainError(
                f"history_days={self.history_days} is shorter than the largest lag {max_lag:g}",
                sigma=max_lag,
            )


@dataclass(frozen=True)
class FittingData:
    """Measured window plus the history segment that ends on its first day."""

    window: EpidemicSeries
    history: EpidemicSeries

    @property
    def sample_days(self) -> np.ndarray:
        return self.window.days

    @property
    def t_end(self) -> float:
        return float(self.window.days[-1])

    @property
    def start_date(self) -> date:
        return self.window.start

    def history_function(self, max_lag: float) -> HistoryFunction:
        return build_history(self.history, 0.0, max_lag)


def slice_window(series: EpidemicSeries, window: DataWindow) -> FittingData:
    """Cut the fitting window and its history segment out of ``series``.

    The history segment spans ``history_days`` days before the start date and
    includes the start date itself, so its last row is the initial state.
    """
    first = window.start_date - timedelta(days=window.history_days)
    if first < series.start or window.end_date > series.end:
        raise DomainError(
            f"window {first.isoformat()} .. {window.end_date.isoformat()} "
            f"(including {window.history_days} history days) is outside the data range "
            f"{series.start.isoformat()} .. {series.end.isoformat()}"
        )
    lo = series.index_of(first)
    start = series.index_of(window.start_date)
    stop = series.index_of(window.end_date) + 1
    data = FittingData(
        window=series.subset(start, stop, origin=window.start_date),
        history=series.subset(lo, start + 1, origin=window.start_date),
    )
    logger.debug(
        "window %s .. %s: %d fitting days, %d history days",
        window.start_date.isoformat(), window.end_date.isoformat(),
        window.length, window.history_days,
    )
    return data


def build_history(series: EpidemicSeries, t0: float, max_lag: float) -> HistoryFunction:
    """Piecewise-linear interpolant of the measured states on ``[t0 - max_lag, t0]``."""
    days = series.days
    t_min = t0 - max_lag
    available = t0 - days[0]
    if days[0] > t_min + _TOL or days[-1] < t0 - _TOL:
        raise DomainError(
            f"history needs {max_lag:g} days of data before day {t0:g}, "
            f"but only {max(available, 0):g} are available",
            time=t_min,
            sigma=max_lag,
        )
    lo = int(np.searchsorted(days, math.floor(t_min + _TOL), side="right")) - 1
    hi = int(np.searchsorted(days, math.ceil(t0 - _TOL), side="left"))
    lo, hi = max(lo, 0), min(hi, days.size - 1)
    times = days[lo : hi + 1]
    states = series.states()[lo : hi + 1]
    t_min = max(t_min, float(times[0]))
    t0 = min(t0, float(times[-1]))
    if times.size == 1:
        return HistoryFunction.constant(states[0], t0=t0, t_min=t_min)
    return HistoryFunction.linear(times, states, t_min=t_min, t0=t0)
