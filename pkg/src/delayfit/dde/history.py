"""Prescribed solution values before t0."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from delayfit.errors import DomainError


class _Constant:
    def __init__(self, state: Sequence[float]):
        self.state = np.asarray(state, dtype=float)

    def __call__(self, times: np.ndarray) -> np.ndarray:
        return np.tile(self.state, (times.size, 1))


class _PiecewiseLinear:
    def __init__(self, times: Sequence[float], values: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, times: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [np.interp(times, self.times, self.values[:, j]) for j in range(self.values.shape[1])]
        )


def _domain_tol(*points: float) -> float:
    return 1e-9 * max(1.0, *(abs(p) for p in points))


@dataclass(frozen=True, eq=False)
class HistoryFunction:
    """State on ``[t_min, t0]``.

    ``evaluator`` maps an array of times to an ``(n, dim)`` array. ``knots`` lists
    interior times where the history has a derivative jump; the integrator
    shifts them by each lag to seed breakpoints.
    """

    t_min: float
    t0: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    knots: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.t_min <= self.t0:
            raise ValueError(f"empty history domain [{self.t_min}, {self.t0}]")

    @classmethod
    def constant(cls, state: Sequence[float], t0: float, t_min: float) -> "HistoryFunction":
        return cls(float(t_min), float(t0), _Constant(state))

    @classmethod
    def linear(
        cls,
        times: Sequence[float],
        values: np.ndarray,
        t_min: float | None = None,
        t0: float | None = None,
    ) -> "HistoryFunction":
        """Piecewise-linear interpolant through ``(times[k], values[k])``.

        The domain defaults to the sample span and may be narrowed to
        ``[t_min, t0]`` inside it.
        """
        times = np.asarray(times, dtype=float)
        if times.size < 1 or np.any(np.diff(times) <= 0):
            raise ValueError("history sample times must be strictly increasing")
        t_min = float(times[0]) if t_min is None else float(t_min)
        t0 = float(times[-1]) if t0 is None else float(t0)
        if t_min < times[0] or t0 > times[-1]:
            raise ValueError("history domain exceeds the sample span")
        return cls(
            t_min,
            t0,
            _PiecewiseLinear(times, values),
            knots=tuple(float(t) for t in times if t_min < t < t0),
        )

    def __call__(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        tol = _domain_tol(self.t_min, self.t0)
        outside = (times < self.t_min - tol) | (times > self.t0 + tol)
        if outside.any():
            bad = float(times[outside][0])
            raise DomainError(
                f"t={bad:g} outside history domain [{self.t_min:g}, {self.t0:g}]", time=bad
            )
        clipped = np.clip(times, self.t_min, self.t0)
        return np.asarray(self.evaluator(clipped), dtype=float).reshape(times.size, -1)

    def at(self, t: float) -> np.ndarray:
        return self(t)[0]
