"""Adaptive Bogacki-Shampine 3(2) integrator for constant-lag DDEs.

Lagged states are read from the dense output built so far. Steps never exceed
the smallest lag, so every lagged time inside a step already lies in the
solved past.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from delayfit.dde.history import HistoryFunction
from delayfit.dde.trajectory import SolveStats, Trajectory, evaluate_dense
from delayfit.errors import DomainError, SolverError

logger = logging.getLogger(__name__)

MIN_STEP = 1e-10
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Bogacki-Shampine tableau; B is the 3rd order solution, E the embedded difference.
C2, C3 = 1 / 2, 3 / 4
B1, B2, B3 = 2 / 9, 1 / 3, 4 / 9
E1, E2, E3, E4 = -5 / 72, 1 / 12, 1 / 9, -1 / 8

VectorField = Callable[[float, np.ndarray, Callable[[np.ndarray], np.ndarray]], np.ndarray]


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    max_step: float = float("inf")
    initial_step: float | None = None
    forced_breakpoints: tuple[float, ...] = ()
    max_steps: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(
            self, "forced_breakpoints", tuple(float(t) for t in self.forced_breakpoints)
        )
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be > 0")
        if not self.max_step > 0:
            raise ValueError("max_step must be > 0")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be > 0")


class _DenseStore:
    """Growing arrays behind the in-progress dense output."""

    def __init__(self, history: HistoryFunction, t0: float, y0: np.ndarray, capacity: int = 512):
        dim = y0.size
        self.history = history
        self.times = np.empty(capacity)
        self.states = np.empty((capacity, dim))
        self.left = np.empty((capacity, dim))
        self.right = np.empty((capacity, dim))
        self.times[0] = t0
        self.states[0] = y0
        self.n = 1

    def _grow(self):
        cap = 2 * self.times.size
        self.times = np.resize(self.times, cap)
        self.states = np.resize(self.states, (cap, self.states.shape[1]))
        self.left = np.resize(self.left, (cap, self.left.shape[1]))
        self.right = np.resize(self.right, (cap, self.right.shape[1]))

    def append(self, t: float, y: np.ndarray, f_left: np.ndarray, f_right: np.ndarray):
        if self.n == self.times.size:
            self._grow()
        self.left[self.n - 1] = f_left
        self.right[self.n - 1] = f_right
        self.times[self.n] = t
        self.states[self.n] = y
        self.n += 1

    def __call__(self, query) -> np.ndarray:
        n = self.n
        return evaluate_dense(
            query,
            self.times[:n],
            self.states[:n],
            self.left[: n - 1],
            self.right[: n - 1],
            self.history,
        )

    def freeze(self, stats: SolveStats) -> Trajectory:
        n = self.n
        return Trajectory(
            times=self.times[:n].copy(),
            states=self.states[:n].copy(),
            left_slopes=self.left[: n - 1].copy(),
            right_slopes=self.right[: n - 1].copy(),
            history=self.history,
            stats=stats,
        )


def seed_breakpoints(
    t0: float,
    t_end: float,
    lags: Sequence[float],
    knots: Sequence[float] = (),
    forced: Sequence[float] = (),
) -> np.ndarray:
    """Times the integrator must land on, ending with ``t_end``.

    Derivative jumps at t0 travel forward by one and two lags; history knots
    travel by one lag. Deeper levels are smoothed enough for error control.
    """
    lags = np.asarray(lags, dtype=float)
    first = t0 + lags
    second = (first[:, None] + lags[None, :]).ravel()
    shifted = (np.asarray(knots, dtype=float)[:, None] + lags[None, :]).ravel()
    candidates = np.concatenate([first, second, shifted, np.asarray(forced, dtype=float)])
    tol = 1e-12 * max(1.0, abs(t_end))
    inside = candidates[(candidates > t0 + tol) & (candidates < t_end - tol)]
    points = np.unique(inside)
    if points.size:
        keep = np.concatenate([[True], np.diff(points) > tol])
        points = points[keep]
    return np.append(points, t_end)


def _initial_step(y0, f0, rel_tol, abs_tol, cap) -> float:
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(h0, cap)


def integrate(
    fun: VectorField,
    history: HistoryFunction,
    t_span: Sequence[float],
    lags: Sequence[float],
    config: SolverConfig | None = None,
    mesh: Sequence[float] | None = None,
) -> Trajectory:
    """Solve ``y'(t) = fun(t, y(t), lagged)`` on ``t_span`` from ``history``.

    ``lagged(times)`` returns the solution (or history) at past times. With
    ``mesh`` the given step sequence is replayed without error control.
    """
    config = config or SolverConfig()
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed t0={t0}")
    lags = np.sort(np.asarray(lags, dtype=float))
    if lags.size == 0 or np.any(lags <= 0):
        raise ValueError("lags must be non-empty and > 0")
    if abs(history.t0 - t0) > 1e-9 * max(1.0, abs(t0)):
        raise ValueError(f"history ends at {history.t0}, integration starts at {t0}")
    needed = t0 - lags[-1]
    if history.t_min > needed + 1e-9 * max(1.0, abs(needed)):
        raise DomainError(
            f"history starts at {history.t_min:g} but the largest lag needs data from {needed:g}",
            time=needed,
            sigma=float(lags[-1]),
        )
    for bp in config.forced_breakpoints:
        if not t0 <= bp <= t_end:
            raise ValueError(f"forced breakpoint {bp} outside [{t0}, {t_end}]")

    stops = seed_breakpoints(t0, t_end, lags, history.knots, config.forced_breakpoints)
    y0 = history.at(t0)
    store = _DenseStore(history, t0, y0)
    stats = SolveStats()

    def call(t, y):
        stats.rhs_evals += 1
        return np.asarray(fun(t, y, store), dtype=float)

    if mesh is not None:
        _replay(call, store, stats, np.asarray(mesh, dtype=float), stops, t0, t_end, lags[0])
    else:
        _adaptive(call, store, stats, config, stops, t0, t_end, lags[0])

    logger.debug(
        "integrated [%g, %g]: %d accepted, %d rejected, %d rhs evals",
        t0, t_end, stats.accepted, stats.rejected, stats.rhs_evals,
    )
    return store.freeze(stats)


def _stages(call, t, y, f, h, t_last):
    k2 = call(t + C2 * h, y + C2 * h * f)
    k3 = call(t + C3 * h, y + C3 * h * k2)
    y_new = y + h * (B1 * f + B2 * k2 + B3 * k3)
    k4 = call(t_last, y_new)
    return y_new, k2, k3, k4


def _adaptive(call, store, stats, config, stops, t0, t_end, min_lag):
    cap = min(config.max_step, min_lag)
    t = t0
    y = store.states[0].copy()
    f = call(t, y)
    h_try = config.initial_step or _initial_step(y, f, config.rel_tol, config.abs_tol, cap)
    stop = 0

    while t < t_end:
        target = stops[stop]
        h = min(h_try, cap)
        remaining = target - t
        land = h >= remaining
        if land:
            h = remaining
        elif 2 * h > remaining:
            h = remaining / 2
        if h < MIN_STEP:
            raise SolverError(
                f"step size {h:.3g} below {MIN_STEP:g} at t={t:.10g}; "
                "stiff dynamics or an unresolved discontinuity"
            )
        if stats.accepted + stats.rejected >= config.max_steps:
            raise SolverError(f"exceeded {config.max_steps} steps at t={t:.10g}")

        t_new = target if land else t + h
        # left limit at a breakpoint, so piecewise rates stay on the old side
        t_last = np.nextafter(t_new, -np.inf) if land else t_new
        y_new, k2, k3, k4 = _stages(call, t, y, f, h, t_last)

        err = h * (E1 * f + E2 * k2 + E3 * k3 + E4 * k4)
        scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))

        if not np.isfinite(err_norm) or not np.all(np.isfinite(y_new)):
            stats.rejected += 1
            h_try = h * MIN_FACTOR
            continue

        if err_norm > 1.0:
            stats.rejected += 1
            h_try = h * max(MIN_FACTOR, SAFETY * err_norm ** (-1 / 3))
            continue

        stats.accepted += 1
        store.append(t_new, y_new, f, k4)
        factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** (-1 / 3))
        t, y = t_new, y_new
        if land:
            stop += 1
            h_try = max(h_try, h * factor)
            if t < t_end:
                f = call(t, y)
        else:
            h_try = h * factor
            f = k4


def _replay(call, store, stats, mesh, stops, t0, t_end, min_lag):
    if mesh[0] != t0 or mesh[-1] != t_end or np.any(np.diff(mesh) <= 0):
        raise ValueError("mesh must increase strictly from t0 to t_end")
    if np.any(np.diff(mesh) > min_lag * (1 + 1e-12)):
        raise ValueError("mesh steps may not exceed the smallest lag")
    stop_set = set(stops.tolist())

    t = t0
    y = store.states[0].copy()
    f = call(t, y)
    for t_new in mesh[1:]:
        t_new = float(t_new)
        at_stop = t_new in stop_set
        t_last = np.nextafter(t_new, -np.inf) if at_stop else t_new
        y_new, _, _, k4 = _stages(call, t, y, f, t_new - t, t_last)
        if not np.all(np.isfinite(y_new)):
            raise SolverError(f"non-finite state at t={t_new:.10g} on a fixed mesh")
        stats.accepted += 1
        store.append(t_new, y_new, f, k4)
        t, y = t_new, y_new
        if t < t_end:
            f = call(t, y) if at_stop else k4
