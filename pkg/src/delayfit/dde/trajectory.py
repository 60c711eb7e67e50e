"""Dense DDE solution: step endpoints plus cubic Hermite segments."""

from dataclasses import dataclass, field

import numpy as np

from delayfit.dde.history import HistoryFunction
from delayfit.errors import DomainError


@dataclass
class SolveStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0


def evaluate_dense(
    query,
    times: np.ndarray,
    states: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    history: HistoryFunction,
) -> np.ndarray:
    """Evaluate history-or-Hermite at every query time; returns ``(n, dim)``.

    ``left[k]``/``right[k]`` are the derivatives at the start/end of segment k
    (``right`` is the left limit at the segment end).
    """
    query = np.atleast_1d(np.asarray(query, dtype=float))
    out = np.empty((query.size, states.shape[1]))

    before = query < times[0]
    if before.any():
        out[before] = history(query[before])

    after = ~before
    if not after.any():
        return out

    q = query[after]
    t_end = times[-1]
    beyond = q > t_end + 1e-9 * max(1.0, abs(t_end))
    if beyond.any():
        bad = float(q[beyond][0])
        raise DomainError(f"t={bad:g} beyond the solved span ending at {t_end:g}", time=bad)
    q = np.minimum(q, t_end)

    if times.size == 1:
        out[after] = states[0]
        return out

    k = np.clip(np.searchsorted(times, q, side="right") - 1, 0, times.size - 2)
    h = (times[k + 1] - times[k])[:, None]
    th = ((q - times[k]) / h[:, 0])[:, None]
    th2 = th * th
    th3 = th2 * th
    out[after] = (
        (2 * th3 - 3 * th2 + 1) * states[k]
        + (th3 - 2 * th2 + th) * h * left[k]
        + (3 * th2 - 2 * th3) * states[k + 1]
        + (th3 - th2) * h * right[k]
    )
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Immutable solution on ``[history.t_min, t_end]``."""

    times: np.ndarray
    states: np.ndarray
    left_slopes: np.ndarray
    right_slopes: np.ndarray
    history: HistoryFunction
    stats: SolveStats = field(default_factory=SolveStats)

    def __post_init__(self):
        for name in ("times", "states", "left_slopes", "right_slopes"):
            getattr(self, name).setflags(write=False)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def segments(self) -> int:
        return int(self.times.size - 1)

    def __call__(self, query) -> np.ndarray:
        return evaluate_dense(
            query, self.times, self.states, self.left_slopes, self.right_slopes, self.history
        )

    def eval(self, t: float) -> np.ndarray:
        """State at a single time; exact at step endpoints, history before t0."""
        return self(t)[0]
