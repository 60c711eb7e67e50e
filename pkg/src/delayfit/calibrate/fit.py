"""Simplex-constrained least-squares fit of the delay weights.

Projected descent with a monotone Armijo backtrack, so every iterate stays on
the simplex and the objective never increases. The search direction points at
the minimizer of the Gauss-Newton model ``||r + D z||^2`` over the simplex,
where ``D`` holds one-sided finite-difference derivatives of the residual
vector along the feasible directions ``e_j - w``. When that model is
degenerate the direction falls back to a projected Barzilai-Borwein gradient
step.

Every solve of one fit replays the step mesh of the adaptive solve at the
initial weights, so the minimized objective is a single smooth function of the
weights.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from delayfit.calibrate.objective import ObjectiveSpec, misfit, residuals
from delayfit.calibrate.simplex import project_simplex, simplex_lattice
from delayfit.calibrate.simulate import ForwardModel
from delayfit.data import FittingData
from delayfit.dde import SolverConfig
from delayfit.errors import DelayfitError, FitError
from delayfit.model import DelayKernel, ModelParams

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 40
STEP_MIN = 1e-30
STEP_MAX = 1e30
# weight of the sum-to-one row in the bounded least-squares subproblem
EQUALITY_WEIGHT = 1e5


@dataclass(frozen=True, eq=False)
class FitResult:
    sigmas: np.ndarray
    weights: np.ndarray
    objective_value: float
    kkt_residual: float
    iterations: int
    converged: bool
    stopped: str = "tolerance"
    history: tuple[float, ...] = ()
    evaluations: int = 0

    @property
    def kernel(self) -> DelayKernel:
        return DelayKernel(self.sigmas, self.weights)

    def to_dict(self) -> dict:
        return {
            "sigmas": [float(s) for s in self.sigmas],
            "weights": [float(w) for w in self.weights],
            "objective_value": self.objective_value,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "stopped": self.stopped,
            "evaluations": self.evaluations,
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FitResult":
        return cls(
            sigmas=np.asarray(raw["sigmas"], dtype=float),
            weights=np.asarray(raw["weights"], dtype=float),
            objective_value=float(raw["objective_value"]),
            kkt_residual=float(raw["kkt_residual"]),
            iterations=int(raw["iterations"]),
            converged=bool(raw["converged"]),
            stopped=str(raw.get("stopped", "tolerance")),
            history=tuple(float(v) for v in raw.get("history", ())),
            evaluations=int(raw.get("evaluations", 0)),
        )


@dataclass
class _Problem:
    model: ForwardModel
    spec: ObjectiveSpec
    data: FittingData
    fd_step: float
    mesh: np.ndarray
    iterate: int = 0

    def residual(self, weights) -> np.ndarray:
        trajectory = self.model.solve(weights, mesh=self.mesh)
        return residuals(self.model.sample(trajectory), self.spec, self.data)

    def trial(self, weights) -> tuple[float, np.ndarray]:
        try:
            r = self.residual(weights)
        except DelayfitError as exc:
            raise FitError(
                f"line search trial at iteration {self.iterate} failed: {exc}"
            ) from exc
        return float(r @ r), r

    def jacobian(self, weights: np.ndarray, base: np.ndarray) -> np.ndarray:
        """Columns D_j ~ dr/dt of r(w + t (e_j - w)), second order in the step."""
        h = self.fd_step
        k = weights.size
        columns = np.empty((base.size, k))
        for j in range(k):
            unit = np.zeros(k)
            unit[j] = 1.0
            try:
                near = self.residual((1 - h) * weights + h * unit)
                far = self.residual((1 - 2 * h) * weights + 2 * h * unit)
            except DelayfitError as exc:
                raise FitError(
                    f"finite-difference solve along lag {j} (sigma={self.model.sigmas[j]:g}) "
                    f"at iteration {self.iterate} failed: {exc}"
                ) from exc
            columns[:, j] = (4.0 * (near - base) - (far - base)) / (2.0 * h)
        return columns


def kkt_residual(weights: np.ndarray, grad: np.ndarray, scale: float) -> float:
    """||w - P(w - grad / scale)||; zero exactly at constrained stationary points."""
    return float(np.linalg.norm(weights - project_simplex(weights - grad / scale)))


def spectral_step(s: np.ndarray, y: np.ndarray, previous: float) -> float:
    """Barzilai-Borwein length s.s / s.y; keeps ``previous`` when s.y <= 0."""
    sy = float(s @ y)
    if not sy > 0:
        return previous
    return min(STEP_MAX, max(STEP_MIN, float(s @ s) / sy))


def model_minimizer(base: np.ndarray, columns: np.ndarray) -> np.ndarray | None:
    """Minimizer of ``||base + columns @ z||^2`` over the simplex.

    For ``z`` on the simplex ``z - w = sum_j z_j (e_j - w)``, so this is the
    Gauss-Newton model of the residual at ``z``. Solved as non-negative least
    squares with a heavily weighted sum-to-one row, then projected. Returns
    None when the model carries no information.
    """
    scale = max(float(np.linalg.norm(columns)), float(np.linalg.norm(base)))
    if not np.isfinite(scale) or scale == 0.0:
        return None
    k = columns.shape[1]
    a = np.vstack([columns / scale, np.full((1, k), EQUALITY_WEIGHT)])
    b = np.append(-base / scale, EQUALITY_WEIGHT)
    try:
        z, _ = nnls(a, b)
    except (RuntimeError, ValueError) as exc:
        logger.debug("bounded least-squares subproblem failed: %s", exc)
        return None
    if not np.all(np.isfinite(z)) or not z.sum() > 0:
        return None
    return project_simplex(z)


def _direction(w, base, columns, grad, step) -> tuple[np.ndarray, str]:
    target = model_minimizer(base, columns)
    if target is not None:
        direction = target - w
        if float(grad @ direction) < 0:
            return direction, "gauss-newton"
    return project_simplex(w - step * grad) - w, "gradient"


def fit_weights(
    params: ModelParams,
    spec: ObjectiveSpec,
    data: FittingData,
    init: DelayKernel,
    tol: float = 1e-6,
    max_iter: int = 200,
    config: SolverConfig | None = None,
    fd_step: float = 1e-6,
) -> FitResult:
    """Minimize the misfit over the weights of ``init``'s lag grid.

    Args:
        params: fixed rates for this fit
        spec: compartments and sample days entering the misfit
        data: fitting window plus history
        init: starting kernel; its lags define the grid
        tol: bound on the KKT residual, relative to the initial gradient norm
        max_iter: iteration cap; reaching it returns ``converged=False``

    Raises:
        FitError: a finite-difference or line search solve failed
    """
    if not 0 < fd_step < 0.5:
        raise ValueError("fd_step must lie in (0, 0.5)")
    if tol <= 0 or max_iter < 0:
        raise ValueError("need tol > 0 and max_iter >= 0")
    model = ForwardModel(params, init.sigmas, data, config)
    w = np.array(init.weights, dtype=float)

    trajectory = model.solve(w)
    if w.size == 1:
        value = misfit(model.sample(trajectory), spec, data)
        logger.info("single lag: weight 1, objective %.6g", value)
        return FitResult(
            sigmas=init.sigmas, weights=w, objective_value=value, kkt_residual=0.0,
            iterations=0, converged=True, stopped="single_lag", history=(value,),
            evaluations=model.solves,
        )

    problem = _Problem(model, spec, data, fd_step, mesh=trajectory.times)
    value, r = problem.trial(w)
    history = [value]
    columns = problem.jacobian(w, r)
    grad = 2.0 * columns.T @ r
    scale = float(np.linalg.norm(grad)) or 1.0
    residual = kkt_residual(w, grad, scale)
    step = 1.0 / scale
    iterations = 0
    stopped = "max_iter"

    while True:
        logger.debug("iter %d: objective %.10g, kkt %.3e", iterations, value, residual)
        if residual <= tol:
            stopped = "tolerance"
            break
        if iterations >= max_iter:
            break
        problem.iterate = iterations + 1

        direction, kind = _direction(w, r, columns, grad, step)
        slope = float(grad @ direction)
        if not slope < 0:
            stopped = "line_search"
            break
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = np.clip(w + lam * direction, 0.0, 1.0)
            trial_value, trial_r = problem.trial(candidate)
            if trial_value <= value + ARMIJO * lam * slope:
                break
            lam *= 0.5
        else:
            stopped = "line_search"
            break
        logger.debug("iter %d: %s step accepted at lambda %g", iterations + 1, kind, lam)

        new_columns = problem.jacobian(candidate, trial_r)
        new_grad = 2.0 * new_columns.T @ trial_r
        step = spectral_step(candidate - w, new_grad - grad, step)
        w, value, r, columns, grad = candidate, trial_value, trial_r, new_columns, new_grad
        history.append(value)
        iterations += 1
        residual = kkt_residual(w, grad, scale)

    result = FitResult(
        sigmas=init.sigmas,
        weights=w,
        objective_value=value,
        kkt_residual=residual,
        iterations=iterations,
        converged=residual <= tol,
        stopped=stopped,
        history=tuple(history),
        evaluations=model.solves,
    )
    log = logger.info if result.converged else logger.warning
    log(
        "fit %s after %d iterations (%s): objective %.6g, kkt %.3e",
        "converged" if result.converged else "did not converge",
        iterations, stopped, value, residual,
    )
    return result


def grid_search(
    params: ModelParams,
    spec: ObjectiveSpec,
    data: FittingData,
    sigmas,
    resolution: float = 0.02,
    config: SolverConfig | None = None,
) -> tuple[np.ndarray, float]:
    """Best lattice point of the simplex; brute-force reference for small grids."""
    model = ForwardModel(params, sigmas, data, config)
    best_w, best_value = None, np.inf
    for weights in simplex_lattice(len(model.sigmas), resolution):
        value = misfit(model.run(weights).states, spec, data)
        if value < best_value:
            best_w, best_value = weights, value
    return best_w, float(best_value)
