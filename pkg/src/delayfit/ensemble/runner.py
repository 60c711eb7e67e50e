"""Monte Carlo driver: sample rates, fit weights, collect per-run records."""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from delayfit.calibrate import ForwardModel, ObjectiveSpec, compartment_errors, fit_weights
from delayfit.data import FittingData
from delayfit.dde import SolverConfig
from delayfit.ensemble.report import EnsembleReport, RunRecord
from delayfit.ensemble.sampling import ParamDistributions, ParameterDraw, draw_params
from delayfit.errors import DelayfitError, EnsembleError
from delayfit.model import DelayKernel, stability_margin

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.2


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-6
    max_iter: int = 200
    fd_step: float = 1e-6
    solver: SolverConfig = field(default_factory=SolverConfig)


@dataclass(frozen=True)
class _Task:
    draw: ParameterDraw
    spec: ObjectiveSpec
    data: FittingData
    sigmas: tuple[float, ...]
    options: FitOptions


def _run_one(task: _Task) -> RunRecord:
    params = task.draw.params
    init = DelayKernel.uniform(task.sigmas)
    base = {"index": task.draw.index, "params": params.as_dict(), "redraws": task.draw.redraws}
    try:
        fit = fit_weights(
            params,
            task.spec,
            task.data,
            init,
            tol=task.options.tol,
            max_iter=task.options.max_iter,
            config=task.options.solver,
            fd_step=task.options.fd_step,
        )
        model = ForwardModel(params, task.sigmas, task.data, task.options.solver)
        simulation = model.run(fit.weights)
        errors = compartment_errors(simulation, task.data)
    except DelayfitError as exc:
        return RunRecord(**base, failure=f"{type(exc).__name__}: {exc}")
    margin = float(np.min(stability_margin(params, fit.kernel)))
    return RunRecord(
        **base, fit=fit, errors=errors, min_margin=margin, trajectory=simulation.states
    )


def run_ensemble(
    n_runs: int,
    dists: ParamDistributions,
    spec: ObjectiveSpec,
    data: FittingData,
    sigmas,
    seed: int = 0,
    threshold: float = 0.01,
    worker_count: int = 1,
    options: FitOptions | None = None,
) -> EnsembleReport:
    """Fit ``n_runs`` independent draws and aggregate them in run-index order.

    The report depends on ``(seed, n_runs)`` and the inputs only; ``worker_count``
    changes wall time, not results.

    Raises:
        SamplingError: a draw could not produce positive rates
        EnsembleError: more than 20% of the runs failed
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    options = options or FitOptions()
    sigmas = tuple(float(s) for s in sigmas)
    tasks = [
        _Task(draw_params(dists, index, seed), spec, data, sigmas, options)
        for index in range(n_runs)
    ]
    records: list[RunRecord | None] = [None] * n_runs

    def _collect(record: RunRecord):
        records[record.index] = record
        done = sum(r is not None for r in records)
        if record.ok:
            logger.info(
                "run %d/%d done (%d/%d): objective %.6g",
                record.index + 1, n_runs, done, n_runs, record.fit.objective_value,
            )
        else:
            logger.warning("run %d/%d failed: %s", record.index + 1, n_runs, record.failure)

    if worker_count == 1 or n_runs == 1:
        for task in tasks:
            _collect(_run_one(task))
    else:
        with ProcessPoolExecutor(max_workers=min(worker_count, n_runs)) as pool:
            futures = [pool.submit(_run_one, task) for task in tasks]
            for future in as_completed(futures):
                _collect(future.result())

    failed = sum(1 for r in records if not r.ok)
    if failed > MAX_FAILURE_SHARE * n_runs:
        raise EnsembleError(
            f"{failed} of {n_runs} runs failed (more than {MAX_FAILURE_SHARE:.0%}); "
            f"first failure: {next(r.failure for r in records if not r.ok)}"
        )
    settings = {
        "seed": seed,
        "n_runs": n_runs,
        "threshold": float(threshold),
        "compartments": list(spec.compartments),
        "normalize": bool(spec.normalize),
        "rel_std": float(dists.rel_std),
        "beta_mean": float(dists.beta_mean),
        "phi_r_mean": float(dists.phi_r_mean),
        "phi_d_mean": float(dists.phi_d_mean),
        "mode": dists.mode.value,
        "n0": float(dists.n0),
        "start_date": data.start_date.isoformat(),
        "fit_tol": float(options.tol),
        "max_iter": int(options.max_iter),
    }
    report = EnsembleReport.from_runs(sigmas, records, settings)
    if report.unstable_runs:
        logger.warning(
            "%d run(s) drew rates outside the stability bound for some lag", report.unstable_runs
        )
    return report
