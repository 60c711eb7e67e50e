import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import typer
from rich import print as rprint
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from delayfit.calibrate import fit_weights, fitted_errors, simulate
from delayfit.config import RunConfig, resolve
from delayfit.data import cli as data_cli
from delayfit.data import slice_window
from delayfit.ensemble import (
    EnsembleReport,
    run_ensemble,
    summary_text,
    verify_report,
    write_aggregates,
)
from delayfit.errors import NON_CONVERGENCE_EXIT, ConfigError, DelayfitError
from delayfit.log import configure_logging
from delayfit.model import COMPARTMENTS, DelayKernel, stability_margin, warn_if_unstable
from delayfit.outputs import fit_document, write_fit, write_trajectory, write_weights

logger = logging.getLogger(__name__)

REPORT_NAME = "ensemble_report.json"

app = typer.Typer(name="delayfit", help="Identify time delays in epidemic data")
app.add_typer(data_cli.app, name="data")


@contextmanager
def handle_errors() -> Iterator[None]:
    """Turn library failures into a one-line message and the matching exit code."""
    try:
        yield
    except DelayfitError as e:
        rprint(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(e.exit_code) from None
    except ValueError as e:
        rprint(f"[red]Invalid input:[/red] {escape(str(e))}")
        raise typer.Exit(ConfigError.exit_code) from None


ConfigOpt = Annotated[Path | None, typer.Option("--config", "-c", help="YAML config file")]
SetOpt = Annotated[
    list[str] | None, typer.Option("--set", "-s", help="KEY=VALUE override (repeatable)")
]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Base random seed")]
RunsOpt = Annotated[int | None, typer.Option("--n-runs", "-n", help="Monte Carlo runs")]
WorkersOpt = Annotated[int | None, typer.Option("--workers", "-w", help="Worker processes")]
OutOpt = Annotated[Path | None, typer.Option("--out-dir", "-o", help="Output directory")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")]


def _resolve(config, overrides, seed, n_runs, workers, out_dir) -> RunConfig:
    return resolve(
        config,
        overrides or (),
        seed=seed,
        n_runs=n_runs,
        workers=workers,
        out_dir=None if out_dir is None else str(out_dir),
    )


def _fitting_data(cfg: RunConfig):
    return slice_window(cfg.load_series(), cfg.window())


@app.command("simulate")
def simulate_cmd(
    config: ConfigOpt = None,
    overrides: SetOpt = None,
    dirac: Annotated[
        float | None, typer.Option("--dirac", help="Put all weight on this lag")
    ] = None,
    seed: SeedOpt = None,
    n_runs: RunsOpt = None,
    workers: WorkersOpt = None,
    out_dir: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Solve the delayed SIRD model with fixed weights; writes trajectory.csv."""
    configure_logging(verbose)
    with handle_errors():
        cfg = _resolve(config, overrides, seed, n_runs, workers, out_dir)
        if dirac is not None:
            try:
                kernel = DelayKernel.dirac(cfg.grid(), dirac)
            except ValueError as e:
                raise ConfigError("--dirac", str(e)) from None
            cfg = cfg.with_weights(kernel.weights)
        elif cfg.weights is None:
            raise ConfigError("weights", "simulate needs explicit weights (or --dirac SIGMA)")
        else:
            kernel = cfg.kernel()
        params = cfg.model_params()
        warn_if_unstable(params, kernel)
        data = _fitting_data(cfg)
        result = simulate(params, kernel, data, cfg.solver_config())

        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = write_trajectory(out / "trajectory.csv", result, data)
        cfg.dump(out)
    rprint(f"[green]✓[/green] {len(result.days)} days written to {path}")


@app.command("fit")
def fit_cmd(
    config: ConfigOpt = None,
    overrides: SetOpt = None,
    seed: SeedOpt = None,
    n_runs: RunsOpt = None,
    workers: WorkersOpt = None,
    out_dir: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Fit the delay weights at the mean rates; writes fit.json and weights.csv."""
    configure_logging(verbose)
    with handle_errors():
        cfg = _resolve(config, overrides, seed, n_runs, workers, out_dir)
        params = cfg.model_params()
        init = cfg.kernel()
        warn_if_unstable(params, init)
        data = _fitting_data(cfg)
        spec = cfg.objective_spec()
        solver = cfg.solver_config()
        result = fit_weights(
            params, spec, data, init,
            tol=cfg.fit_tol, max_iter=cfg.max_iter, config=solver, fd_step=cfg.fd_step,
        )
        errors = fitted_errors(params, result.kernel, data, solver)

        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_fit(out / "fit.json", fit_document(result, errors, params, spec.compartments))
        write_weights(out / "weights.csv", result.kernel)
        cfg.dump(out)

    table = Table(title=f"Fitted weights ({spec.label})")
    table.add_column("sigma", justify="right")
    table.add_column("weight", justify="right")
    for sigma, weight in zip(result.sigmas, result.weights):
        table.add_row(f"{sigma:g}", f"{weight:.4f}")
    Console().print(table)
    rprint(
        "[dim]relative L2 errors:[/dim] "
        + ", ".join(f"{c}={errors[c]:.4f}" for c in COMPARTMENTS)
    )
    if not result.converged:
        rprint(
            f"[yellow]Not converged[/yellow] after {result.iterations} iterations "
            f"({result.stopped}); KKT residual {result.kkt_residual:.3e}"
        )
        raise typer.Exit(NON_CONVERGENCE_EXIT)
    rprint(f"[green]✓[/green] converged in {result.iterations} iterations; wrote {out}")


def _print_error_table(report: EnsembleReport):
    table = Table(title="Relative L2 errors over successful runs")
    table.add_column("compartment")
    for col in ("mean", "min", "max"):
        table.add_column(col, justify="right")
    for name in COMPARTMENTS:
        mean, lo, hi = report.error_stats[name]
        table.add_row(name, f"{mean:.4f}", f"{lo:.4f}", f"{hi:.4f}")
    Console().print(table)


@app.command("ensemble")
def ensemble_cmd(
    config: ConfigOpt = None,
    overrides: SetOpt = None,
    seed: SeedOpt = None,
    n_runs: RunsOpt = None,
    workers: WorkersOpt = None,
    out_dir: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Monte Carlo over the rates: one weight fit per draw, then aggregates."""
    configure_logging(verbose)
    with handle_errors():
        cfg = _resolve(config, overrides, seed, n_runs, workers, out_dir)
        data = _fitting_data(cfg)
        report = run_ensemble(
            cfg.n_runs,
            cfg.distributions(),
            cfg.objective_spec(),
            data,
            cfg.grid(),
            seed=cfg.seed,
            threshold=cfg.threshold,
            worker_count=cfg.workers,
            options=cfg.fit_options(),
        )
        out = Path(cfg.out_dir)
        report.save(out / REPORT_NAME)
        write_aggregates(report, out)
        cfg.dump(out)
    _print_error_table(report)
    rprint(
        f"[green]✓[/green] {report.successful}/{len(report.runs)} runs; "
        f"dominant sigma {report.dominant_sigma:g}; report in {out / REPORT_NAME}"
    )


@app.command("report")
def report_cmd(
    report_path: Annotated[Path, typer.Argument(help="Ensemble report JSON")],
    out_dir: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Audit a stored ensemble report and regenerate its CSVs and summary."""
    configure_logging(verbose)
    with handle_errors():
        if not report_path.exists():
            raise ConfigError("report", f"file not found: {report_path}")
        report = verify_report(EnsembleReport.load(report_path))
        out = out_dir or report_path.parent
        write_aggregates(report, out)
        text = summary_text(report)
        (Path(out) / "summary.txt").write_text(text, encoding="utf-8")
    rprint(text)
    rprint(
        f"[green]✓[/green] aggregates verified; dominant sigma {report.dominant_sigma:g} "
        f"(by mean weight {report.heaviest_sigma:g})"
    )


@app.command("stability")
def stability_cmd(
    config: ConfigOpt = None,
    overrides: SetOpt = None,
    verbose: VerboseOpt = False,
):
    """Print the stability margin pi/(2 sigma) - (phi_r + phi_d) for each lag."""
    configure_logging(verbose)
    with handle_errors():
        cfg = resolve(config, overrides or ())
        kernel = DelayKernel.uniform(cfg.grid())
        margins = stability_margin(cfg.model_params(), kernel)

    table = Table(title="Stability margins (1/day)")
    table.add_column("sigma", justify="right")
    table.add_column("margin", justify="right")
    table.add_column("stable")
    for sigma, margin in zip(kernel.sigmas, margins):
        table.add_row(
            f"{sigma:g}", f"{margin:.6g}", "[green]yes[/green]" if margin > 0 else "[red]no[/red]"
        )
    Console().print(table)


if __name__ == "__main__":
    app()
