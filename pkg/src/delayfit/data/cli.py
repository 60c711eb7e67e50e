"""Data file utilities."""

from pathlib import Path
from typing import Annotated

import pandas as pd
import typer
from rich import print as rprint
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from delayfit.data.series import EXPORT_COLUMNS, import_dpc, load_csv, write_csv
from delayfit.errors import DelayfitError
from delayfit.log import configure_logging

app = typer.Typer(help="Inspect and convert epidemic series")

N0Opt = Annotated[float, typer.Option("--n0", help="Initial living population")]
GapsOpt = Annotated[
    bool, typer.Option("--interpolate-gaps", help="Fill missing days linearly")
]


@app.command("inspect")
def inspect(
    path: Annotated[Path, typer.Argument(help="CSV in date,infected,recovered,deceased form")],
    n0: N0Opt = 60_000_000,
    interpolate_gaps: GapsOpt = False,
    rows: Annotated[int, typer.Option("--rows", "-r", help="Rows shown at each end")] = 5,
):
    """Validate a series and show its span, warnings and first/last rows."""
    configure_logging()
    try:
        series = load_csv(path, n0, interpolate_gaps=interpolate_gaps)
    except DelayfitError as e:
        rprint(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(e.exit_code) from None

    rprint(
        f"[bold]{path}[/bold]: {len(series)} days, "
        f"{series.start.isoformat()} .. {series.end.isoformat()}, n0={n0:g}"
    )
    for note in series.warnings:
        rprint(f"[yellow]warning:[/yellow] {note}")

    frame = series.to_frame()
    shown = frame if len(frame) <= 2 * rows else pd.concat([frame.head(rows), frame.tail(rows)])
    table = Table()
    for col in EXPORT_COLUMNS:
        table.add_column(col, justify="left" if col == "date" else "right")
    for record in shown.itertuples(index=False):
        table.add_row(record.date, *(f"{v:.10g}" for v in record[1:]))
    Console().print(table)


@app.command("convert")
def convert(
    source: Annotated[Path, typer.Argument(help="Input CSV")],
    dest: Annotated[Path, typer.Argument(help="Output CSV (with a susceptible column)")],
    n0: N0Opt = 60_000_000,
    dpc: Annotated[
        bool, typer.Option("--dpc/--plain", help="Source is the Italian DPC national file")
    ] = True,
    interpolate_gaps: GapsOpt = False,
):
    """Rewrite a series in the delayfit schema."""
    configure_logging()
    try:
        reader = import_dpc if dpc else load_csv
        series = reader(source, n0, interpolate_gaps=interpolate_gaps)
        write_csv(series, dest)
    except DelayfitError as e:
        rprint(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(e.exit_code) from None
    rprint(f"[green]✓[/green] {len(series)} days written to {dest}")
