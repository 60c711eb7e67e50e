"""Measured epidemic series and the windows fitted against them.

The bundled ``reference_series.csv`` is synthetic: a forward delayed-SIRD run
at the published parameter means (planted weights 0.2/0.5/0.3 on lags 8/11/14
days, contact rate divided by 3 from day 73 of the window, 2% weekly
reporting ripple on infected) shaped like the Italian national series for
2020-08-07 .. 2021-02-07 with n0 = 60,000,000. Real data can be brought in
with :func:`import_dpc`.
"""

from delayfit.data.series import (
    COLUMNS,
    EXPORT_COLUMNS,
    REFERENCE_N0,
    EpidemicSeries,
    import_dpc,
    load_csv,
    load_reference,
    reference_series_path,
    write_csv,
)
from delayfit.data.window import DataWindow, FittingData, build_history, slice_window

__all__ = [
    # Types
    "EpidemicSeries",
    "DataWindow",
    "FittingData",
    # Operations
    "load_csv",
    "write_csv",
    "import_dpc",
    "load_reference",
    "reference_series_path",
    "build_history",
    "slice_window",
    # Constants
    "COLUMNS",
    "EXPORT_COLUMNS",
    "REFERENCE_N0",
]
