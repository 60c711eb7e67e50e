"""Measured compartment series: CSV ingestion, validation and export.

Input schema is ``date,infected,recovered,deceased`` with ISO dates and
non-negative counts. ``infected`` is the number of currently active cases,
``recovered`` and ``deceased`` are cumulative. The susceptible series is
derived as ``n0 - infected - recovered - deceased``.
"""

import logging
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from delayfit.errors import DataError

logger = logging.getLogger(__name__)

COLUMNS = ("date", "infected", "recovered", "deceased")
EXPORT_COLUMNS = (*COLUMNS, "susceptible")
FLOAT_FORMAT = "%.17g"
ISO_DATE = re.compile(r"[0-9]{4}-[0-9]{2}-[0-9]{2}")

# Italian Civil Protection national feed (dpc-covid19-ita-andamento-nazionale.csv)
DPC_COLUMNS = {
    "data": "date",
    "totale_positivi": "infected",
    "dimessi_guariti": "recovered",
    "deceduti": "deceased",
}

# Synthetic stand-in for the Italian national series, 2020-08-07 .. 2021-02-07.
BUNDLED_DATA_DIR = Path(__file__).parent
REFERENCE_SERIES = "reference_series.csv"
REFERENCE_N0 = 60_000_000


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EpidemicSeries:
    """Daily measured (s, i, r, d); ``days`` counts from ``origin``."""

    dates: tuple[date, ...]
    infected: np.ndarray
    recovered: np.ndarray
    deceased: np.ndarray
    n0: float
    origin: date | None = None
    warnings: tuple[str, ...] = ()
    susceptible: np.ndarray = field(init=False)

    def __post_init__(self):
        dates = tuple(self.dates)
        object.__setattr__(self, "dates", dates)
        if not dates:
            raise DataError("series has no rows")
        for name in ("infected", "recovered", "deceased"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (len(dates),):
                raise DataError(f"{name} has {arr.size} values for {len(dates)} dates")
            object.__setattr__(self, name, arr)
        if self.origin is None:
            object.__setattr__(self, "origin", dates[0])
        if not self.n0 > 0:
            raise DataError(f"n0 must be > 0, got {self.n0}")

        steps = [(b - a).days for a, b in zip(dates, dates[1:])]
        if any(step != 1 for step in steps):
            raise DataError(f"dates are not consecutive days: {_missing_dates(dates)}")

        susceptible = self.n0 - self.infected - self.recovered - self.deceased
        if np.any(susceptible < 0):
            bad = dates[int(np.argmax(susceptible < 0))]
            raise DataError(f"n0={self.n0:g} leaves negative susceptibles on {bad.isoformat()}")
        object.__setattr__(self, "susceptible", _frozen(susceptible))

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other):
        if not isinstance(other, EpidemicSeries):
            return NotImplemented
        return (
            self.dates == other.dates
            and self.origin == other.origin
            and self.n0 == other.n0
            and all(
                np.array_equal(getattr(self, c), getattr(other, c))
                for c in ("infected", "recovered", "deceased")
            )
        )

    __hash__ = None

    @property
    def start(self) -> date:
        return self.dates[0]

    @property
    def end(self) -> date:
        return self.dates[-1]

    @property
    def days(self) -> np.ndarray:
        first = (self.dates[0] - self.origin).days
        return np.arange(first, first + len(self.dates), dtype=float)

    def states(self) -> np.ndarray:
        """``(n, 4)`` array of (s, i, r, d) rows."""
        return np.column_stack([self.susceptible, self.infected, self.recovered, self.deceased])

    def column(self, compartment: str) -> np.ndarray:
        return {
            "s": self.susceptible,
            "i": self.infected,
            "r": self.recovered,
            "d": self.deceased,
        }[compartment]

    def index_of(self, day: date) -> int:
        return (day - self.dates[0]).days

    def subset(self, start: int, stop: int, origin: date | None = None) -> "EpidemicSeries":
        """Rows ``[start, stop)`` re-based on ``origin``."""
        return EpidemicSeries(
            dates=self.dates[start:stop],
            infected=self.infected[start:stop],
            recovered=self.recovered[start:stop],
            deceased=self.deceased[start:stop],
            n0=self.n0,
            origin=origin or self.origin,
            warnings=self.warnings,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": [d.isoformat() for d in self.dates],
                "infected": self.infected,
                "recovered": self.recovered,
                "deceased": self.deceased,
                "susceptible": self.susceptible,
            },
            columns=list(EXPORT_COLUMNS),
        )


def _missing_dates(dates) -> str:
    missing = []
    for a, b in zip(dates, dates[1:]):
        if (b - a).days <= 0:
            return f"{b.isoformat()} does not follow {a.isoformat()}"
        missing.extend(a + timedelta(days=k) for k in range(1, (b - a).days))
    return ", ".join(d.isoformat() for d in missing)


def _parse_line(message: str) -> int | None:
    match = re.search(r"line (\d+)", message)
    return int(match.group(1)) if match else None


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path} is empty; a header row is required", line=1) from None
    except pd.errors.ParserError as exc:
        raise DataError(f"malformed CSV in {path}: {exc}", line=_parse_line(str(exc))) from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not UTF-8: {exc}") from None


def _parse_rows(frame: pd.DataFrame, source: str) -> tuple[list[date], np.ndarray]:
    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{source} lacks column(s) {', '.join(missing)}", line=1)
    if frame.empty:
        raise DataError(f"{source} has a header but no data rows", line=2)

    dates: list[date] = []
    counts = np.empty((len(frame), 3))
    for row, record in enumerate(frame[list(COLUMNS)].itertuples(index=False)):
        line = row + 2
        raw_date, *raw_counts = record
        if not isinstance(raw_date, str) or not raw_date.strip():
            raise DataError("missing date", line=line)
        try:
            if not ISO_DATE.fullmatch(raw_date.strip()):
                raise ValueError(raw_date)
            day = date.fromisoformat(raw_date.strip())
        except ValueError:
            raise DataError(f"bad date {raw_date!r}, expected YYYY-MM-DD", line=line) from None
        for col, (name, raw) in enumerate(zip(COLUMNS[1:], raw_counts)):
            if not isinstance(raw, str) or not raw.strip():
                raise DataError(f"missing {name}", line=line)
            try:
                value = float(raw)
            except ValueError:
                raise DataError(f"bad {name} value {raw!r}", line=line) from None
            if not np.isfinite(value):
                raise DataError(f"non-finite {name} value {raw!r}", line=line)
            if value < 0:
                raise DataError(f"negative {name} count {raw!r}", line=line)
            counts[row, col] = value
        if dates and day <= dates[-1]:
            raise DataError(
                f"date {day.isoformat()} does not follow {dates[-1].isoformat()}", line=line
            )
        dates.append(day)
    return dates, counts


def _fill_gaps(dates: list[date], counts: np.ndarray) -> tuple[list[date], np.ndarray, list[str]]:
    frame = pd.DataFrame(counts, index=pd.DatetimeIndex(dates))
    full = pd.date_range(dates[0], dates[-1], freq="D")
    filled = frame.reindex(full).interpolate(method="linear")
    added = [d.date().isoformat() for d in full.difference(frame.index)]
    notes = [f"{day}: missing day filled by linear interpolation" for day in added]
    return [d.date() for d in full], filled.to_numpy(), notes


def _monotonicity_warnings(dates, counts) -> list[str]:
    notes = []
    for col, name in ((1, "recovered"), (2, "deceased")):
        drops = np.flatnonzero(np.diff(counts[:, col]) < 0) + 1
        for k in drops:
            notes.append(
                f"{dates[k].isoformat()}: {name} decreases "
                f"({counts[k - 1, col]:g} -> {counts[k, col]:g})"
            )
    return notes


def _build_series(frame: pd.DataFrame, n0: float, source: str, interpolate_gaps: bool):
    dates, counts = _parse_rows(frame, source)
    notes: list[str] = []
    gaps = [(b - a).days for a, b in zip(dates, dates[1:])]
    if any(g != 1 for g in gaps):
        if not interpolate_gaps:
            raise DataError(f"{source} is not daily; missing dates: {_missing_dates(dates)}")
        dates, counts, notes = _fill_gaps(dates, counts)
    notes.extend(_monotonicity_warnings(dates, counts))
    for note in notes:
        logger.warning("%s: %s", source, note)

    series = EpidemicSeries(
        dates=tuple(dates),
        infected=counts[:, 0],
        recovered=counts[:, 1],
        deceased=counts[:, 2],
        n0=float(n0),
        warnings=tuple(notes),
    )
    logger.info(
        "loaded %d days from %s (%s .. %s)",
        len(series), source, series.start.isoformat(), series.end.isoformat(),
    )
    return series


def load_csv(path, n0: float, interpolate_gaps: bool = False) -> EpidemicSeries:
    """Load a ``date,infected,recovered,deceased`` file.

    Args:
        path: CSV file
        n0: initial living population used to derive susceptibles
        interpolate_gaps: fill missing days linearly instead of failing

    Raises:
        DataError: unreadable file, malformed row, negative count or a gap
    """
    path = Path(path)
    return _build_series(_read_frame(path), n0, str(path), interpolate_gaps)


def import_dpc(path, n0: float, interpolate_gaps: bool = False) -> EpidemicSeries:
    """Load the Italian Civil Protection national CSV."""
    path = Path(path)
    frame = _read_frame(path)
    missing = [c for c in DPC_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path} is not a DPC national file; lacks {', '.join(missing)}", line=1)
    frame = frame[list(DPC_COLUMNS)].rename(columns=DPC_COLUMNS)
    # DPC stamps each row with a time of day, e.g. 2020-09-11T17:00:00
    frame["date"] = frame["date"].str.strip().str.split(r"[T ]", n=1, regex=True).str[0]
    return _build_series(frame, n0, str(path), interpolate_gaps)


def write_csv(series: EpidemicSeries, path) -> Path:
    """Export with a ``susceptible`` column; reloading reproduces the series."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    series.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def reference_series_path() -> Path:
    return BUNDLED_DATA_DIR / REFERENCE_SERIES


def load_reference(n0: float = REFERENCE_N0) -> EpidemicSeries:
    """Bundled synthetic national series (see module docs in ``delayfit.data``)."""
    return load_csv(reference_series_path(), n0)
