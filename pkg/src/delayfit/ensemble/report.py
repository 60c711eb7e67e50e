"""Ensemble records, aggregates and their on-disk forms.

Every aggregate is a pure function of the stored run records, so a report
read back from JSON can be audited by recomputing it.
"""

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from delayfit.calibrate import FitResult
from delayfit.errors import AggregationError, IntegrityError
from delayfit.model import COMPARTMENTS

FLOAT_FORMAT = "%.17g"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class RunRecord:
    """One Monte Carlo run; ``fit`` and ``errors`` are None when it failed.

    ``trajectory`` holds the daily (s, i, r, d) rows of the fitted model.
    """

    index: int
    params: dict[str, float]
    redraws: int = 0
    fit: FitResult | None = None
    errors: dict[str, float] | None = None
    min_margin: float | None = None
    failure: str | None = None
    trajectory: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "params": dict(self.params),
            "redraws": self.redraws,
            "ok": self.ok,
            "failure": self.failure,
            "min_margin": self.min_margin,
            "errors": None if self.errors is None else {c: self.errors[c] for c in COMPARTMENTS},
            "fit": None if self.fit is None else self.fit.to_dict(),
            "trajectory": None if self.trajectory is None else {
                name: [float(v) for v in self.trajectory[:, j]]
                for j, name in enumerate(COMPARTMENTS)
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunRecord":
        return cls(
            index=int(raw["index"]),
            params={k: float(v) for k, v in raw["params"].items()},
            redraws=int(raw.get("redraws", 0)),
            fit=None if raw.get("fit") is None else FitResult.from_dict(raw["fit"]),
            errors=None if raw.get("errors") is None else {
                k: float(v) for k, v in raw["errors"].items()
            },
            min_margin=None if raw.get("min_margin") is None else float(raw["min_margin"]),
            failure=raw.get("failure"),
            trajectory=_trajectory_from(raw.get("trajectory")),
        )


def _trajectory_from(raw) -> np.ndarray | None:
    if raw is None:
        return None
    return np.column_stack([np.asarray(raw[name], dtype=float) for name in COMPARTMENTS])


def _successful(runs: Sequence[RunRecord]) -> list[RunRecord]:
    ok = [run for run in runs if run.ok]
    if not ok:
        raise AggregationError(f"none of the {len(runs)} runs succeeded; nothing to aggregate")
    return ok


def _weight_matrix(runs: Sequence[RunRecord]) -> np.ndarray:
    return np.vstack([run.fit.weights for run in _successful(runs)])


def aggregate_weights(runs: Sequence[RunRecord], threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """(frequency, mean) per lag over successful runs.

    ``frequency_j`` is the fraction of runs with ``w_j >= threshold``.
    """
    weights = _weight_matrix(runs)
    frequency = np.count_nonzero(weights >= threshold, axis=0) / weights.shape[0]
    return frequency, weights.mean(axis=0)


def argmax_frequency(runs: Sequence[RunRecord]) -> np.ndarray:
    """Fraction of runs whose largest weight sits on each lag (ties to the smaller lag)."""
    weights = _weight_matrix(runs)
    winners = np.argmax(weights, axis=1)
    return np.bincount(winners, minlength=weights.shape[1]) / weights.shape[0]


def error_table(runs: Sequence[RunRecord]) -> dict[str, tuple[float, float, float]]:
    """(mean, min, max) of the relative L2 error per compartment."""
    ok = _successful(runs)
    table = {}
    for name in COMPARTMENTS:
        values = np.array([run.errors[name] for run in ok])
        table[name] = (float(values.mean()), float(values.min()), float(values.max()))
    return table


def unstable_count(runs: Sequence[RunRecord]) -> int:
    return sum(1 for run in runs if run.ok and run.min_margin is not None and run.min_margin <= 0)


def trajectory_band(runs: Sequence[RunRecord]) -> dict[str, tuple[np.ndarray, ...]] | None:
    """Per-day (mean, min, max) of each compartment over successful runs.

    None when some successful run carries no trajectory.
    """
    ok = _successful(runs)
    if any(run.trajectory is None for run in ok):
        return None
    shapes = {run.trajectory.shape for run in ok}
    if len(shapes) != 1:
        raise AggregationError(f"runs disagree on trajectory shape: {sorted(shapes)}")
    stack = np.stack([run.trajectory for run in ok])
    return {
        name: (column.mean(axis=0), column.min(axis=0), column.max(axis=0))
        for name, column in zip(COMPARTMENTS, np.moveaxis(stack, 2, 0))
    }


def _band_from(raw) -> dict[str, tuple[np.ndarray, ...]] | None:
    if raw is None:
        return None
    return {
        name: tuple(np.asarray(raw[name][key], dtype=float) for key in ("mean", "min", "max"))
        for name in COMPARTMENTS
    }


@dataclass(frozen=True, eq=False)
class EnsembleReport:
    sigmas: np.ndarray
    runs: tuple[RunRecord, ...]
    weight_mean: np.ndarray
    weight_frequency: np.ndarray
    argmax_frequency: np.ndarray
    error_stats: dict[str, tuple[float, float, float]]
    unstable_runs: int
    settings: dict = field(default_factory=dict)
    band: dict[str, tuple[np.ndarray, ...]] | None = None

    @classmethod
    def from_runs(cls, sigmas, runs: Sequence[RunRecord], settings: dict) -> "EnsembleReport":
        runs = tuple(sorted(runs, key=lambda run: run.index))
        frequency, mean = aggregate_weights(runs, settings["threshold"])
        return cls(
            sigmas=np.asarray(sigmas, dtype=float),
            runs=runs,
            weight_mean=mean,
            weight_frequency=frequency,
            argmax_frequency=argmax_frequency(runs),
            error_stats=error_table(runs),
            unstable_runs=unstable_count(runs),
            settings=dict(settings),
            band=trajectory_band(runs),
        )

    @property
    def threshold(self) -> float:
        return float(self.settings["threshold"])

    @property
    def successful(self) -> int:
        return sum(1 for run in self.runs if run.ok)

    @property
    def failed(self) -> int:
        return len(self.runs) - self.successful

    @property
    def dominant_sigma(self) -> float:
        """Lag with the highest activation frequency, ties broken by mean weight."""
        order = np.lexsort((-self.weight_mean, -self.weight_frequency))
        return float(self.sigmas[order[0]])

    @property
    def heaviest_sigma(self) -> float:
        return float(self.sigmas[int(np.argmax(self.weight_mean))])

    def aggregates(self) -> dict:
        return {
            "weight_mean": [float(v) for v in self.weight_mean],
            "weight_frequency": [float(v) for v in self.weight_frequency],
            "argmax_frequency": [float(v) for v in self.argmax_frequency],
            "error_stats": {
                name: dict(zip(("mean", "min", "max"), self.error_stats[name]))
                for name in COMPARTMENTS
            },
            "unstable_runs": self.unstable_runs,
            "failed_runs": self.failed,
            "trajectory_band": None if self.band is None else {
                name: {
                    key: [float(v) for v in values]
                    for key, values in zip(("mean", "min", "max"), self.band[name])
                }
                for name in COMPARTMENTS
            },
        }

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "settings": self.settings,
            "sigmas": [float(s) for s in self.sigmas],
            "aggregates": self.aggregates(),
            "runs": [run.to_dict() for run in self.runs],
        }

    def to_json(self) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "EnsembleReport":
        agg = raw["aggregates"]
        return cls(
            sigmas=np.asarray(raw["sigmas"], dtype=float),
            runs=tuple(RunRecord.from_dict(run) for run in raw["runs"]),
            weight_mean=np.asarray(agg["weight_mean"], dtype=float),
            weight_frequency=np.asarray(agg["weight_frequency"], dtype=float),
            argmax_frequency=np.asarray(agg["argmax_frequency"], dtype=float),
            error_stats={
                name: (float(v["mean"]), float(v["min"]), float(v["max"]))
                for name, v in agg["error_stats"].items()
            },
            unstable_runs=int(agg["unstable_runs"]),
            settings=dict(raw["settings"]),
            band=_band_from(agg.get("trajectory_band")),
        )

    @classmethod
    def from_json(cls, text: str) -> "EnsembleReport":
        try:
            return cls.from_dict(json.loads(text))
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrityError(f"report document is malformed: {exc!r}") from exc

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "EnsembleReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def verify_report(report: EnsembleReport) -> EnsembleReport:
    """Recompute every aggregate from the stored runs; raise on any difference."""
    try:
        fresh = EnsembleReport.from_runs(report.sigmas, report.runs, report.settings)
    except (KeyError, AggregationError) as exc:
        raise IntegrityError(f"cannot recompute aggregates: {exc}") from exc
    mismatched = []
    if [run.index for run in report.runs] != list(range(len(report.runs))):
        mismatched.append("runs (indices)")
    if report.settings.get("n_runs") not in (None, len(report.runs)):
        mismatched.append("settings.n_runs")
    stored, recomputed = report.aggregates(), fresh.aggregates()
    mismatched += [key for key in recomputed if stored[key] != recomputed[key]]
    if any(
        run.fit is not None and len(run.fit.weights) != len(report.sigmas) for run in report.runs
    ):
        mismatched.append("runs (weight length)")
    if mismatched:
        raise IntegrityError(
            "stored aggregates disagree with the stored runs: " + ", ".join(mismatched)
        )
    return fresh


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def band_frame(report: EnsembleReport) -> pd.DataFrame:
    """One row per window day: ``day``, ``date`` and ``<c>_mean/_min/_max`` per compartment."""
    if report.band is None:
        raise AggregationError("report carries no run trajectories")
    n_days = report.band[COMPARTMENTS[0]][0].size
    frame = pd.DataFrame({"day": np.arange(n_days)})
    start = report.settings.get("start_date")
    if start is not None:
        frame["date"] = pd.date_range(start, periods=n_days, freq="D").strftime("%Y-%m-%d")
    for name in COMPARTMENTS:
        for key, values in zip(("mean", "min", "max"), report.band[name]):
            frame[f"{name}_{key}"] = values
    return frame


def write_aggregates(report: EnsembleReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigmas = report.sigmas
    paths = [
        _write_frame(
            pd.DataFrame({"sigma": sigmas, "mean_weight": report.weight_mean}),
            out / "weights_mean.csv",
        ),
        _write_frame(
            pd.DataFrame({"sigma": sigmas, "frequency": report.weight_frequency}),
            out / "weights_frequency.csv",
        ),
        _write_frame(
            pd.DataFrame({"sigma": sigmas, "argmax_frequency": report.argmax_frequency}),
            out / "weights_argmax.csv",
        ),
        _write_frame(
            pd.DataFrame(
                [(name, *report.error_stats[name]) for name in COMPARTMENTS],
                columns=["compartment", "mean", "min", "max"],
            ),
            out / "error_table.csv",
        ),
    ]
    if report.band is not None:
        paths.append(_write_frame(band_frame(report), out / "trajectory_band.csv"))
    return paths


def summary_text(report: EnsembleReport) -> str:
    s = report.settings
    lines = [
        f"runs: {report.successful} successful, {report.failed} failed "
        f"(seed {s.get('seed')}, threshold {report.threshold:g}, "
        f"compartments {s.get('compartments')})",
        f"dominant sigma (frequency): {report.dominant_sigma:g}",
        f"dominant sigma (mean weight): {report.heaviest_sigma:g}",
        f"runs with a non-positive stability margin: {report.unstable_runs}",
        "",
        f"{'sigma':>8} {'frequency':>10} {'argmax':>8} {'mean':>10}",
    ]
    for sigma, freq, top, mean in zip(
        report.sigmas, report.weight_frequency, report.argmax_frequency, report.weight_mean
    ):
        lines.append(f"{sigma:>8g} {freq:>10.3f} {top:>8.3f} {mean:>10.4f}")
    lines += ["", f"{'compartment':>11} {'mean':>10} {'min':>10} {'max':>10}"]
    for name in COMPARTMENTS:
        mean, lo, hi = report.error_stats[name]
        lines.append(f"{name:>11} {mean:>10.4f} {lo:>10.4f} {hi:>10.4f}")
    return "\n".join(lines) + "\n"
