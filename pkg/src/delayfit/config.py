"""Run configuration: bundled defaults, YAML files and command-line overrides.

Resolution order is defaults < ``--config`` file < ``--set key=value`` <
dedicated flags. The resolved mapping is validated into a frozen
:class:`RunConfig`; any violation is a :class:`ConfigError` naming the key.
"""

import math
from dataclasses import asdict, dataclass, fields
from datetime import date
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from delayfit.calibrate import FITTABLE, ObjectiveSpec
from delayfit.data import DataWindow, EpidemicSeries, load_csv, load_reference
from delayfit.dde import SolverConfig
from delayfit.ensemble import FitOptions, ParamDistributions
from delayfit.errors import ConfigError
from delayfit.model import BetaSchedule, DelayKernel, ModelParams, TransmissionMode, delay_grid

DEFAULTS_FILE = Path(__file__).parent / "defaults.yaml"
RESOLVED_NAME = "config.resolved.yaml"
WEIGHT_SUM_TOL = 1e-12


def load_defaults() -> dict:
    with open(DEFAULTS_FILE) as f:
        return yaml.safe_load(f)


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"{path} is not valid YAML: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("config", f"{path} must hold a key/value mapping")
    return raw


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value`` with the value read as YAML, e.g. ``weights=[0.5, 0.5]``."""
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError("--set", f"expected KEY=VALUE, got {text!r}")
    try:
        return key, yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"cannot parse value {value!r}: {exc}") from exc


# -- field validators ---------------------------------------------------------


def _number(value, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(key, f"must be finite, got {value!r}")
    return out


def _positive(value, key: str) -> float:
    out = _number(value, key)
    if not out > 0:
        raise ConfigError(key, f"must be > 0, got {value!r}")
    return out


def _optional_positive(value, key: str) -> float | None:
    return None if value is None else _positive(value, key)


def _integer(value, key: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str, float)):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    try:
        out = int(value)
    except (ValueError, OverflowError):
        raise ConfigError(key, f"expected an integer, got {value!r}") from None
    if out != float(value):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if out < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {out}")
    return out


def _flag(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(key, f"expected true or false, got {value!r}")
    return value


def _date(value, key: str) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(key, f"expected a YYYY-MM-DD date, got {value!r}") from None


def _list(value, key: str) -> list:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(key, f"expected a list, got {value!r}")
    return list(value)


# -- the configuration ----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    data: str | None
    n0: float
    interpolate_gaps: bool
    start_date: date
    end_date: date
    history_days: int
    sigma_min: float
    sigma_max: float
    sigma_count: int
    sigmas: tuple[float, ...] | None
    weights: tuple[float, ...] | None
    mode: TransmissionMode
    beta: float
    phi_r: float
    phi_d: float
    rel_std: float
    beta_breakpoints: tuple[tuple[float, float], ...]
    compartments: tuple[str, ...]
    normalize: bool
    n_runs: int
    seed: int
    threshold: float
    workers: int
    rel_tol: float
    abs_tol: float
    max_step: float | None
    initial_step: float | None
    fit_tol: float
    max_iter: int
    fd_step: float
    out_dir: str

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        """Validate a fully merged mapping; every key of the dataclass must be present."""
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        missing = sorted(names - set(raw))
        if missing:
            raise ConfigError(missing[0], "missing configuration key")

        data = raw["data"]
        if data is not None and not isinstance(data, str):
            raise ConfigError("data", f"expected a file path, got {data!r}")

        start = _date(raw["start_date"], "start_date")
        end = _date(raw["end_date"], "end_date")
        if end <= start:
            raise ConfigError("end_date", f"must be after start_date {start.isoformat()}")

        try:
            mode = TransmissionMode(raw["mode"])
        except ValueError:
            choices = ", ".join(m.value for m in TransmissionMode)
            raise ConfigError("mode", f"expected one of {choices}, got {raw['mode']!r}") from None

        cfg = cls(
            data=data,
            n0=_positive(raw["n0"], "n0"),
            interpolate_gaps=_flag(raw["interpolate_gaps"], "interpolate_gaps"),
            start_date=start,
            end_date=end,
            history_days=_integer(raw["history_days"], "history_days", 0),
            sigma_min=_positive(raw["sigma_min"], "sigma_min"),
            sigma_max=_positive(raw["sigma_max"], "sigma_max"),
            sigma_count=_integer(raw["sigma_count"], "sigma_count", 1),
            sigmas=_sigmas(raw["sigmas"]),
            weights=None,
            mode=mode,
            beta=_positive(raw["beta"], "beta"),
            phi_r=_positive(raw["phi_r"], "phi_r"),
            phi_d=_positive(raw["phi_d"], "phi_d"),
            rel_std=_non_negative(raw["rel_std"], "rel_std"),
            beta_breakpoints=_breakpoints(raw["beta_breakpoints"]),
            compartments=_compartments(raw["compartments"]),
            normalize=_flag(raw["normalize"], "normalize"),
            n_runs=_integer(raw["n_runs"], "n_runs", 1),
            seed=_integer(raw["seed"], "seed", 0),
            threshold=_threshold(raw["threshold"]),
            workers=_integer(raw["workers"], "workers", 1),
            rel_tol=_positive(raw["rel_tol"], "rel_tol"),
            abs_tol=_positive(raw["abs_tol"], "abs_tol"),
            max_step=_optional_positive(raw["max_step"], "max_step"),
            initial_step=_optional_positive(raw["initial_step"], "initial_step"),
            fit_tol=_positive(raw["fit_tol"], "fit_tol"),
            max_iter=_integer(raw["max_iter"], "max_iter", 0),
            fd_step=_fd_step(raw["fd_step"]),
            out_dir=str(raw["out_dir"]),
        )
        if cfg.sigmas is None:
            try:
                delay_grid(cfg.sigma_min, cfg.sigma_max, cfg.sigma_count)
            except ValueError as exc:
                raise ConfigError("sigma_max", str(exc)) from None
        grid = cfg.grid()
        if cfg.history_days < grid[-1]:
            raise ConfigError(
                "history_days", f"must be >= the largest lag {grid[-1]:g}, got {cfg.history_days}"
            )
        weights = _weights(raw["weights"], grid.size)
        return _replace(cfg, weights=weights)

    def grid(self) -> np.ndarray:
        if self.sigmas is not None:
            return np.asarray(self.sigmas, dtype=float)
        return delay_grid(self.sigma_min, self.sigma_max, self.sigma_count)

    def to_mapping(self) -> dict:
        out = asdict(self)
        out["start_date"] = self.start_date.isoformat()
        out["end_date"] = self.end_date.isoformat()
        out["mode"] = self.mode.value
        for key in ("sigmas", "weights", "compartments"):
            if out[key] is not None:
                out[key] = list(out[key])
        out["beta_breakpoints"] = [list(pair) for pair in self.beta_breakpoints]
        return out

    def dump(self, out_dir=None) -> Path:
        """Write the resolved config next to a command's outputs."""
        target = Path(out_dir or self.out_dir)
        target.mkdir(parents=True, exist_ok=True)
        path = target / RESOLVED_NAME
        with open(path, "w") as f:
            yaml.safe_dump(self.to_mapping(), f, default_flow_style=None, sort_keys=False)
        return path

    # -- downstream objects ---------------------------------------------------

    def load_series(self) -> EpidemicSeries:
        if self.data is None:
            return load_reference(self.n0)
        return load_csv(self.data, self.n0, interpolate_gaps=self.interpolate_gaps)

    def window(self) -> DataWindow:
        return DataWindow(self.start_date, self.end_date, self.history_days)

    def kernel(self) -> DelayKernel:
        """Configured weights, or the uniform start when none are given."""
        grid = self.grid()
        if self.weights is None:
            return DelayKernel.uniform(grid)
        return DelayKernel(grid, self.weights)

    def with_weights(self, weights) -> "RunConfig":
        """Copy carrying explicit weights on this grid, e.g. a --dirac kernel."""
        return _replace(self, weights=_weights([float(w) for w in weights], self.grid().size))

    def schedule(self) -> BetaSchedule:
        return BetaSchedule(self.beta, self.beta_breakpoints)

    def model_params(self) -> ModelParams:
        return ModelParams(self.schedule(), self.phi_r, self.phi_d, self.n0, self.mode)

    def distributions(self) -> ParamDistributions:
        return ParamDistributions(
            beta_mean=self.beta,
            phi_r_mean=self.phi_r,
            phi_d_mean=self.phi_d,
            n0=self.n0,
            rel_std=self.rel_std,
            mode=self.mode,
            breakpoints=self.beta_breakpoints,
        )

    def objective_spec(self) -> ObjectiveSpec:
        return ObjectiveSpec(self.compartments, normalize=self.normalize)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_step=self.max_step if self.max_step is not None else float("inf"),
            initial_step=self.initial_step,
        )

    def fit_options(self) -> FitOptions:
        return FitOptions(
            tol=self.fit_tol,
            max_iter=self.max_iter,
            fd_step=self.fd_step,
            solver=self.solver_config(),
        )


def _replace(cfg: RunConfig, **changes) -> RunConfig:
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    values.update(changes)
    return RunConfig(**values)


def _non_negative(value, key: str) -> float:
    out = _number(value, key)
    if out < 0:
        raise ConfigError(key, f"must be >= 0, got {value!r}")
    return out


def _threshold(value) -> float:
    out = _number(value, "threshold")
    if not 0 < out <= 1:
        raise ConfigError("threshold", f"must be in (0, 1], got {value!r}")
    return out


def _fd_step(value) -> float:
    out = _positive(value, "fd_step")
    if out >= 0.5:
        raise ConfigError("fd_step", f"must be < 0.5, got {value!r}")
    return out


def _sigmas(value) -> tuple[float, ...] | None:
    if value is None:
        return None
    items = _list(value, "sigmas")
    if not items:
        raise ConfigError("sigmas", "must not be empty")
    sigmas = tuple(_positive(v, f"sigmas[{j}]") for j, v in enumerate(items))
    for j in range(1, len(sigmas)):
        if sigmas[j] <= sigmas[j - 1]:
            raise ConfigError(f"sigmas[{j}]", "lags must be strictly increasing")
    return sigmas


def _weights(value, k: int) -> tuple[float, ...] | None:
    if value is None:
        return None
    items = _list(value, "weights")
    if len(items) != k:
        raise ConfigError("weights", f"{len(items)} values given for {k} lags")
    weights = tuple(_number(v, f"weights[{j}]") for j, v in enumerate(items))
    for j, w in enumerate(weights):
        if not 0 <= w <= 1:
            raise ConfigError(f"weights[{j}]", f"must be in [0, 1], got {w!r}")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOL:
        raise ConfigError("weights", f"must sum to 1, got {math.fsum(weights)!r}")
    return weights


def _breakpoints(value) -> tuple[tuple[float, float], ...]:
    if value is None:
        return ()
    pairs = []
    for j, item in enumerate(_list(value, "beta_breakpoints")):
        key = f"beta_breakpoints[{j}]"
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError(key, f"expected [day, multiplier], got {item!r}")
        day = _non_negative(item[0], f"{key}[0]")
        if pairs and day <= pairs[-1][0]:
            raise ConfigError(f"{key}[0]", "breakpoint days must be strictly increasing")
        pairs.append((day, _positive(item[1], f"{key}[1]")))
    return tuple(pairs)


def _compartments(value) -> tuple[str, ...]:
    items = [value] if isinstance(value, str) else _list(value, "compartments")
    if not items:
        raise ConfigError("compartments", "choose at least one of i, r, d")
    out = []
    for j, item in enumerate(items):
        name = str(item).strip().lower()
        if name not in FITTABLE:
            raise ConfigError(f"compartments[{j}]", f"expected one of i, r, d, got {item!r}")
        if name not in out:
            out.append(name)
    return tuple(out)


def resolve(
    config_path=None,
    overrides=(),
    **flags,
) -> RunConfig:
    """Merge defaults, a config file, ``--set`` pairs and flags, then validate.

    ``flags`` with value None are ignored, so unset CLI options never mask the
    file.
    """
    merged = load_defaults()
    if config_path is not None:
        from_file = read_config_file(config_path)
        unknown = sorted(set(from_file) - set(merged))
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        merged.update(from_file)
    for text in overrides:
        key, value = parse_override(text)
        if key not in merged:
            raise ConfigError(key, "unknown configuration key")
        merged[key] = value
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return RunConfig.from_mapping(merged)
