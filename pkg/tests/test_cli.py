import json

import pandas as pd
from typer.testing import CliRunner

from delayfit.cli import REPORT_NAME, app
from delayfit.data import reference_series_path
from tests.conftest import write_rows

runner = CliRunner()

# 40-day window on a three-lag grid keeps ensembles quick
SMALL = [
    "--set", "end_date=2020-10-20",
    "--set", "sigmas=[8, 11, 14]",
    "--set", "max_iter=2",
]


def test_stability_table():
    result = runner.invoke(app, ["stability"])
    assert result.exit_code == 0
    assert "35" in result.output
    assert "yes" in result.output


def test_simulate_dirac_kernel(tmp_path):
    result = runner.invoke(app, ["simulate", "--dirac", "11", "--out-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "trajectory.csv")
    assert len(frame) == 150
    assert list(frame.columns[:6]) == ["day", "date", "s", "i", "r", "d"]
    assert frame["day"].iloc[0] == 0 and frame["date"].iloc[0] == "2020-09-11"
    assert (tmp_path / "config.resolved.yaml").exists()


def _snapshot(out, names):
    return {name: (out / name).read_bytes() for name in names}


def test_simulate_reruns_from_resolved_config(tmp_path):
    out = tmp_path / "a"
    result = runner.invoke(app, ["simulate", "--dirac", "11", "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    names = ("trajectory.csv", "config.resolved.yaml")
    first = _snapshot(out, names)
    assert "weights:" in first["config.resolved.yaml"].decode()

    result = runner.invoke(app, ["simulate", "--config", str(out / "config.resolved.yaml")])
    assert result.exit_code == 0, result.output
    assert _snapshot(out, names) == first


def test_ensemble_reruns_from_resolved_config(tmp_path):
    out = tmp_path / "a"
    result = runner.invoke(
        app, ["ensemble", *SMALL, "-n", "2", "--seed", "3", "--out-dir", str(out)]
    )
    assert result.exit_code == 0, result.output
    names = (REPORT_NAME, "trajectory_band.csv", "error_table.csv", "config.resolved.yaml")
    first = _snapshot(out, names)

    result = runner.invoke(app, ["ensemble", "--config", str(out / "config.resolved.yaml")])
    assert result.exit_code == 0, result.output
    assert _snapshot(out, names) == first

    regenerated = tmp_path / "b"
    result = runner.invoke(app, ["report", str(out / REPORT_NAME), "--out-dir", str(regenerated)])
    assert result.exit_code == 0, result.output
    assert _snapshot(regenerated, names[1:3]) == {k: first[k] for k in names[1:3]}


def test_non_finite_run_count_is_a_usage_error(tmp_path):
    result = runner.invoke(app, ["ensemble", "--set", "n_runs=.inf", "--out-dir", str(tmp_path)])
    assert result.exit_code == 2
    assert "n_runs" in result.output


def test_simulate_needs_weights(tmp_path):
    result = runner.invoke(app, ["simulate", "--out-dir", str(tmp_path)])
    assert result.exit_code == 2
    assert "weights" in result.output


def test_simulate_off_grid_dirac_is_a_usage_error(tmp_path):
    result = runner.invoke(app, ["simulate", "--dirac", "12", "--out-dir", str(tmp_path)])
    assert result.exit_code == 2


def test_missing_data_file(tmp_path):
    result = runner.invoke(
        app,
        ["simulate", "--dirac", "11", "--set", f"data={tmp_path / 'nope.csv'}",
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 3
    assert "not found" in result.output


def test_invalid_override_names_the_key(tmp_path):
    result = runner.invoke(app, ["fit", "--set", "threshold=2", "--out-dir", str(tmp_path)])
    assert result.exit_code == 2
    assert "threshold" in result.output


def test_fit_single_lag_writes_unit_weight(tmp_path):
    result = runner.invoke(app, ["fit", "--set", "sigmas=[11]", "--out-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "weights.csv").read_text().splitlines() == ["sigma,weight", "11,1"]
    document = json.loads((tmp_path / "fit.json").read_text())
    assert document["fit"]["converged"] is True
    assert document["fit"]["stopped"] == "single_lag"
    assert set(document["errors"]) == {"s", "i", "r", "d"}
    assert document["stability"]["stable"] is True


def test_fit_not_converged_exit_code(tmp_path):
    result = runner.invoke(app, ["fit", *SMALL, "--set", "max_iter=0", "--out-dir", str(tmp_path)])
    assert result.exit_code == 5
    document = json.loads((tmp_path / "fit.json").read_text())
    assert document["fit"]["converged"] is False


def test_ensemble_rejects_zero_runs(tmp_path):
    result = runner.invoke(app, ["ensemble", "-n", "0", "--out-dir", str(tmp_path)])
    assert result.exit_code == 2
    assert "n_runs" in result.output


def test_ensemble_is_reproducible_and_auditable(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        result = runner.invoke(
            app, ["ensemble", *SMALL, "-n", "2", "--seed", "7", "--out-dir", str(out)]
        )
        assert result.exit_code == 0, result.output
    report = (first / REPORT_NAME).read_bytes()
    assert report == (second / REPORT_NAME).read_bytes()
    for name in (
        "weights_mean.csv", "weights_frequency.csv", "error_table.csv", "trajectory_band.csv"
    ):
        assert (first / name).exists()

    result = runner.invoke(app, ["report", str(first / REPORT_NAME)])
    assert result.exit_code == 0, result.output
    assert "dominant sigma" in result.output
    assert "dominant sigma (frequency)" in (first / "summary.txt").read_text()

    raw = json.loads(report)
    raw["aggregates"]["weight_mean"][0] += 0.25
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(raw))
    result = runner.invoke(app, ["report", str(tampered)])
    assert result.exit_code == 6


def test_report_missing_file(tmp_path):
    result = runner.invoke(app, ["report", str(tmp_path / "none.json")])
    assert result.exit_code == 2


def test_data_inspect_reference():
    result = runner.invoke(app, ["data", "inspect", str(reference_series_path()), "--rows", "2"])
    assert result.exit_code == 0, result.output
    assert "185" in result.output


def test_data_convert_plain(tmp_path):
    source = write_rows(tmp_path / "in.csv", ["2020-03-01,10,0,0", "2020-03-02,12,1,0"])
    dest = tmp_path / "out.csv"
    result = runner.invoke(
        app, ["data", "convert", str(source), str(dest), "--plain", "--n0", "1000"]
    )
    assert result.exit_code == 0, result.output
    assert dest.read_text().splitlines()[1] == "2020-03-01,10,0,0,990"


def test_data_inspect_bad_file(tmp_path):
    source = write_rows(tmp_path / "bad.csv", ["2020-03-01,ten,0,0"])
    result = runner.invoke(app, ["data", "inspect", str(source)])
    assert result.exit_code == 3
