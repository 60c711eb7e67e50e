import os
from datetime import date

import numpy as np
import pytest

from delayfit.calibrate import (
    ForwardModel,
    ObjectiveSpec,
    fit_weights,
    fitted_errors,
    grid_search,
    kkt_residual,
    misfit,
    model_minimizer,
    objective,
    project_simplex,
    relative_l2_error,
    residuals,
    simplex_lattice,
    simulate,
    spectral_step,
    synthesize,
)
from delayfit.data import DataWindow, load_csv, slice_window
from delayfit.errors import DataError, DomainError
from delayfit.model import BetaSchedule, DelayKernel, ModelParams, TransmissionMode
from tests.conftest import BETA, N0, make_series

LAGS = (8.0, 11.0, 14.0)


def _bisection_projection(v):
    """Reference projection: bisect the shift until the clipped vector sums to one."""
    lo = v.min(axis=1) - 1.0
    hi = v.max(axis=1)
    for _ in range(200):
        mid = (lo + hi) / 2
        total = np.clip(v - mid[:, None], 0.0, None).sum(axis=1)
        lo = np.where(total > 1.0, mid, lo)
        hi = np.where(total > 1.0, hi, mid)
    return np.clip(v - ((lo + hi) / 2)[:, None], 0.0, None)


# -- simplex -------------------------------------------------------------------


def test_projection_examples():
    assert project_simplex([0.6, 0.6]).tolist() == [0.5, 0.5]
    assert project_simplex([1.5, -0.3]).tolist() == [1.0, 0.0]
    assert project_simplex([0.2, 0.3, 0.5]) == pytest.approx([0.2, 0.3, 0.5], abs=1e-15)


def test_projection_matches_reference_on_random_vectors():
    rng = np.random.default_rng(11)
    for dim in range(2, 13):
        v = rng.normal(scale=3.0, size=(1000, dim))
        expected = _bisection_projection(v)
        got = np.array([project_simplex(row) for row in v])
        assert np.abs(got - expected).max() < 1e-10
        assert np.all(got >= 0)
        assert np.allclose(got.sum(axis=1), 1.0, atol=1e-12)


def test_projection_is_idempotent_and_non_expansive():
    rng = np.random.default_rng(5)
    for _ in range(200):
        a, b = rng.normal(size=(2, 6))
        pa, pb = project_simplex(a), project_simplex(b)
        assert np.allclose(project_simplex(pa), pa, atol=1e-14)
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12


def test_projection_survives_huge_gradient_steps():
    w = np.array([0.2, 0.5, 0.3])
    grad = np.array([3.0, -2.0, 1.0])
    for step in (1e15, 1e17, 1e30):
        assert project_simplex(w - step * grad).tolist() == [0.0, 1.0, 0.0]


def test_projection_is_shift_invariant():
    rng = np.random.default_rng(3)
    for _ in range(100):
        v = rng.normal(size=7)
        assert np.allclose(project_simplex(v + 1e3), project_simplex(v), atol=1e-12)


def test_projection_rejects_bad_input():
    with pytest.raises(ValueError):
        project_simplex([])
    with pytest.raises(ValueError):
        project_simplex([np.nan, 1.0])


def test_simplex_lattice():
    points = simplex_lattice(3, 0.5)
    assert points.shape == (6, 3)
    assert np.allclose(points.sum(axis=1), 1.0)
    assert simplex_lattice(3, 0.02).shape == (1326, 3)
    with pytest.raises(ValueError):
        simplex_lattice(2, 0.3)


def test_kkt_residual_vanishes_at_stationary_vertex():
    w = np.array([1.0, 0.0, 0.0])
    assert kkt_residual(w, np.array([-1.0, 0.5, 2.0]), 1.0) == 0.0
    assert kkt_residual(w, np.array([2.0, 0.0, 0.0]), 1.0) > 0.0


def test_spectral_step_keeps_previous_without_positive_curvature():
    assert spectral_step(np.array([1.0, -1.0]), np.array([-1.0, 1.0]), 0.5) == 0.5
    assert spectral_step(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.5) == 0.5
    assert spectral_step(np.array([1.0, -1.0]), np.array([4.0, -4.0]), 0.5) == 0.25


def test_model_minimizer_on_linear_residuals():
    # identity columns: the model minimizer is the projection of the target
    columns = np.eye(3)
    target = np.array([0.2, 0.5, 0.3])
    assert np.allclose(model_minimizer(-target, columns), target, atol=1e-8)
    target = np.array([2.0, -1.0, 0.0])
    assert np.allclose(model_minimizer(-target, columns), [1.0, 0.0, 0.0], atol=1e-8)
    assert model_minimizer(np.zeros(4), np.zeros((4, 3))) is None


# -- errors --------------------------------------------------------------------


def test_relative_l2_error_examples():
    assert relative_l2_error([2.0, 4.0], [1.0, 2.0]) == 1.0
    assert relative_l2_error([3.0, 4.0], [3.0, 4.0]) == 0.0
    assert relative_l2_error([0.0, 0.0], [3.0, 4.0]) == 1.0
    assert relative_l2_error([1.0, 1.0], [1.0, 0.0]) == 1.0


def test_relative_l2_error_zero_reference():
    with pytest.raises(DataError):
        relative_l2_error([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        relative_l2_error([1.0], [1.0, 2.0])


# -- forward model ---------------------------------------------------------------


def test_simulate_is_deterministic(published_params, short_data):
    kernel = DelayKernel.uniform(LAGS)
    a = simulate(published_params, kernel, short_data)
    b = simulate(published_params, kernel, short_data)
    assert np.array_equal(a.states, b.states)
    assert a.states.shape == (40, 4)
    assert np.array_equal(a.states[0], short_data.window.states()[0])


def test_disease_free_data_gives_constant_trajectory():
    series = make_series([0.0] * 20, [5.0] * 20, [1.0] * 20)
    data = slice_window(series, DataWindow(date(2020, 1, 6), date(2020, 1, 20), 5))
    params = ModelParams(BetaSchedule(0.01), 0.1, 0.01, 1000.0)
    result = simulate(params, DelayKernel.uniform([2.0, 5.0]), data)
    expected = np.tile([994.0, 0.0, 5.0, 1.0], (15, 1))
    assert np.allclose(result.states, expected, rtol=1e-14, atol=1e-14)


def test_single_day_window_is_rejected(published_params, reference):
    data = slice_window(reference, DataWindow(date(2020, 9, 11), date(2020, 9, 11), 35))
    with pytest.raises(DomainError):
        ForwardModel(published_params, LAGS, data)


def test_history_shorter_than_lag_is_rejected(published_params, reference):
    data = slice_window(reference, DataWindow(date(2020, 9, 11), date(2020, 10, 1), 5))
    with pytest.raises(DomainError):
        simulate(published_params, DelayKernel.uniform(LAGS), data)


# -- objective -------------------------------------------------------------------


@pytest.fixture(scope="module")
def planted(short_data):
    params = ModelParams(
        BetaSchedule(0.1131, ((73.0, 1 / 3),)), 1 / 24, 1 / 940, 60_000_000,
        TransmissionMode.FREQUENCY,
    )
    kernel = DelayKernel(LAGS, [0.2, 0.5, 0.3])
    return params, kernel, synthesize(params, kernel, short_data)


def test_objective_vanishes_at_planted_weights(planted):
    params, kernel, data = planted
    spec = ObjectiveSpec(("i", "d"))
    assert objective(kernel.weights, params, spec, data, LAGS) == 0.0
    errors = fitted_errors(params, kernel, data)
    assert set(errors) == {"s", "i", "r", "d"}
    assert max(errors.values()) < 1e-6


def test_objective_grows_away_from_planted_weights(planted):
    params, _, data = planted
    spec = ObjectiveSpec(("i", "d"))
    assert objective([1.0, 0.0, 0.0], params, spec, data, LAGS) > 0.0
    assert objective([0.0, 0.0, 1.0], params, spec, data, LAGS) > 0.0


def test_objective_is_additive_over_compartments(published_params, short_data):
    states = simulate(published_params, DelayKernel.uniform(LAGS), short_data).states
    both = misfit(states, ObjectiveSpec(("i", "d")), short_data)
    infected = misfit(states, ObjectiveSpec(("i",)), short_data)
    deceased = misfit(states, ObjectiveSpec(("d",)), short_data)
    assert both == pytest.approx(infected + deceased, rel=1e-14)


def test_objective_on_selected_days(published_params, short_data):
    states = simulate(published_params, DelayKernel.uniform(LAGS), short_data).states
    spec = ObjectiveSpec(("i",), sample_times=[0.0, 10.0, 20.0])
    residual = states[[0, 10, 20], 1] - short_data.window.infected[[0, 10, 20]]
    assert misfit(states, spec, short_data) == pytest.approx(float(residual @ residual))
    with pytest.raises(DataError):
        misfit(states, ObjectiveSpec(("i",), sample_times=[2.5]), short_data)


def test_misfit_is_squared_norm_of_residuals(published_params, short_data):
    states = simulate(published_params, DelayKernel.uniform(LAGS), short_data).states
    for normalize in (False, True):
        spec = ObjectiveSpec(("i", "r", "d"), normalize=normalize)
        r = residuals(states, spec, short_data)
        assert r.shape == (3 * 40,)
        assert misfit(states, spec, short_data) == pytest.approx(float(r @ r), rel=1e-14)


def test_density_mode_matches_frequency_mode(published_params, published_data):
    kernel = DelayKernel.uniform(LAGS)
    density = ModelParams(
        BetaSchedule(BETA / N0, ((73.0, 1 / 3),)),
        published_params.phi_r,
        published_params.phi_d,
        published_params.n0,
        TransmissionMode.DENSITY,
    )
    a = simulate(published_params, kernel, published_data).states
    b = simulate(density, kernel, published_data).states
    assert a.shape == (150, 4)
    assert np.allclose(a, b, rtol=1e-8, atol=0)


def test_objective_spec_validation():
    with pytest.raises(ValueError):
        ObjectiveSpec(("s",))
    with pytest.raises(ValueError):
        ObjectiveSpec(())
    assert ObjectiveSpec(("D", "i", "d")).compartments == ("d", "i")


# -- fitting ---------------------------------------------------------------------


def test_single_lag_fit_is_trivial(published_params, short_data):
    result = fit_weights(published_params, ObjectiveSpec(), short_data, DelayKernel([11.0], [1.0]))
    assert result.weights.tolist() == [1.0]
    assert result.converged and result.stopped == "single_lag"
    assert result.iterations == 0


def test_fit_descends_and_stays_feasible(planted):
    params, _, data = planted
    spec = ObjectiveSpec(("i", "d"), normalize=True)
    result = fit_weights(params, spec, data, DelayKernel.uniform(LAGS), max_iter=15)
    history = np.array(result.history)
    assert history[-1] < history[0]
    assert np.all(np.diff(history) <= 0)
    assert np.all(result.weights >= 0)
    assert result.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert result.iterations <= 15
    assert result.evaluations > result.iterations


def test_fit_converges_on_raw_objective(planted):
    params, kernel, data = planted
    result = fit_weights(params, ObjectiveSpec(), data, DelayKernel.uniform(LAGS))
    assert result.converged and result.stopped == "tolerance"
    assert result.kkt_residual <= 1e-6
    assert np.abs(result.weights - kernel.weights).sum() < 0.01
    assert np.all(np.diff(result.history) <= 0)


def test_fit_result_serialization(planted):
    params, _, data = planted
    result = fit_weights(params, ObjectiveSpec(), data, DelayKernel.uniform(LAGS), max_iter=2)
    restored = type(result).from_dict(result.to_dict())
    assert np.array_equal(restored.weights, result.weights)
    assert restored.objective_value == result.objective_value
    assert restored.stopped == result.stopped


def test_fit_rejects_bad_settings(published_params, short_data):
    with pytest.raises(ValueError):
        fit_weights(
            published_params, ObjectiveSpec(), short_data, DelayKernel.uniform(LAGS), fd_step=0.7
        )


def test_grid_search_finds_planted_lattice_point(planted):
    params, _, data = planted
    sigmas = (8.0, 14.0)
    truth = synthesize(params, DelayKernel(sigmas, [0.25, 0.75]), data)
    best, value = grid_search(params, ObjectiveSpec(), truth, sigmas, resolution=0.25)
    assert best.tolist() == [0.25, 0.75]
    assert value == 0.0


def _noise_floor(params, truth: DelayKernel, data) -> float:
    """Misfit of the planted weights on the mesh a fit from uniform weights uses."""
    model = ForwardModel(params, truth.sigmas, data)
    mesh = model.solve(DelayKernel.uniform(truth.sigmas).weights).times
    return misfit(model.sample(model.solve(truth.weights, mesh=mesh)), ObjectiveSpec(), data)


def _planted_weights(grid, mass: dict[float, float]) -> list[float]:
    return [mass.get(float(s), 0.0) for s in grid]


@pytest.mark.slow
@pytest.mark.parametrize(
    "mass",
    [{11.0: 1.0}, {8.0: 0.5, 14.0: 0.5}],
    ids=["dirac_11", "split_8_14"],
)
def test_fit_recovers_planted_kernel_on_full_grid(
    published_params, published_data, published_grid, mass
):
    truth = DelayKernel(published_grid, _planted_weights(published_grid, mass))
    data = synthesize(published_params, truth, published_data)
    init = DelayKernel.uniform(published_grid)
    result = fit_weights(published_params, ObjectiveSpec(), data, init)
    assert result.converged
    assert np.abs(result.weights - truth.weights).sum() < 0.1
    assert result.objective_value <= 10 * _noise_floor(published_params, truth, data)


@pytest.mark.slow
def test_fit_on_bundled_series_concentrates_on_planted_lags(
    published_params, published_data, published_grid
):
    # the bundled series carries weights 0.2/0.5/0.3 on 8/11/14 plus a reporting ripple
    result = fit_weights(
        published_params, ObjectiveSpec(), published_data, DelayKernel.uniform(published_grid)
    )
    band = (published_grid >= 8) & (published_grid <= 17)
    assert result.weights[band].sum() >= 0.75
    assert 8 <= published_grid[int(np.argmax(result.weights))] <= 14


@pytest.mark.slow
def test_fit_agrees_with_grid_search(published_params, short_data):
    spec = ObjectiveSpec(("i", "d"), normalize=True)
    result = fit_weights(published_params, spec, short_data, DelayKernel.uniform(LAGS))
    _, best = grid_search(published_params, spec, short_data, LAGS, resolution=0.02)
    assert result.objective_value <= best * 1.01


@pytest.mark.slow
@pytest.mark.skipif(
    "DELAYFIT_ITALY_CSV" not in os.environ,
    reason="set DELAYFIT_ITALY_CSV to a national series to run",
)
def test_published_fit_on_national_data(published_params, published_grid):
    series = load_csv(os.environ["DELAYFIT_ITALY_CSV"], n0=60_000_000)
    data = slice_window(series, DataWindow(date(2020, 9, 11), date(2021, 2, 7), 35))
    init = DelayKernel.uniform(published_grid)
    result = fit_weights(published_params, ObjectiveSpec(), data, init)
    errors = fitted_errors(published_params, result.kernel, data)
    assert errors["i"] < 0.2 and errors["d"] < 0.2
