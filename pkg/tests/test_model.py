import math

import numpy as np
import pytest

from delayfit.dde import HistoryFunction
from delayfit.errors import DomainError
from delayfit.model import (
    BetaSchedule,
    DelayKernel,
    ModelParams,
    TransmissionMode,
    delay_grid,
    delayed_incidence,
    effective_beta,
    is_stable,
    rhs,
    stability_margin,
    unstable_lags,
)


def _history(i_of_t):
    """Vectorized history with the given infected curve and fixed s, r, d."""

    def evaluate(times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((times.size, 4))
        out[:, 0] = 900.0
        out[:, 1] = i_of_t(times)
        return out

    return evaluate


def _params(beta=0.1131, breakpoints=(), phi_r=1 / 24, phi_d=1 / 940, n0=1000.0, mode="density"):
    return ModelParams(BetaSchedule(beta, breakpoints), phi_r, phi_d, n0, mode)


# -- kernel ------------------------------------------------------------------


def test_delay_grid_matches_published_lags():
    grid = delay_grid(2, 35, 12)
    assert grid.tolist() == [2.0, 5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 23.0, 26.0, 29.0, 32.0, 35.0]


def test_kernel_rejects_invalid_weights():
    with pytest.raises(ValueError, match="sum"):
        DelayKernel([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        DelayKernel([1.0, 2.0], [1.5, -0.5])
    with pytest.raises(ValueError, match="increasing"):
        DelayKernel([2.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        DelayKernel([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        DelayKernel([0.0], [1.0])


def test_kernel_constructors():
    uniform = DelayKernel.uniform([1.0, 2.0, 4.0])
    assert np.allclose(uniform.weights, 1 / 3)
    dirac = DelayKernel.dirac([1.0, 2.0, 4.0], 2.0)
    assert dirac.weights.tolist() == [0.0, 1.0, 0.0]
    assert dirac.max_lag == 4.0 and dirac.min_lag == 1.0
    with pytest.raises(ValueError, match="not on the lag grid"):
        DelayKernel.dirac([1.0, 2.0], 3.0)
    assert dirac == DelayKernel([1, 2, 4], [0, 1, 0])


def test_kernel_arrays_are_read_only():
    kernel = DelayKernel.uniform([1.0, 2.0])
    with pytest.raises(ValueError):
        kernel.weights[0] = 1.0


# -- delayed incidence -----------------------------------------------------------


def test_delayed_incidence_constant_history():
    kernel = DelayKernel([1.0, 3.0, 7.0], [0.2, 0.3, 0.5])
    value = delayed_incidence(_history(lambda t: np.full_like(t, 5.0)), 10.0, kernel)
    assert value == pytest.approx(5.0, abs=1e-12)


def test_delayed_incidence_dirac_limit():
    kernel = DelayKernel([2.0], [1.0])
    assert delayed_incidence(_history(lambda t: t), 10.0, kernel) == 8.0


def test_delayed_incidence_weighted_sum():
    kernel = DelayKernel([1.0, 2.0], [0.25, 0.75])
    assert delayed_incidence(_history(lambda t: t**2), 3.0, kernel) == pytest.approx(1.75)


def test_delayed_incidence_is_convex_combination():
    rng = np.random.default_rng(7)
    sigmas = np.array([1.0, 2.5, 4.0, 6.0])
    curve = lambda t: np.sin(t) + 2.0  # noqa: E731
    for _ in range(20):
        weights = rng.dirichlet(np.ones(4))
        weights /= weights.sum()
        kernel = DelayKernel(sigmas, weights)
        lagged = curve(10.0 - sigmas)
        value = delayed_incidence(_history(curve), 10.0, kernel)
        assert lagged.min() - 1e-12 <= value <= lagged.max() + 1e-12


def test_delayed_incidence_names_offending_lag():
    history = HistoryFunction.constant([900.0, 5.0, 0.0, 0.0], t0=0.0, t_min=-1.0)
    kernel = DelayKernel([0.5, 2.0], [0.5, 0.5])
    with pytest.raises(DomainError) as info:
        delayed_incidence(history, 0.5, kernel)
    assert info.value.sigma == 2.0


# -- contact rate --------------------------------------------------------------


def test_effective_beta_before_and_after_intervention():
    params = _params(breakpoints=((73.0, 1 / 3),))
    assert effective_beta(10.0, params) == 0.1131
    assert effective_beta(100.0, params) == pytest.approx(0.0377)
    assert effective_beta(73.0, params) == pytest.approx(0.0377)


def test_effective_beta_constant_without_breakpoints():
    params = _params()
    assert all(effective_beta(t, params) == 0.1131 for t in (0.0, 50.0, 1e4))


def test_effective_beta_frequency_mode_divides_by_n0():
    params = _params(n0=60_000_000, mode=TransmissionMode.FREQUENCY)
    assert effective_beta(0.0, params) == pytest.approx(0.1131 / 60_000_000)


def test_beta_schedule_validation():
    with pytest.raises(ValueError):
        BetaSchedule(0.1, ((10.0, 0.5), (5.0, 0.5)))
    with pytest.raises(ValueError):
        BetaSchedule(0.1, ((10.0, 0.0),))
    with pytest.raises(ValueError):
        BetaSchedule(-0.1)


def test_model_params_validation():
    with pytest.raises(ValueError):
        _params(phi_r=0.0)
    with pytest.raises(ValueError):
        _params(n0=-1.0)


# -- vector field ----------------------------------------------------------------


def test_rhs_disease_free_is_zero():
    kernel = DelayKernel.uniform([1.0, 2.0])
    out = rhs(0.0, np.array([900.0, 0.0, 50.0, 50.0]), _history(np.zeros_like), _params(), kernel)
    assert np.array_equal(out, np.zeros(4))


def test_rhs_single_delay_constant_history():
    kernel = DelayKernel([2.0], [1.0])
    params = _params(beta=0.001)
    out = rhs(5.0, np.array([900.0, 5.0, 0.0, 0.0]), _history(lambda t: np.full_like(t, 5.0)),
              params, kernel)
    assert out[0] == pytest.approx(-0.001 * 900.0 * 5.0)
    assert out[2] == pytest.approx(params.phi_r * 5.0)
    assert out[3] == pytest.approx(params.phi_d * 5.0)


def test_rhs_components_sum_to_zero():
    rng = np.random.default_rng(3)
    kernel = DelayKernel([1.0, 2.0, 3.0], [0.2, 0.3, 0.5])
    for _ in range(50):
        beta = rng.uniform(1e-4, 1e-2)
        s = rng.uniform(0, 1000)
        level = rng.uniform(0, 100)
        params = _params(beta=beta, phi_r=rng.uniform(0.01, 0.5), phi_d=rng.uniform(0.001, 0.1))
        history = _history(lambda t, level=level: level + np.cos(t))
        out = rhs(4.0, np.array([s, 10.0, 0.0, 0.0]), history, params, kernel)
        c = delayed_incidence(history, 4.0, kernel)
        assert abs(out.sum()) <= 1e-12 * max(1.0, beta * s * c)


def test_rhs_monotone_compartments_for_non_negative_lagged_infected():
    kernel = DelayKernel([1.0, 2.0], [0.5, 0.5])
    out = rhs(3.0, np.array([500.0, 1.0, 0.0, 0.0]), _history(lambda t: 1.0 + t), _params(), kernel)
    assert out[0] <= 0 and out[2] >= 0 and out[3] >= 0


# -- stability ---------------------------------------------------------------------


def test_stability_margin_at_largest_published_lag():
    params = _params()
    margins = stability_margin(params, DelayKernel.uniform(delay_grid(2, 35, 12)))
    assert np.all(margins > 0)
    assert margins.min() == margins[-1]
    assert margins[-1] == pytest.approx(2.15e-3, abs=1e-5)
    assert margins[-1] == pytest.approx(math.pi / 70 - (1 / 24 + 1 / 940), abs=1e-15)


def test_stability_margin_boundary_is_zero():
    sigma = 10.0
    phi_d = 0.01
    params = _params(phi_r=math.pi / (2 * sigma) - phi_d, phi_d=phi_d)
    margin = stability_margin(params, DelayKernel([sigma], [1.0]))[0]
    assert abs(margin) < 1e-15


def test_fast_removal_is_flagged_unstable():
    params = _params(phi_r=1.0, phi_d=1.0)
    kernel = DelayKernel([35.0], [1.0])
    assert stability_margin(params, kernel)[0] < -1.9
    assert unstable_lags(params, kernel) == [35.0]
    assert not is_stable(params, kernel)
