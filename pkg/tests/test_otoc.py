import functools

import numpy as np
import pytest

from exceptions import NoGrowthWindow, TruncationWarning
from models import build_preset
from operators import Convention, position_elements
from otoc import (
    OtocKind,
    OtocSeries,
    boltzmann_weights,
    collect_bands,
    first_rise,
    fit_growth_rate,
    growth_bands,
    matrix_oracle,
    microcanonical_otoc,
    thermal_otoc,
)
from schrodinger import solve
from utils import resolve_run_config

TIMES = np.linspace(0.0, 10.0, 501)


@pytest.fixture(scope="module")
def tilted_elements(tilted_eig):
    return position_elements(tilted_eig, 40, Convention.CANONICAL)


def _series(values, times=TIMES):
    return OtocSeries(times, values, OtocKind.THERMAL, 10, "half", beta=1.0)


@pytest.mark.parametrize("m", [0, 3])
def test_harmonic_otoc_is_cos_squared(harmonic_elements, m):
    series = microcanonical_otoc(harmonic_elements, m, TIMES)
    np.testing.assert_allclose(series.values, np.cos(TIMES) ** 2, atol=1e-4)
    assert series.kind is OtocKind.MICROCANONICAL
    assert series.metadata()["m"] == m


def test_half_convention_is_a_quarter(tilted_elements):
    canonical = microcanonical_otoc(tilted_elements, 7, TIMES).values
    half = microcanonical_otoc(tilted_elements.with_convention("half"), 7, TIMES).values
    np.testing.assert_allclose(half, canonical / 4.0, rtol=1e-14)


def test_factorized_form_matches_matrix_oracle(tilted_elements):
    rng = np.random.default_rng(7)
    for m, t in zip(rng.integers(0, 15, size=10), rng.uniform(0.0, 10.0, size=10)):
        fast = microcanonical_otoc(tilted_elements, int(m), [t], check_truncation=False).values[0]
        assert fast == pytest.approx(matrix_oracle(tilted_elements, int(m), t), rel=1e-8)


def test_factorized_form_matches_triple_sum(tilted_elements):
    x, energies, kappa = tilted_elements.x_elements, tilted_elements.energies, tilted_elements.kappa
    m, t = 5, 1.3
    e_lk = energies[:, None] - energies[None, :]
    e_ml = energies[m] - energies
    first = np.einsum("l,lk,lk,l->k", x[m], x, e_lk, np.exp(1j * e_ml * t))
    second = np.einsum("l,lk,l,lk->k", x[m], x, e_ml, np.exp(1j * e_lk * t))
    expected = np.sum(np.abs(kappa * (first - second)) ** 2)
    fast = microcanonical_otoc(tilted_elements, m, [t], check_truncation=False).values[0]
    assert fast == pytest.approx(expected, rel=1e-10)


def test_otoc_at_zero_is_one(tilted_elements):
    # -[x, p]^2 = 1 for canonical pairs once the basis is large enough
    assert microcanonical_otoc(tilted_elements, 0, [0.0]).values[0] == pytest.approx(1.0, abs=1e-3)


def test_state_outside_truncation(harmonic_elements):
    with pytest.raises(ValueError):
        microcanonical_otoc(harmonic_elements, 20, TIMES)


def test_truncation_warning_near_the_edge(harmonic_elements):
    with pytest.warns(TruncationWarning):
        microcanonical_otoc(harmonic_elements, 19, TIMES[:5])


def test_boltzmann_weights():
    energies = np.array([0.5, 1.5, 2.5, 3.5])
    weights = boltzmann_weights(energies, 1.0)
    assert weights.sum() == pytest.approx(1.0)
    assert weights[1] / weights[0] == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValueError):
        boltzmann_weights(energies, 0.0)
    assert len(boltzmann_weights(energies, 30.0)) == 1


def test_cold_thermal_otoc_is_ground_state(tilted_elements):
    cold = thermal_otoc(tilted_elements, 100.0, TIMES)
    ground = microcanonical_otoc(tilted_elements, 0, TIMES)
    np.testing.assert_allclose(cold.values, ground.values, rtol=1e-12)
    assert cold.metadata()["beta"] == 100.0


def test_harmonic_thermal_otoc(harmonic_elements):
    series = thermal_otoc(harmonic_elements, 2.0, TIMES)
    np.testing.assert_allclose(series.values, np.cos(TIMES) ** 2, atol=1e-4)


def test_fit_pure_exponential():
    fit = fit_growth_rate(_series(np.exp(1.4 * TIMES)))
    lam, r_squared, window = fit
    assert lam == pytest.approx(0.7, rel=1e-9)
    assert r_squared == pytest.approx(1.0, abs=1e-12)
    assert window[0] == pytest.approx(0.2, abs=0.021)
    assert window[1] == pytest.approx(10.0)
    assert fit.saturation_time is None


def test_fit_stops_at_saturation():
    fit = fit_growth_rate(_series(np.exp(np.minimum(TIMES, 5.0))))
    assert fit.lambda_hat == pytest.approx(0.5, rel=1e-9)
    assert fit.window[1] == pytest.approx(5.0, abs=0.021)
    assert fit.saturation_time == pytest.approx(5.0, abs=0.021)


def test_fit_explicit_window():
    series = _series(np.exp(np.minimum(TIMES, 5.0)))
    assert fit_growth_rate(series, window=(1.0, 4.0)).lambda_hat == pytest.approx(0.5, rel=1e-9)
    with pytest.raises(ValueError):
        fit_growth_rate(series, window=(1.0, 1.1))


def test_oscillator_has_no_growth_window(harmonic_elements):
    with pytest.raises(NoGrowthWindow):
        fit_growth_rate(microcanonical_otoc(harmonic_elements, 0, TIMES))


def test_short_growth_is_rejected():
    values = np.exp(2.0 * np.minimum(TIMES, 0.8))
    with pytest.raises(NoGrowthWindow):
        fit_growth_rate(_series(values))


def test_collect_bands():
    assert collect_bands([3, 4, 6, 9, 10]) == [(3, 6), (9, 10)]
    assert collect_bands([3, 4, 6], max_gap=0) == [(3, 4), (6, 6)]
    assert collect_bands([]) == []


def test_growth_bands_of_oscillator(harmonic_elements):
    report, series = growth_bands(harmonic_elements, range(4), TIMES)
    assert list(report.table["m"]) == [0, 1, 2, 3]
    assert not report.table["has_window"].any()
    assert report.bands == []
    assert report.growing_states == set()
    assert set(series) == {0, 1, 2, 3}


def test_first_rise():
    values = np.array([1.0, 0.5, 0.2, 0.4, 0.9, 1.5, 1.2, 0.3, 2.0])
    assert first_rise(values) == (2, 5)
    assert first_rise(np.exp(TIMES)) == (500, 500)
    assert first_rise(np.cos(TIMES) ** 2)[0] == 79  # t = π/2


def test_fit_respects_stop_time():
    fit = fit_growth_rate(_series(np.exp(1.4 * TIMES)), stop=5.0)
    assert fit.window[1] == pytest.approx(5.0, abs=0.021)
    assert fit.lambda_hat == pytest.approx(0.7, rel=1e-9)


CELL_TIMES = np.linspace(0.0, 10.0, 500)


@functools.lru_cache(maxsize=None)
def _cell_elements(model, sigma):
    return position_elements(solve(build_preset(model, sigma)), 100)


@functools.lru_cache(maxsize=None)
def _cell_report(model, sigma):
    report, _ = growth_bands(_cell_elements(model, sigma), range(45), CELL_TIMES)
    return report


@pytest.mark.slow
@pytest.mark.parametrize(
    "model, sigma, inside, covered",
    [
        ("ModelI", 0.0, range(2, 18), range(6, 14)),
        ("ModelI", 30.0, range(3, 24), range(7, 20)),
        ("ModelI", 70.0, range(9, 43), range(20, 35)),
        ("ModelII", 0.0, range(45), range(7, 15)),
    ],
)
def test_growth_bands_of_presets(model, sigma, inside, covered):
    grown = _cell_report(model, sigma).growing_states
    assert grown >= set(covered)
    assert grown <= set(inside)


@pytest.mark.slow
def test_model_ii_tilted_has_two_growth_bands():
    report = _cell_report("ModelII", 95.0)
    assert len(report.bands) == 2
    (first_lo, first_hi), (second_lo, second_hi) = report.bands
    assert 1 <= first_lo <= 5 and first_hi <= 11
    assert 14 <= second_lo <= 20 and 22 <= second_hi <= 26
    table = report.table.set_index("m")
    rise = table["t_peak"] - table["t_dip"]
    assert rise.loc[second_lo:second_hi].min() > rise.loc[first_lo:first_hi].max()


@pytest.mark.slow
def test_model_i_rate_below_hilltop_rate():
    table = _cell_report("ModelI", 0.0).table.set_index("m")
    hilltop_rate = np.sqrt(2 * 0.64)
    assert 0.7 * hilltop_rate < table.loc[8, "lambda_hat"] < hilltop_rate


@pytest.mark.slow
def test_thermal_growth_follows_tilt():
    hottest = min(resolve_run_config().betas)
    for sigma in (0.0, 30.0):
        fit = fit_growth_rate(thermal_otoc(_cell_elements("ModelI", sigma), hottest, CELL_TIMES))
        assert fit.lambda_hat > 0
    for beta in resolve_run_config().betas:
        with pytest.raises(NoGrowthWindow):
            fit_growth_rate(thermal_otoc(_cell_elements("ModelI", 70.0), beta, CELL_TIMES))


@pytest.mark.slow
def test_thermal_otoc_is_boltzmann_mixture_of_states():
    elements = _cell_elements("ModelI", 30.0)
    weights = boltzmann_weights(elements.energies, 0.2)
    states = [microcanonical_otoc(elements, m, CELL_TIMES, check_truncation=False).values for m in range(len(weights))]
    thermal = thermal_otoc(elements, 0.2, CELL_TIMES).values
    np.testing.assert_allclose(thermal, np.sum(weights[:, None] * np.array(states), axis=0), rtol=1e-10)
    assert np.all(thermal >= np.min(states, axis=0) * (1 - 1e-12))
    assert np.all(thermal <= np.max(states, axis=0) * (1 + 1e-12))
