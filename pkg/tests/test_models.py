import numpy as np
import pytest
from numpy.polynomial import Polynomial

from models import MODELS, ModelTag, build_preset, build_spec, region_builder, spec_from_config
from models import double_well, harmonic, plateau_well, triple_well
from models.potential import lambda_to_sigma, real_roots, sigma_to_lambda, zero_min_shift


def test_sigma_lambda_mapping():
    assert sigma_to_lambda(10.0, 0.02, 0.64) == pytest.approx(1.25)
    assert lambda_to_sigma(1.25, 0.02, 0.64) == pytest.approx(10.0)
    assert build_preset(ModelTag.MODEL_I, 10.0).lam == pytest.approx(1.25)


def test_harmonic_preset_maps_sigma_to_lambda():
    spec = harmonic.build(0.3)
    assert spec.lam == pytest.approx(0.3)
    assert spec.model_tag is ModelTag.HARMONIC
    assert spec.shift == pytest.approx(0.045)


@pytest.mark.parametrize("tag", [ModelTag.MODEL_I, ModelTag.MODEL_IA, ModelTag.MODEL_II])
@pytest.mark.parametrize("sigma", [0.0, 30.0, 95.0])
def test_global_minimum_is_zero(tag, sigma):
    spec = build_preset(tag, sigma)
    x = np.linspace(-10.0, 10.0, 200001)
    values = spec.evaluate(x)
    assert values.min() >= -1e-9
    assert values.min() < 1e-3


def test_model_i_shape():
    spec = double_well.build(0.0)
    assert spec.coefficients == {4: 0.02, 2: -0.64}
    assert spec.is_even
    assert spec.evaluate(0.0) == pytest.approx(5.12, abs=1e-12)
    assert spec.evaluate(4.0) == pytest.approx(0.0, abs=1e-12)
    assert not double_well.build(10.0).is_even


@pytest.mark.parametrize("tag", [ModelTag.MODEL_I, ModelTag.MODEL_IA, ModelTag.MODEL_II])
def test_untilted_presets_are_even_and_tilt_is_linear(tag):
    spec = build_preset(tag, 0.0)
    x = np.linspace(0.0, 5.0, 51)
    np.testing.assert_array_equal(spec.evaluate(x), spec.evaluate(-x))
    assert build_preset(tag, 60.0).lam == 2.0 * build_preset(tag, 30.0).lam
    assert build_preset(ModelTag.MODEL_I, 30.0).evaluate(0.0, 1) == pytest.approx(3.75)


def test_evaluate_derivatives():
    spec = double_well.build(10.0)
    x = 1.5
    assert spec.evaluate(x, 1) == pytest.approx(4 * 0.02 * x**3 - 2 * 0.64 * x + 1.25)
    assert spec.evaluate(x, 2) == pytest.approx(12 * 0.02 * x**2 - 2 * 0.64)
    assert spec.evaluate(x, 3) == pytest.approx(24 * 0.02 * x)
    with pytest.raises(ValueError):
        spec.evaluate(x, 4)


def test_closed_form_critical_tilts():
    assert double_well.critical_lambda() == pytest.approx(1.9707, abs=1e-4)
    assert plateau_well.critical_lambda() == pytest.approx(5.96857, abs=1e-4)


def test_perturbed_recomputes_shift():
    spec = double_well.build(0.0)
    tilted = spec.perturbed(1.25)
    reference = double_well.build(10.0)
    assert tilted.lam == pytest.approx(reference.lam)
    assert tilted.shift == pytest.approx(reference.shift, rel=1e-12)
    assert tilted.coefficients == spec.coefficients


@pytest.mark.parametrize(
    "coefficients",
    [{3: 1.0}, {4: -1.0, 2: 1.0}, {8: 1.0}, {}],
)
def test_build_spec_rejects_unconfined(coefficients):
    with pytest.raises(ValueError):
        build_spec(coefficients)


def test_build_spec_rejects_negative_tilt():
    with pytest.raises(ValueError):
        build_spec({2: 0.5}, lam=-1.0)


def test_build_preset_rejects_negative_sigma():
    with pytest.raises(ValueError):
        build_preset("ModelI", -1.0)
    with pytest.raises(ValueError):
        build_preset("Custom", 0.0)


def test_spec_from_config_custom():
    spec = spec_from_config({"model": "Custom", "sigma": 0.0, "coefficients": {4: 1.0, 2: -2.0}, "lambda": 0.5})
    assert spec.model_tag is ModelTag.CUSTOM
    assert spec.lam == 0.5
    with pytest.raises(ValueError):
        spec_from_config({"model": "Custom", "coefficients": {4: 1.0}})


def test_to_config_round_trip():
    spec = triple_well.build(20.0)
    rebuilt = spec_from_config({**spec.to_config(), "model": "Custom"})
    assert rebuilt.lam == pytest.approx(spec.lam)
    x = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(rebuilt.evaluate(x), spec.evaluate(x), atol=1e-9)


def test_real_roots_of_cubic():
    roots = real_roots(Polynomial([6.0, -5.0, -2.0, 1.0]))  # (x - 1)(x + 2)(x - 3)
    np.testing.assert_allclose(roots, [-2.0, 1.0, 3.0], atol=1e-12)


def test_real_roots_respects_interval():
    roots = real_roots(Polynomial([6.0, -5.0, -2.0, 1.0]), 0.0, 2.0)
    np.testing.assert_allclose(roots, [1.0], atol=1e-12)


def test_zero_min_shift_of_tilted_quartic():
    shift, argmin = zero_min_shift(Polynomial([0.0, 0.0, -0.64, 0.0, 0.02]), 1.25)
    assert argmin < 0.0
    assert shift > 0.0


def test_registry_covers_presets():
    assert set(MODELS) == {ModelTag.MODEL_I, ModelTag.MODEL_IA, ModelTag.MODEL_II, ModelTag.HARMONIC}


def test_region_builder_keeps_other_coefficient():
    name, preset, builder = region_builder(ModelTag.MODEL_II)
    assert name == "a0"
    assert preset == triple_well.A0
    spec = builder(10.0, 2.0)
    assert spec.coefficients == {2: triple_well.A1, 4: -10.0, 6: 1.0}
    assert spec.lam == 2.0
    with pytest.raises(ValueError):
        region_builder(ModelTag.HARMONIC)
