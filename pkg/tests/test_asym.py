import math

import numpy as np
import pytest

import checks
from asym import (
    RADIAL_N3_COEFFICIENT,
    AsymptoticFormula,
    asymptotic_curve,
    aux_functions,
    envelope,
    envelope_domination_integral,
    envelope_slope,
    mu_disk_power_sin,
    mu_projection,
    mu_radial_n2,
    mu_radial_n3,
    mu_rect,
    mu_rect_stationary_phase,
    radial_n3_coefficient,
    rect_phase_coefficients,
    sign_changes,
    sqrt_sin_log_antiderivative,
    zero_crossings,
)
from problems import nonlinearity_by_id
from specfun import ball_eigenpair


@pytest.fixture(scope="module")
def disk_pair():
    return ball_eigenpair(2)


def test_disk_formula_at_a_cosine_extremum(disk_pair):
    xi = math.pi / disk_pair.c0
    expected = 4 * math.pi * disk_pair.c0 / disk_pair.nu1**2
    assert mu_disk_power_sin(xi, 1.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(2.36, abs=0.01)


def test_disk_formula_at_a_cosine_zero(disk_pair):
    assert mu_disk_power_sin(math.pi / (2 * disk_pair.c0), 1.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("xi", (0.7, 5.0, 33.3))
def test_disk_formula_at_p_zero_is_the_radial_formula(xi):
    assert mu_disk_power_sin(xi, 0.0) == pytest.approx(mu_radial_n2(xi), rel=1e-12)


def test_formulas_need_positive_xi():
    with pytest.raises(ValueError):
        mu_disk_power_sin(0.0, 1.0)
    with pytest.raises(ValueError):
        mu_radial_n3(-1.0)


def test_rect_amplitude_and_period():
    xi = np.linspace(0.1, 30.0, 3000)
    values = np.array([mu_rect(x, (1.0, 2.0)) for x in xi])
    amplitude = 4 * math.sqrt(2) / math.pi
    assert amplitude == pytest.approx(1.8006, abs=1e-4)
    assert np.max(np.abs(values)) <= amplitude + 1e-12
    assert np.max(np.abs(values)) == pytest.approx(amplitude, rel=1e-4)
    period = math.pi * math.sqrt(2)
    assert mu_rect(3.0 + period, (1.0, 2.0)) == pytest.approx(mu_rect(3.0, (1.0, 2.0)), abs=1e-12)


def test_rect_general_branch_agrees_in_the_plane(rng):
    for a, b in rng.uniform(0.2, 5.0, size=(20, 2)):
        xi = float(rng.uniform(0.5, 50.0))
        planar = mu_rect(xi, (a, b))
        general = mu_rect(xi, (a, b), general=True)
        assert general == pytest.approx(planar, rel=1e-12, abs=1e-12)


def test_box_prediction_decays_in_three_dimensions():
    amplitude = 2 ** (1.5 * 1.5) / math.pi**1.5
    for xi in (10.0, 100.0, 1000.0):
        assert abs(mu_rect(xi, (1.0, 1.0, 1.0))) <= amplitude * xi**-0.5 + 1e-15


def test_rect_rejects_bad_lengths():
    with pytest.raises(ValueError):
        mu_rect(1.0, ())
    with pytest.raises(ValueError):
        mu_rect(1.0, (1.0, -1.0))


def test_rect_rebuilt_from_stationary_phase():
    alpha1, alpha2 = rect_phase_coefficients(1.0, 2.0)
    assert alpha1 == pytest.approx(math.pi**2 / math.sqrt(2))
    assert alpha2 == pytest.approx(math.pi**2 / (4 * math.sqrt(2)))
    for xi in (1.3, 7.0, 22.5):
        assert mu_rect_stationary_phase(xi, 1.0, 2.0) == pytest.approx(mu_rect(xi, (1.0, 2.0)), rel=1e-10, abs=1e-12)


def test_radial_n3_coefficient():
    assert RADIAL_N3_COEFFICIENT == pytest.approx(2.36, abs=0.01)
    assert radial_n3_coefficient() == pytest.approx(RADIAL_N3_COEFFICIENT, rel=1e-6)


def test_radial_formulas_at_special_points(disk_pair):
    xi = 0.75 * math.pi / math.sqrt(math.pi / 2)
    assert mu_radial_n3(xi) == pytest.approx(0.0, abs=1e-12)
    xi2 = math.pi / disk_pair.c0
    assert mu_radial_n2(xi2) == pytest.approx(4 * math.pi / (xi2 * disk_pair.nu1**2), rel=1e-12)


def test_antiderivative_at_zero():
    assert sqrt_sin_log_antiderivative(np.array(0.0)) == pytest.approx(-1.0 / 3.0)


def test_antiderivative_derivative(rng):
    h = nonlinearity_by_id("sqrtsinlog").h
    u = rng.uniform(0.5, 100.0, 50)
    step = 1e-5
    numeric = (sqrt_sin_log_antiderivative(u + step) - sqrt_sin_log_antiderivative(u - step)) / (2 * step)
    np.testing.assert_allclose(numeric, h(u), atol=1e-6)


def test_aux_values_at_the_ends(disk_pair):
    aux = aux_functions(disk_pair, p=0.5)
    assert aux.f0 == pytest.approx(-2 / disk_pair.nu1**2, rel=1e-12)
    assert aux.f(0.0) == pytest.approx(-0.3458, abs=1e-4)
    assert aux.g(0.0) == pytest.approx(-2 * disk_pair.c0**0.5 / disk_pair.nu1**2, rel=1e-10)
    assert abs(aux.g(1.0 - 1e-9)) < 1e-3


def test_aux_f_matches_its_definition(disk_pair):
    aux = aux_functions(disk_pair)
    r = np.linspace(0.05, 0.95, 10)
    np.testing.assert_allclose(aux.f(r), r * disk_pair.phi1(r) / disk_pair.dphi1(r), rtol=1e-10)


def test_aux_derivatives(disk_pair):
    aux = aux_functions(disk_pair)
    r = np.linspace(0.01, 0.99, 50)
    step = 1e-6
    np.testing.assert_allclose(aux.df(r), (aux.f(r + step) - aux.f(r - step)) / (2 * step), atol=1e-7)
    assert np.all(aux.df(np.linspace(1e-4, 1 - 1e-4, 2000)) > 0)


def test_aux_for_the_ball_in_three_dimensions():
    pair = ball_eigenpair(3)
    aux = aux_functions(pair)
    assert aux.f1(0.0) == pytest.approx(0.0, abs=1e-15)
    assert aux.df1(0.0) == pytest.approx(-3 / math.pi**2, rel=1e-9)


def test_envelope_domination(disk_pair):
    value = envelope_domination_integral(disk_pair)
    assert 0.09 <= value <= 0.11
    assert value < abs(aux_functions(disk_pair).f0)


def test_projection_of_zero_nonlinearity():
    zero = nonlinearity_by_id("zero")
    assert mu_projection(5.0, zero) == 0.0
    assert mu_projection(1e5, zero) == 0.0


def test_projection_approaches_the_power_sin_formula(disk_pair):
    sqrt_sin = nonlinearity_by_id("sqrtusinu")
    for xi in np.linspace(150.0, 200.0, 6):
        amplitude = 4 * math.pi * xi**-0.5 * disk_pair.c0**0.5 / disk_pair.nu1**2
        deviation = abs(mu_projection(xi, sqrt_sin, disk_pair) - mu_disk_power_sin(xi, 0.5))
        assert deviation < 0.3 * amplitude


def test_asymptotic_curve_binding():
    curve = asymptotic_curve(AsymptoticFormula.RECT2D, dims=(1.0, 2.0))
    xi = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(curve(xi), [mu_rect(x, (1.0, 2.0)) for x in xi])
    assert curve(2.0) == pytest.approx(mu_rect(2.0, (1.0, 2.0)))
    assert curve.describe() == "rect2d(dims=(1.0, 2.0))"
    assert asymptotic_curve("radial-n3").describe() == "radial-n3"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"formula": "disk-power-sin"},
        {"formula": "disk-power-sin", "p": 2.0},
        {"formula": "rect2d", "dims": (1.0, 2.0, 3.0)},
        {"formula": "rectnd"},
        {"formula": "projection"},
    ],
)
def test_asymptotic_curve_rejects_missing_parameters(kwargs):
    formula = kwargs.pop("formula")
    with pytest.raises(ValueError):
        asymptotic_curve(formula, **kwargs)


def test_zero_crossings_and_sign_changes():
    xi = np.linspace(0.5, 10.0, 2000)
    mu = np.sin(xi)
    np.testing.assert_allclose(zero_crossings(xi, mu), [math.pi, 2 * math.pi, 3 * math.pi], atol=1e-4)
    assert sign_changes(mu) == 3
    assert sign_changes(np.array([1.0, 0.0, 2.0, -1.0])) == 1


def test_envelope_and_slope():
    xi = np.linspace(10.0, 2000.0, 200_000)
    mu = xi**0.5 * np.sin(xi)
    peaks_xi, peaks_mu = envelope(xi, mu)
    assert peaks_xi.size > 100
    np.testing.assert_array_less(peaks_mu, peaks_xi**0.5 + 1e-9)
    assert envelope_slope(xi, mu) == pytest.approx(0.5, abs=0.02)
    with pytest.raises(ValueError):
        envelope_slope(xi[:3], mu[:3])


@pytest.mark.slow
def test_projection_curve_for_sqrt_sin_log():
    results = checks.check_projection()
    failed = [result.model_dump() for result in results if not result.passed]
    assert not failed, failed
    by_criterion = {result.criterion: result.value for result in results}
    assert by_criterion["sign changes on [1, 1e10]"] >= 8
    assert by_criterion["envelope log-log slope on [1e3, 1e6]"] == pytest.approx(0.5, abs=0.05)
