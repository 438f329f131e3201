import cmath
import math

import numpy as np
import pytest
from scipy import special

from oscint import (
    PhaseConditionError,
    PhaseProblem,
    QuadratureError,
    find_critical_point,
    integrate,
    integrate_with_error,
    oscillatory_integral,
    resolved_panels,
    stationary_phase_endpoint,
    stationary_phase_interior,
    stationary_phase_quadratic,
)
from specfun import ball_eigenpair, bessel_j

FREQUENCIES = (100.0, 200.0, 400.0, 800.0)


def ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def square_phase(mu, a=-1.0, b=1.0):
    return PhaseProblem(
        amplitude=ones,
        phase=lambda x: np.asarray(x, dtype=float) ** 2,
        dphase=lambda x: 2.0 * np.asarray(x, dtype=float),
        d2phase=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0),
        a=a,
        b=b,
        mu=mu,
    )


def cap_phase(mu, amplitude=ones):
    return PhaseProblem(
        amplitude=amplitude,
        phase=lambda x: 1.0 - np.asarray(x, dtype=float) ** 2,
        dphase=lambda x: -2.0 * np.asarray(x, dtype=float),
        d2phase=lambda x: np.full_like(np.asarray(x, dtype=float), -2.0),
        a=0.0,
        b=1.0,
        mu=mu,
    )


def test_constant_integrand():
    assert integrate(ones, 0.0, 1.0, 1e-12) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("k", range(1, 11))
def test_full_periods_of_sine_vanish(k):
    assert integrate(lambda x: np.sin(k * x), 0.0, 2 * math.pi, 1e-10) == pytest.approx(0.0, abs=1e-10)


def test_complex_integrand():
    value = integrate(lambda x: np.exp(1j * x), 0.0, math.pi, 1e-12)
    assert value == pytest.approx(2j, abs=1e-12)


def test_integrable_endpoint_singularity():
    assert integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, 1e-8) == pytest.approx(2.0, abs=1e-7)


def test_bessel_normalisation_integral():
    pair = ball_eigenpair(2)
    nu1 = pair.nu1
    value = integrate(lambda r: r * bessel_j(0.0, nu1 * r) ** 2, 0.0, 1.0, 1e-13)
    assert value == pytest.approx(1.0 / (2 * math.pi * pair.c0**2), rel=1e-10)
    assert value == pytest.approx(0.13475, abs=1e-4)


def test_result_carries_error_and_panels():
    result = integrate_with_error(lambda x: np.exp(x), 0.0, 1.0, 1e-12)
    assert result.value == pytest.approx(math.e - 1.0, abs=1e-12)
    assert result.error <= 1e-12
    assert result.panels >= 1


def test_budget_exhaustion_carries_the_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate_with_error(lambda x: np.sin(1000.0 * x), 0.0, 10.0, 1e-12, max_panels=4)
    assert math.isfinite(abs(info.value.estimate))
    assert info.value.error > 1e-12


def test_invalid_interval():
    with pytest.raises(ValueError):
        integrate(ones, 1.0, 0.0)


def test_resolved_panels():
    assert resolved_panels(0.0, 1.0, 0.0) == 1
    assert resolved_panels(0.0, 1.0, 100 * math.pi) == 101
    assert resolved_panels(0.0, 1.0, 1e12, cap=500) == 500


def test_oscillatory_integral_matches_fresnel():
    mu = 300.0
    scale = math.sqrt(2 * mu / math.pi)
    s, c = special.fresnel(scale)
    expected = 2 * math.sqrt(math.pi / (2 * mu)) * complex(c, s)
    assert oscillatory_integral(square_phase(mu), tol=1e-12) == pytest.approx(expected, abs=1e-11)


def test_phase_problem_validation():
    with pytest.raises(ValueError):
        square_phase(mu=0.0)
    with pytest.raises(ValueError):
        square_phase(mu=1.0, a=1.0, b=-1.0)


def test_quadratic_leading_term():
    problem = PhaseProblem.quadratic(ones, alpha=1.0, x0=0.0, mu=100.0, a=-1.0, b=1.0)
    expected = cmath.exp(-1j * math.pi / 4) * math.sqrt(math.pi / 100.0)
    assert stationary_phase_quadratic(problem) == pytest.approx(expected, abs=1e-15)


def test_quadratic_with_sine_square_amplitude():
    a = 1.0
    problem = PhaseProblem.quadratic(
        lambda x: np.sin(math.pi * np.asarray(x) / a) ** 2, alpha=math.pi**2, x0=0.5, mu=50.0, a=0.0, b=1.0
    )
    expected = cmath.exp(-1j * math.pi / 4) * math.sqrt(math.pi / (math.pi**2 * 50.0))
    assert stationary_phase_quadratic(problem) == pytest.approx(expected, abs=1e-15)


def test_quadratic_amplitude_zero_at_critical_point():
    problem = PhaseProblem.quadratic(lambda x: np.asarray(x, dtype=float), alpha=2.0, x0=0.0, mu=10.0, a=-1.0, b=1.0)
    assert stationary_phase_quadratic(problem) == 0


def test_quadratic_rejects_bad_alpha_and_endpoint():
    with pytest.raises(PhaseConditionError):
        stationary_phase_quadratic(PhaseProblem.quadratic(ones, alpha=-1.0, x0=0.0, mu=10.0, a=-1.0, b=1.0))
    with pytest.raises(PhaseConditionError):
        stationary_phase_quadratic(PhaseProblem.quadratic(ones, alpha=1.0, x0=1.0, mu=10.0, a=-1.0, b=1.0))
    with pytest.raises(PhaseConditionError):
        stationary_phase_quadratic(square_phase(10.0))


def test_interior_leading_term_for_square_phase():
    expected = cmath.exp(1j * math.pi / 4) * math.sqrt(2 * math.pi / 800.0)
    assert stationary_phase_interior(square_phase(400.0)) == pytest.approx(expected, abs=1e-15)


def test_interior_leading_term_for_cosine_phase():
    mu = 200.0
    problem = PhaseProblem(
        amplitude=ones,
        phase=np.cos,
        dphase=lambda x: -np.sin(x),
        d2phase=lambda x: -np.cos(x),
        a=1.0,
        b=5.0,
        mu=mu,
    )
    assert find_critical_point(problem) == pytest.approx(math.pi, abs=1e-10)
    leading = stationary_phase_interior(problem)
    expected = cmath.exp(1j * (-mu + math.pi / 4)) * math.sqrt(2 * math.pi / mu)
    assert leading == pytest.approx(expected, abs=1e-12)
    # the endpoints contribute about 1 / (mu |g'|) each
    assert abs(oscillatory_integral(problem, tol=1e-12) - leading) < 0.02


def test_interior_requires_a_critical_point():
    linear = PhaseProblem(
        amplitude=ones,
        phase=lambda x: np.asarray(x, dtype=float),
        dphase=ones,
        d2phase=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        a=0.0,
        b=1.0,
        mu=10.0,
    )
    with pytest.raises(PhaseConditionError):
        stationary_phase_interior(linear)
    with pytest.raises(PhaseConditionError):
        stationary_phase_interior(cap_phase(10.0))


def test_interior_rejects_two_critical_points():
    problem = PhaseProblem(
        amplitude=ones,
        phase=np.cos,
        dphase=lambda x: -np.sin(x),
        d2phase=lambda x: -np.cos(x),
        a=1.0,
        b=7.0,
        mu=10.0,
    )
    with pytest.raises(PhaseConditionError):
        find_critical_point(problem)


def test_interior_form_reproduces_quadratic_form():
    problem = PhaseProblem.quadratic(lambda x: np.cos(np.asarray(x)), alpha=0.7, x0=0.2, mu=250.0, a=-1.0, b=1.0)
    assert abs(stationary_phase_interior(problem) - stationary_phase_quadratic(problem)) <= 1e-14


def test_endpoint_leading_term():
    mu = 100.0
    leading = stationary_phase_endpoint(cap_phase(mu))
    expected = cmath.exp(1j * (mu - math.pi / 4)) * math.sqrt(math.pi / (4 * mu))
    assert leading == pytest.approx(expected, abs=1e-15)
    # the far endpoint x = 1 contributes 1 / (mu |g'(1)|)
    assert abs(oscillatory_integral(cap_phase(mu), tol=1e-12) - leading) <= 1.1 / (2 * mu)


def test_endpoint_zero_amplitude():
    assert stationary_phase_endpoint(cap_phase(50.0, amplitude=lambda x: np.zeros_like(np.asarray(x, float)))) == 0


def test_endpoint_conditions():
    with pytest.raises(PhaseConditionError):
        stationary_phase_endpoint(square_phase(10.0))
    rising = PhaseProblem(
        amplitude=ones,
        phase=lambda x: np.asarray(x, dtype=float) ** 2,
        dphase=lambda x: 2.0 * np.asarray(x, dtype=float),
        d2phase=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0),
        a=0.0,
        b=1.0,
        mu=10.0,
    )
    with pytest.raises(PhaseConditionError):
        stationary_phase_endpoint(rising)


@pytest.mark.parametrize(
    ("build", "leading"),
    [
        (lambda mu: PhaseProblem.quadratic(ones, alpha=1.0, x0=0.0, mu=mu, a=-1.0, b=1.0), stationary_phase_quadratic),
        (square_phase, stationary_phase_interior),
        (cap_phase, stationary_phase_endpoint),
    ],
    ids=("quadratic", "interior", "endpoint"),
)
def test_leading_term_error_decays_like_one_over_mu(build, leading):
    errors = [abs(oscillatory_integral(build(mu), tol=1e-12) - leading(build(mu))) for mu in FREQUENCIES]
    ratios = [later / earlier for earlier, later in zip(errors, errors[1:])]
    assert max(ratios) <= 0.6
