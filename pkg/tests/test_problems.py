import math

import numpy as np
import pytest

from asym import AsymptoticFormula, sqrt_sin_log_antiderivative
from linsolve import radial_mesh, rect_mesh
from problems import (
    FORCINGS,
    ExtensionCheckError,
    UnknownProblemError,
    ValidationReport,
    available_problems,
    builtin,
    dh_defect,
    extend_h_negative,
    nonlinearity_by_id,
    orthogonality_defect,
    validate,
)
from specfun import DomainKind, DomainSpec


def test_catalog_ids():
    assert available_problems() == sorted(
        [
            "disk-usinu-xy",
            "disk-sqrtusinu-x2y",
            "rect-usinu",
            "ball3-sinu",
            "ball2-sinu",
            "disk-sqrtsinlog",
            "disk-usinlog",
            "disk-sinlog",
            "disk-linear-xy",
            "rect-linear",
            "ball3-linear",
        ]
    )


def test_lookup_is_case_insensitive():
    problem = builtin(" Rect-UsinU ")
    assert problem.id == "rect-usinu"
    assert problem.domain.kind is DomainKind.RECT2D
    assert problem.eigenpair.lambda1 == pytest.approx(5 * math.pi**2 / 4)
    assert problem.asymptotic.formula is AsymptoticFormula.RECT2D


def test_unknown_problem():
    with pytest.raises(UnknownProblemError) as info:
        builtin("torus-usinu")
    assert isinstance(info.value, KeyError)
    assert "disk-usinu-xy" in str(info.value)


def test_linear_problems_have_no_asymptotic_curve():
    for problem_id in ("disk-linear-xy", "rect-linear", "ball3-linear"):
        problem = builtin(problem_id)
        assert problem.asymptotic is None
        assert "linear" in problem.tags
        assert problem.xi_range == (-10.0, 10.0)


@pytest.mark.parametrize("problem_id", available_problems())
def test_catalog_entries_validate(problem_id):
    report = validate(builtin(problem_id))
    assert report.problem_id == problem_id
    assert report.passed(), report.model_dump()
    assert report.mesh_orthogonality_defect < 1e-3


def test_report_threshold():
    report = ValidationReport(problem_id="x", orthogonality_defect=0.0, mesh_orthogonality_defect=0.0, dh_defect=1e-3)
    assert not report.passed()
    assert report.passed(tol=1e-2)


@pytest.mark.parametrize(
    ("problem_id", "build"),
    [
        ("ball3-sinu", lambda: radial_mesh(2, 33)),
        ("ball2-sinu", lambda: radial_mesh(3, 33)),
        ("rect-usinu", lambda: rect_mesh(1.0, 1.0, 9, 9)),
    ],
    ids=("ball3-on-ball2", "ball2-on-ball3", "rect-1x2-on-square"),
)
def test_validate_rejects_a_mesh_of_another_domain(problem_id, build):
    with pytest.raises(ValueError):
        validate(builtin(problem_id), build())


@pytest.mark.parametrize(
    ("forcing", "domain"),
    [
        ("xy", DomainSpec.disk()),
        ("x2y-3xy4", DomainSpec.disk()),
        ("rect-shifted", DomainSpec.rect(1.0, 2.0)),
        ("cos-pi-r-over-r", DomainSpec.ball(3)),
    ],
)
def test_forcings_are_orthogonal_to_phi1(forcing, domain):
    assert orthogonality_defect(FORCINGS[forcing], domain) <= 1e-10


def test_constant_extension_stays_constant():
    extended = extend_h_negative(
        "half",
        lambda u: np.full_like(np.asarray(u, dtype=float), 0.5),
        lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        h0=0.5,
        dh0=0.0,
        d2h0=0.0,
    )
    u = np.array([-3.0, -1.0, -0.4, 0.0, 2.0])
    np.testing.assert_allclose(extended.h(u), 0.5)
    np.testing.assert_allclose(extended.dh(u), 0.0)


def test_steep_extension_is_rejected():
    with pytest.raises(ExtensionCheckError):
        extend_h_negative(
            "steep",
            lambda u: 20.0 * np.asarray(u, dtype=float),
            lambda u: np.full_like(np.asarray(u, dtype=float), 20.0),
            h0=0.0,
            dh0=20.0,
            d2h0=0.0,
        )


@pytest.mark.parametrize("nonlinearity_id", ("sqrtsinlog", "sinlog"))
def test_extension_is_smooth_at_the_joins(nonlinearity_id):
    nonlinearity = nonlinearity_by_id(nonlinearity_id)
    eps = 1e-7
    for joint in (0.0, -1.0):
        left, right = nonlinearity.h(np.array([joint - eps, joint + eps]))
        assert left == pytest.approx(right, abs=1e-6)
        slope_left, slope_right = nonlinearity.dh(np.array([joint - eps, joint + eps]))
        assert slope_left == pytest.approx(slope_right, abs=1e-5)
    below = nonlinearity.h(np.linspace(-10.0, -1.0, 7))
    np.testing.assert_allclose(below, below[0])
    assert dh_defect(nonlinearity) <= 1e-6


def test_sqrt_sin_log_antiderivative_on_the_positive_axis():
    nonlinearity = nonlinearity_by_id("sqrtsinlog")
    u = np.linspace(0.0, 50.0, 11)
    np.testing.assert_allclose(nonlinearity.H(u), sqrt_sin_log_antiderivative(u))
    assert nonlinearity.p == 0.5


def test_power_sin_by_id():
    nonlinearity = nonlinearity_by_id("powersin:0.25")
    assert nonlinearity.id == "powersin:0.25"
    assert nonlinearity.p == 0.25
    u = np.array([-2.0, 3.0])
    np.testing.assert_allclose(nonlinearity.h(u), np.abs(u) ** 0.25 * np.sin(u))
    assert nonlinearity_by_id("sqrtusinu").id == "sqrtusinu"


@pytest.mark.parametrize("nonlinearity_id", ("powersin:2", "powersin:x", "cubic"))
def test_unknown_nonlinearities(nonlinearity_id):
    with pytest.raises(UnknownProblemError):
        nonlinearity_by_id(nonlinearity_id)


def test_forcing_on_the_wrong_domain(ball3_mesh):
    with pytest.raises(ValueError):
        FORCINGS["xy"].evaluate(ball3_mesh)


def test_singular_forcing_uses_the_cell_average(ball3_mesh):
    values = FORCINGS["cos-pi-r-over-r"].evaluate(ball3_mesh).values
    h = ball3_mesh.spacing
    assert np.isfinite(values).all()
    assert values[0] == pytest.approx(3.0 / h, rel=1e-3)
    assert values[1] == pytest.approx(math.cos(math.pi * h) / h)


def test_zero_forcing_works_everywhere(square_mesh, disk_mesh):
    assert FORCINGS["zero"].evaluate(square_mesh).max_abs() == 0.0
    assert FORCINGS["zero"].evaluate(disk_mesh).max_abs() == 0.0
