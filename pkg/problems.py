"""Catalog of model problems  Δu + λ1 u + h(u) = μ φ1 + e  with their nonlinearities and forcings."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

from asym import AsymptoticCurve, AsymptoticFormula, asymptotic_curve, sqrt_sin_log_antiderivative
from linsolve import Field, Mesh, center_cell_average, discrete_eigenpair, inner, mesh_for
from oscint import integrate
from specfun import DomainKind, DomainSpec, Eigenpair, ball_eigenpair, eigenpair_for, omega_n

LOGGER = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

FD_SAMPLES = 100
QUADRATURE_ORDER = 96
ANGULAR_SAMPLES = 256


class UnknownProblemError(KeyError):
    """No catalog entry with the requested id."""


class ExtensionCheckError(ValueError):
    """The extended nonlinearity violates the sampled slope or growth bound."""


@dataclass(frozen=True)
class Nonlinearity:
    id: str
    h: Evaluator
    dh: Evaluator
    H: Evaluator | None = None
    p: float | None = None
    # Oscillation rate of h in u (1 for sin u); 0 when h oscillates only logarithmically.
    phase_rate: float = 0.0
    sample_range: tuple[float, float] = (-20.0, 20.0)
    description: str = ""


@dataclass(frozen=True)
class Forcing:
    id: str
    function: Callable[..., np.ndarray]
    kinds: tuple[DomainKind, ...]
    singular_at_origin: bool = False
    description: str = ""

    def evaluate(self, mesh: Mesh) -> Field:
        if mesh.domain.kind not in self.kinds:
            raise ValueError(f"Forcing {self.id!r} is not defined on {mesh.domain.label()}.")
        if not mesh.is_radial:
            return mesh.field(self.function(*mesh.coords))
        r = mesh.coords[0]
        values = np.empty_like(r)
        values[1:] = self.function(r[1:])
        if self.singular_at_origin:
            values[0] = center_cell_average(mesh, self.function)
        else:
            values[0] = float(self.function(np.zeros(1))[0])
        return mesh.field(values)


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    domain: DomainSpec
    nonlinearity: Nonlinearity
    forcing: Forcing
    asymptotic: AsymptoticCurve | None = None
    xi_range: tuple[float, float] = (0.0, 40.0)
    dxi: float = 0.1
    description: str = ""
    tags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def eigenpair(self) -> Eigenpair:
        return eigenpair_for(self.domain)


class ValidationReport(BaseModel):
    problem_id: str
    orthogonality_defect: float
    mesh_orthogonality_defect: float
    dh_defect: float
    H_defect: float | None = None

    def passed(self, tol: float = 1e-6) -> bool:
        defects = [self.orthogonality_defect, self.dh_defect]
        if self.H_defect is not None:
            defects.append(self.H_defect)
        return all(defect <= tol for defect in defects)


# --- nonlinearities -------------------------------------------------------------------------


def _u_sin_u() -> Nonlinearity:
    return Nonlinearity(
        id="usinu",
        h=lambda u: u * np.sin(u),
        dh=lambda u: np.sin(u) + u * np.cos(u),
        H=lambda u: np.sin(u) - u * np.cos(u),
        p=1.0,
        phase_rate=1.0,
        sample_range=(-50.0, 50.0),
        description="u sin u",
    )


def power_sin(p: float) -> Nonlinearity:
    """|u|^p sin u, the sign-symmetric continuation of u^p sin u to u < 0."""

    if not 0.0 < p <= 1.0:
        raise ValueError(f"power_sin needs 0 < p <= 1, got {p}.")

    def h(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.abs(u) ** p * np.sin(u)

    def dh(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        # p |u|^(p-1) sgn(u) sin u written as p |u|^p sin(u)/u
        return p * np.abs(u) ** p * np.sinc(u / math.pi) + np.abs(u) ** p * np.cos(u)

    return Nonlinearity(
        id="sqrtusinu" if p == 0.5 else f"powersin:{p:g}",
        h=h,
        dh=dh,
        p=p,
        phase_rate=1.0,
        sample_range=(-50.0, 50.0),
        description=f"|u|^{p:g} sin u",
    )


def _sin_u() -> Nonlinearity:
    return Nonlinearity(
        id="sinu",
        h=np.sin,
        dh=np.cos,
        H=lambda u: -np.cos(u),
        p=0.0,
        phase_rate=1.0,
        sample_range=(-50.0, 50.0),
        description="sin u",
    )


def _sqrt_sin_log_positive() -> tuple[Evaluator, Evaluator]:
    def h(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.sqrt(u) * np.sin(np.log1p(u**1.5))

    def dh(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        s = u**1.5 + 1.0
        angle = np.log1p(u**1.5)
        root = np.sqrt(u)
        safe = np.where(root > 0, root, 1.0)
        return np.where(root > 0, np.sin(angle) / (2.0 * safe), 0.0) + 1.5 * u * np.cos(angle) / s

    return h, dh


def _u_sin_log() -> Nonlinearity:
    def h(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u * np.sin(np.log1p(u * u))

    def dh(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        angle = np.log1p(u * u)
        return np.sin(angle) + 2.0 * u * u * np.cos(angle) / (u * u + 1.0)

    def antiderivative(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        angle = np.log1p(u * u)
        return (u * u + 1.0) / 4.0 * (np.sin(angle) - np.cos(angle))

    return Nonlinearity(
        id="usinlog",
        h=h,
        dh=dh,
        H=antiderivative,
        p=1.0,
        sample_range=(-100.0, 100.0),
        description="u sin ln(u^2 + 1)",
    )


def _sin_log_positive() -> tuple[Evaluator, Evaluator, Evaluator]:
    def h(u: np.ndarray) -> np.ndarray:
        return np.sin(np.log1p(np.asarray(u, dtype=float)))

    def dh(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.cos(np.log1p(u)) / (u + 1.0)

    def antiderivative(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        angle = np.log1p(u)
        return (u + 1.0) * (np.sin(angle) - np.cos(angle)) / 2.0

    return h, dh, antiderivative


def _zero() -> Nonlinearity:
    return Nonlinearity(
        id="zero",
        h=np.zeros_like,
        dh=np.zeros_like,
        H=np.zeros_like,
        p=0.0,
        description="h = 0",
    )


def _gap() -> float:
    pair = ball_eigenpair(2)
    return float(pair.lambda2 - pair.lambda1)


def extend_h_negative(
    nonlinearity_id: str,
    h: Evaluator,
    dh: Evaluator,
    *,
    h0: float,
    dh0: float,
    d2h0: float,
    H: Evaluator | None = None,
    p: float | None = None,
    phase_rate: float = 0.0,
    sample_range: tuple[float, float] = (0.0, 100.0),
    description: str = "",
    check_range: float = 1e6,
) -> Nonlinearity:
    """C^2 extension of h from [0, inf) to the real line.

    On [-1, 0] the extension is the quintic q(u) = h0 + h1 u + h2 u^2 / 2 + u^3 (A + B u + C u^2)
    that matches (h, h', h'') at 0 and meets the constant h0 with zero slope and curvature at
    u = -1; below -1 it stays at h0. The result is checked on samples against
    h' < lambda2 - lambda1 and |h(u)| / |u| < lambda2 - lambda1 for |u| >= 1.
    """

    system = np.array([[-1.0, 1.0, -1.0], [3.0, -4.0, 5.0], [-6.0, 12.0, -20.0]])
    rhs = np.array([dh0 - d2h0 / 2.0, d2h0 - dh0, -d2h0])
    a3, a4, a5 = np.linalg.solve(system, rhs)

    def quintic(u: np.ndarray) -> np.ndarray:
        return h0 + dh0 * u + 0.5 * d2h0 * u**2 + u**3 * (a3 + a4 * u + a5 * u**2)

    def quintic_slope(u: np.ndarray) -> np.ndarray:
        return dh0 + d2h0 * u + 3 * a3 * u**2 + 4 * a4 * u**3 + 5 * a5 * u**4

    def quintic_integral(u: np.ndarray) -> np.ndarray:
        return h0 * u + dh0 * u**2 / 2 + d2h0 * u**3 / 6 + a3 * u**4 / 4 + a4 * u**5 / 5 + a5 * u**6 / 6

    def extended(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        clipped = np.clip(u, -1.0, 0.0)
        return np.where(u >= 0, h(np.maximum(u, 0.0)), np.where(u <= -1.0, h0, quintic(clipped)))

    def extended_slope(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        clipped = np.clip(u, -1.0, 0.0)
        return np.where(u >= 0, dh(np.maximum(u, 0.0)), np.where(u <= -1.0, 0.0, quintic_slope(clipped)))

    extended_antiderivative = None
    if H is not None:
        base = float(H(np.zeros(1))[0])

        def extended_antiderivative(u: np.ndarray) -> np.ndarray:
            u = np.asarray(u, dtype=float)
            clipped = np.clip(u, -1.0, 0.0)
            below = base + quintic_integral(np.asarray(-1.0)) + h0 * (u + 1.0)
            return np.where(
                u >= 0,
                H(np.maximum(u, 0.0)),
                np.where(u <= -1.0, below, base + quintic_integral(clipped)),
            )

    gap = _gap()
    samples = np.concatenate(
        [np.linspace(-5.0, 0.0, 2001), np.geomspace(1e-6, check_range, 4000)]
    )
    slope = extended_slope(samples)
    if not np.all(slope < gap):
        worst = float(samples[np.argmax(slope)])
        raise ExtensionCheckError(
            f"{nonlinearity_id}: h'({worst:g}) = {float(np.max(slope)):.4g} is not below lambda2 - lambda1 = {gap:.4g}."
        )
    far = np.abs(samples) >= 1.0
    growth = np.abs(extended(samples[far])) / np.abs(samples[far])
    if far.any() and not np.all(growth < gap):
        raise ExtensionCheckError(f"{nonlinearity_id}: |h(u)| / |u| reaches {float(np.max(growth)):.4g}.")

    return Nonlinearity(
        id=nonlinearity_id,
        h=extended,
        dh=extended_slope,
        H=extended_antiderivative,
        p=p,
        phase_rate=phase_rate,
        sample_range=sample_range,
        description=description,
    )


def _sqrt_sin_log() -> Nonlinearity:
    h, dh = _sqrt_sin_log_positive()
    return extend_h_negative(
        "sqrtsinlog",
        h,
        dh,
        h0=0.0,
        dh0=0.0,
        d2h0=2.0,
        H=sqrt_sin_log_antiderivative,
        p=0.5,
        sample_range=(-3.0, 1e4),
        description="sqrt(u) sin ln(u^(3/2) + 1), extended to u < 0",
    )


def _sin_log() -> Nonlinearity:
    h, dh, antiderivative = _sin_log_positive()
    return extend_h_negative(
        "sinlog",
        h,
        dh,
        h0=0.0,
        dh0=1.0,
        d2h0=-1.0,
        H=antiderivative,
        p=0.0,
        sample_range=(-3.0, 100.0),
        description="sin ln(u + 1), extended to u < 0",
    )


NONLINEARITIES: dict[str, Callable[[], Nonlinearity]] = {
    "usinu": _u_sin_u,
    "sqrtusinu": lambda: power_sin(0.5),
    "sinu": _sin_u,
    "sqrtsinlog": _sqrt_sin_log,
    "usinlog": _u_sin_log,
    "sinlog": _sin_log,
    "zero": _zero,
}


def nonlinearity_by_id(nonlinearity_id: str) -> Nonlinearity:
    """Catalog lookup; "powersin:<p>" builds |u|^p sin u for any p in (0, 1]."""

    key = nonlinearity_id.strip().lower()
    if key.startswith("powersin:"):
        try:
            return power_sin(float(key.split(":", 1)[1]))
        except ValueError as exc:
            raise UnknownProblemError(f"Invalid nonlinearity {nonlinearity_id!r}: {exc}") from exc
    factory = NONLINEARITIES.get(key)
    if factory is None:
        raise UnknownProblemError(
            f"Unknown nonlinearity {nonlinearity_id!r}; known: {', '.join(sorted(NONLINEARITIES))}."
        )
    return factory()


# --- forcings -------------------------------------------------------------------------------

DISK = (DomainKind.DISK2D,)
RECT = (DomainKind.RECT2D, DomainKind.RECTND)
ANY_DOMAIN = tuple(DomainKind)

FORCINGS: dict[str, Forcing] = {
    "xy": Forcing("xy", lambda x, y: x * y, DISK, description="xy"),
    "x2y-3xy4": Forcing(
        "x2y-3xy4",
        lambda x, y: x**2 * y - 3.0 * x * y**4,
        DISK,
        description="x^2 y - 3 x y^4",
    ),
    "rect-shifted": Forcing(
        "rect-shifted",
        lambda x, y: (x - 0.5) * (y - 1.0),
        RECT,
        description="(x - 1/2)(y - 1)",
    ),
    "cos-pi-r-over-r": Forcing(
        "cos-pi-r-over-r",
        lambda r: np.cos(math.pi * r) / r,
        (DomainKind.BALL_RADIAL,),
        singular_at_origin=True,
        description="cos(pi r) / r",
    ),
    "zero": Forcing("zero", lambda *coords: np.zeros_like(coords[0]), ANY_DOMAIN, description="e = 0"),
}


# --- problems -------------------------------------------------------------------------------


def _disk_usinu_xy() -> ProblemSpec:
    return ProblemSpec(
        id="disk-usinu-xy",
        domain=DomainSpec.disk(),
        nonlinearity=_u_sin_u(),
        forcing=FORCINGS["xy"],
        asymptotic=asymptotic_curve(AsymptoticFormula.DISK_POWER_SIN, p=1.0),
        xi_range=(0.0, 40.0),
        description="Δu + λ1 u + u sin u = μ φ1 + xy on the unit disk",
    )


def _disk_sqrtusinu_x2y() -> ProblemSpec:
    return ProblemSpec(
        id="disk-sqrtusinu-x2y",
        domain=DomainSpec.disk(),
        nonlinearity=power_sin(0.5),
        forcing=FORCINGS["x2y-3xy4"],
        asymptotic=asymptotic_curve(AsymptoticFormula.DISK_POWER_SIN, p=0.5),
        xi_range=(0.0, 40.0),
        description="Δu + λ1 u + u^(1/2) sin u = μ φ1 + x^2 y - 3 x y^4 on the unit disk",
    )


def _rect_usinu() -> ProblemSpec:
    return ProblemSpec(
        id="rect-usinu",
        domain=DomainSpec.rect(1.0, 2.0),
        nonlinearity=_u_sin_u(),
        forcing=FORCINGS["rect-shifted"],
        asymptotic=asymptotic_curve(AsymptoticFormula.RECT2D, dims=(1.0, 2.0)),
        xi_range=(0.0, 30.0),
        description="Δu + λ1 u + u sin u = μ φ1 + (x - 1/2)(y - 1) on (0, 1) x (0, 2)",
    )


def _ball3_sinu() -> ProblemSpec:
    return ProblemSpec(
        id="ball3-sinu",
        domain=DomainSpec.ball(3),
        nonlinearity=_sin_u(),
        forcing=FORCINGS["cos-pi-r-over-r"],
        asymptotic=asymptotic_curve(AsymptoticFormula.RADIAL_N3),
        xi_range=(0.0, 60.0),
        description="radial u'' + (2/r) u' + π^2 u + sin u = μ φ1 + cos(πr)/r on the unit ball in R^3",
    )


def _ball2_sinu() -> ProblemSpec:
    return ProblemSpec(
        id="ball2-sinu",
        domain=DomainSpec.ball(2),
        nonlinearity=_sin_u(),
        forcing=FORCINGS["zero"],
        asymptotic=asymptotic_curve(AsymptoticFormula.RADIAL_N2),
        xi_range=(0.0, 40.0),
        description="radial u'' + u'/r + λ1 u + sin u = μ φ1 on the unit disk",
    )


def _disk_projection(problem_id: str, nonlinearity: Nonlinearity, forcing: str) -> ProblemSpec:
    return ProblemSpec(
        id=problem_id,
        domain=DomainSpec.disk(),
        nonlinearity=nonlinearity,
        forcing=FORCINGS[forcing],
        asymptotic=asymptotic_curve(AsymptoticFormula.PROJECTION, nonlinearity=nonlinearity),
        xi_range=(0.0, 40.0),
        description=f"Δu + λ1 u + {nonlinearity.description} = μ φ1 + e on the unit disk",
    )


def _linear(problem_id: str, domain: DomainSpec, forcing: str) -> ProblemSpec:
    return ProblemSpec(
        id=problem_id,
        domain=domain,
        nonlinearity=_zero(),
        forcing=FORCINGS[forcing],
        xi_range=(-10.0, 10.0),
        dxi=1.0,
        description="Δu + λ1 u = μ φ1 + e (exact resonance)",
        tags=("linear",),
    )


BUILTIN: dict[str, Callable[[], ProblemSpec]] = {
    "disk-usinu-xy": _disk_usinu_xy,
    "disk-sqrtusinu-x2y": _disk_sqrtusinu_x2y,
    "rect-usinu": _rect_usinu,
    "ball3-sinu": _ball3_sinu,
    "ball2-sinu": _ball2_sinu,
    "disk-sqrtsinlog": lambda: _disk_projection("disk-sqrtsinlog", _sqrt_sin_log(), "xy"),
    "disk-usinlog": lambda: _disk_projection("disk-usinlog", _u_sin_log(), "xy"),
    "disk-sinlog": lambda: _disk_projection("disk-sinlog", _sin_log(), "xy"),
    "disk-linear-xy": lambda: _linear("disk-linear-xy", DomainSpec.disk(), "xy"),
    "rect-linear": lambda: _linear("rect-linear", DomainSpec.rect(1.0, 2.0), "rect-shifted"),
    "ball3-linear": lambda: _linear("ball3-linear", DomainSpec.ball(3), "cos-pi-r-over-r"),
}


def available_problems() -> list[str]:
    return sorted(BUILTIN)


def builtin(problem_id: str) -> ProblemSpec:
    factory = BUILTIN.get(problem_id.strip().lower())
    if factory is None:
        raise UnknownProblemError(
            f"Unknown problem {problem_id!r}; known: {', '.join(available_problems())}."
        )
    return factory()


# --- validation -----------------------------------------------------------------------------


def _fd_step(u: np.ndarray) -> np.ndarray:
    return 1e-5 * np.sqrt(np.maximum(1.0, np.abs(u)))


def _derivative_defect(f: Evaluator, df: Evaluator, samples: np.ndarray) -> float:
    step = _fd_step(samples)
    estimate = (f(samples + step) - f(samples - step)) / (2.0 * step)
    exact = df(samples)
    return float(np.max(np.abs(estimate - exact) / np.maximum(1.0, np.abs(exact))))


def derivative_samples(nonlinearity: Nonlinearity, count: int = FD_SAMPLES) -> np.ndarray:
    """Deterministic sample points inside the nonlinearity's check range, away from u = 0 and u = -1."""

    lo, hi = nonlinearity.sample_range
    samples = np.linspace(lo, hi, count + 2)[1:-1]
    # keep one step away from the kinks of sqrt and of the extension
    return samples[(np.abs(samples) > 1e-3) & (np.abs(samples + 1.0) > 1e-3)]


def dh_defect(nonlinearity: Nonlinearity) -> float:
    return _derivative_defect(nonlinearity.h, nonlinearity.dh, derivative_samples(nonlinearity))


def antiderivative_defect(nonlinearity: Nonlinearity) -> float | None:
    if nonlinearity.H is None:
        return None
    return _derivative_defect(nonlinearity.H, nonlinearity.h, derivative_samples(nonlinearity))


def _disk_projection_integral(function: Callable[..., np.ndarray], pair: Eigenpair) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_ORDER)
    r = 0.5 * (nodes + 1.0)
    theta = np.linspace(0.0, 2.0 * math.pi, ANGULAR_SAMPLES, endpoint=False)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    values = function(rr * np.cos(tt), rr * np.sin(tt)) * pair.value(rr)
    radial = np.mean(values, axis=1) * 2.0 * math.pi * r
    return float(0.5 * np.dot(weights, radial))


def _rect_projection_integral(function: Callable[..., np.ndarray], pair: Eigenpair) -> float:
    a, b = pair.domain.lengths
    nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_ORDER)
    x = 0.5 * a * (nodes + 1.0)
    y = 0.5 * b * (nodes + 1.0)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    values = function(xx, yy) * pair.value(xx, yy)
    return float(0.25 * a * b * weights @ values @ weights)


def orthogonality_defect(forcing: Forcing, domain: DomainSpec) -> float:
    """|<e, phi1>| against the continuous eigenfunction, by quadrature independent of any mesh."""

    pair = eigenpair_for(domain)
    if domain.kind is DomainKind.BALL_RADIAL:
        n = domain.dimension
        value = integrate(
            lambda r: forcing.function(r) * pair.phi1(r) * r ** (n - 1),
            0.0,
            1.0,
            tol=1e-13,
        )
        return abs(omega_n(n) * float(value))
    if domain.kind is DomainKind.DISK2D:
        return abs(_disk_projection_integral(forcing.function, pair))
    return abs(_rect_projection_integral(forcing.function, pair))


def validate(spec: ProblemSpec, mesh: Mesh | None = None) -> ValidationReport:
    """Report the orthogonality defect of the forcing and the derivative defects of h."""

    mesh = mesh or mesh_for(spec.domain)
    if mesh.domain != spec.domain:
        raise ValueError(f"Mesh {mesh.describe()} does not match {spec.domain.label()}.")
    discrete = discrete_eigenpair(mesh)
    forcing = spec.forcing.evaluate(mesh)
    report = ValidationReport(
        problem_id=spec.id,
        orthogonality_defect=orthogonality_defect(spec.forcing, spec.domain),
        mesh_orthogonality_defect=abs(inner(mesh, forcing, discrete.phi1)),
        dh_defect=dh_defect(spec.nonlinearity),
        H_defect=antiderivative_defect(spec.nonlinearity),
    )
    LOGGER.info("Validated %s: %s", spec.id, report.model_dump())
    return report
