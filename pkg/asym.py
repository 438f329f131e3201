"""Closed-form large-xi predictions of mu(xi) and the projection integral they come from."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from config import get_settings
from oscint import (
    PhaseProblem,
    QuadratureError,
    integrate_with_error,
    resolved_panels,
    stationary_phase_endpoint,
    stationary_phase_quadratic,
)
from specfun import Eigenpair, ball_eigenpair, omega_n, scaled_bessel_j

if TYPE_CHECKING:
    from problems import Nonlinearity

LOGGER = logging.getLogger(__name__)

# Below this radius f and f' are taken from their Taylor expansions.
SMALL_RADIUS = 1e-3
PROFILE_SAMPLES = 2049


class AsymptoticFormula(str, Enum):
    DISK_POWER_SIN = "disk-power-sin"
    RECT2D = "rect2d"
    RECTND = "rectnd"
    RADIAL_N2 = "radial-n2"
    RADIAL_N3 = "radial-n3"
    PROJECTION = "projection"


@dataclass(frozen=True)
class AuxFunctions:
    """f = r phi/phi', g = phi^p f, f1 = r^(n-2) f and their derivatives, plus H."""

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray], np.ndarray]
    df1: Callable[[np.ndarray], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    f0: float


@dataclass(frozen=True)
class AsymptoticCurve:
    """Evaluator xi -> mu for one of the asymptotic formulas."""

    formula: AsymptoticFormula
    evaluator: Callable[[float], float]
    params: dict[str, object] = field(default_factory=dict)

    def __call__(self, xi: float | np.ndarray) -> float | np.ndarray:
        values = np.asarray(xi, dtype=float)
        if values.ndim == 0:
            return float(self.evaluator(float(values)))
        return np.array([self.evaluator(float(x)) for x in values.ravel()]).reshape(values.shape)

    def describe(self) -> str:
        extras = ", ".join(f"{key}={value}" for key, value in self.params.items())
        return f"{self.formula.value}({extras})" if extras else self.formula.value


def _check_xi(xi1: float) -> float:
    if not xi1 > 0:
        raise ValueError(f"Asymptotic formulas need xi > 0, got {xi1}.")
    return float(xi1)


def mu_disk_power_sin(xi1: float, p: float) -> float:
    """mu ~ -4 pi xi^(p-1) c0^p cos(c0 xi) / nu1^2 for u^p sin u on the unit disk."""

    xi1 = _check_xi(xi1)
    pair = ball_eigenpair(2)
    return -4.0 * math.pi * xi1 ** (p - 1.0) * pair.c0**p * math.cos(pair.c0 * xi1) / pair.nu1**2


def rect_phase_coefficients(a: float, b: float) -> tuple[float, float]:
    """Curvatures alpha1, alpha2 of the phase of phi1 at the centre of (0, a) x (0, b)."""

    root = math.sqrt(a * b)
    return math.pi**2 / (a * a * root), math.pi**2 / (b * b * root)


def _mu_rect_2d(xi1: float, a: float, b: float) -> float:
    root = math.sqrt(a * b)
    return 4.0 * root / math.pi * math.sin(2.0 / root * xi1 - math.pi / 2.0)


def _mu_rect_nd(xi1: float, dims: Sequence[float]) -> float:
    n = len(dims)
    volume = math.prod(dims)
    amplitude = 2.0 ** ((n / 2) * (3 - n / 2)) * volume ** (n / 4) / math.pi ** (n / 2)
    return amplitude * xi1 ** (1 - n / 2) * math.sin(2.0 ** (n / 2) / math.sqrt(volume) * xi1 - n * math.pi / 4)


def mu_rect(xi1: float, dims: Sequence[float], *, general: bool = False) -> float:
    """Rectangle and box prediction for u sin u.

    Two side lengths use the planar formula unless ``general`` forces the
    n-dimensional branch; the two agree identically at n = 2.
    """

    xi1 = _check_xi(xi1)
    if not dims or any(d <= 0 for d in dims):
        raise ValueError(f"Box side lengths must be positive, got {dims}.")
    if len(dims) == 2 and not general:
        return _mu_rect_2d(xi1, float(dims[0]), float(dims[1]))
    return _mu_rect_nd(xi1, [float(d) for d in dims])


def mu_rect_stationary_phase(xi1: float, a: float, b: float) -> float:
    """Rebuild the planar rectangle prediction from two quadratic stationary-phase terms."""

    xi1 = _check_xi(xi1)
    alpha1, alpha2 = rect_phase_coefficients(a, b)
    along_x = PhaseProblem.quadratic(
        lambda x: np.sin(math.pi * np.asarray(x, dtype=float) / a) ** 2,
        alpha=alpha1,
        x0=a / 2,
        mu=xi1,
        a=0.0,
        b=a,
    )
    along_y = PhaseProblem.quadratic(
        lambda y: np.sin(math.pi * np.asarray(y, dtype=float) / b) ** 2,
        alpha=alpha2,
        x0=b / 2,
        mu=xi1,
        a=0.0,
        b=b,
    )
    peak = complex(math.cos(2.0 * xi1 / math.sqrt(a * b)), math.sin(2.0 * xi1 / math.sqrt(a * b)))
    product = peak * stationary_phase_quadratic(along_x) * stationary_phase_quadratic(along_y)
    return 4.0 * xi1 / (a * b) * product.imag


def mu_radial_n2(xi1: float) -> float:
    """mu ~ -(4 pi / (xi nu1^2)) cos(c0 xi) for sin u on the unit disk."""

    xi1 = _check_xi(xi1)
    pair = ball_eigenpair(2)
    return -4.0 * math.pi / (xi1 * pair.nu1**2) * math.cos(pair.c0 * xi1)


RADIAL_N3_COEFFICIENT = 12.0 * math.sqrt(3.0 * math.sqrt(2.0)) / (math.sqrt(2.0) * math.pi**1.75)


def mu_radial_n3(xi1: float) -> float:
    """mu ~ -C xi^(-3/2) cos(xi sqrt(pi/2) - pi/4) for sin u on the unit ball in R^3."""

    xi1 = _check_xi(xi1)
    return -RADIAL_N3_COEFFICIENT * xi1**-1.5 * math.cos(xi1 * math.sqrt(math.pi / 2.0) - math.pi / 4.0)


def sqrt_sin_log_antiderivative(u: np.ndarray) -> np.ndarray:
    """H(u) = (sqrt 2 / 3)(u^(3/2) + 1) sin(ln(u^(3/2) + 1) - pi/4), an antiderivative of sqrt(u) sin ln(u^(3/2) + 1)."""

    s = np.power(np.asarray(u, dtype=float), 1.5) + 1.0
    return math.sqrt(2.0) / 3.0 * s * np.sin(np.log(s) - math.pi / 4.0)


def aux_functions(pair: Eigenpair, p: float = 0.5, n: int | None = None) -> AuxFunctions:
    """Auxiliary profiles of a ball eigenpair with the r = 0 singularities resolved."""

    if not pair.domain.is_ball or pair.nu1 is None:
        raise ValueError("Auxiliary functions are defined for ball-type eigenpairs only.")
    n = pair.domain.dimension if n is None else n
    order = (n - 2) / 2
    nu1 = pair.nu1
    lam = pair.lambda1
    f0 = -n / lam

    def f(r: np.ndarray) -> np.ndarray:
        z = nu1 * np.asarray(r, dtype=float)
        # r phi / phi' written through z^-v J_v so that r = 0 needs no special case
        return -scaled_bessel_j(order, z) / (lam * scaled_bessel_j(order + 1, z))

    def df(r: np.ndarray) -> np.ndarray:
        radius = np.asarray(r, dtype=float)
        out = np.empty_like(np.atleast_1d(radius))
        flat = np.atleast_1d(radius)
        small = flat < SMALL_RADIUS
        out[small] = 2.0 * flat[small] / (n + 2)
        rest = flat[~small]
        if rest.size:
            ratio = f(rest) / rest
            out[~small] = rest + ratio * (n + lam * f(rest))
        return out.reshape(radius.shape) if radius.ndim else float(out[0])

    def g(r: np.ndarray) -> np.ndarray:
        return np.power(pair.phi1(r), p) * f(r)

    def f1(r: np.ndarray) -> np.ndarray:
        radius = np.asarray(r, dtype=float)
        return np.power(radius, n - 2) * f(radius)

    def df1(r: np.ndarray) -> np.ndarray:
        radius = np.asarray(r, dtype=float)
        if n == 2:
            return df(radius)
        lead = (n - 2) * np.power(radius, n - 3) * f(radius)
        return lead + np.power(radius, n - 2) * df(radius)

    return AuxFunctions(f=f, df=df, g=g, f1=f1, df1=df1, H=sqrt_sin_log_antiderivative, f0=f0)


def envelope_domination_integral(pair: Eigenpair | None = None) -> float:
    """The integral of f'(r) J0^(3/2)(nu1 r) over [0, 1] on the unit disk."""

    pair = pair or ball_eigenpair(2)
    aux = aux_functions(pair)
    scale = pair.c0
    return float(
        integrate_with_error(
            lambda r: aux.df(r) * np.power(np.maximum(pair.phi1(r) / scale, 0.0), 1.5),
            0.0,
            1.0,
            tol=1e-12,
            rel_tol=1e-10,
        ).value
    )


def radial_n3_coefficient() -> float:
    """Amplitude of the n = 3 radial prediction rebuilt from the endpoint stationary-phase term."""

    pair = ball_eigenpair(3)
    aux = aux_functions(pair)
    curvature = pair.phi1_curvature_at_origin
    problem = PhaseProblem(
        amplitude=aux.df1,
        phase=pair.phi1,
        dphase=pair.dphi1,
        d2phase=lambda r: np.full_like(np.asarray(r, dtype=float), curvature),
        a=0.0,
        b=1.0,
        mu=1.0,
    )
    # mu ~ (omega_3 / xi) Re(leading term) and the leading term scales like xi^(-1/2).
    return omega_n(3) * abs(stationary_phase_endpoint(problem))


def mu_projection(xi1: float, nonlinearity: Nonlinearity, pair: Eigenpair | None = None) -> float:
    """omega_n times the integral of h(xi phi1) phi1 r^(n-1) over [0, 1]."""

    xi1 = _check_xi(xi1)
    pair = pair or ball_eigenpair(2)
    if not pair.domain.is_ball:
        raise ValueError("The projection integral is defined for ball-type eigenpairs only.")
    n = pair.domain.dimension
    settings = get_settings()

    samples = np.linspace(0.0, 1.0, PROFILE_SAMPLES)
    slope = float(np.max(np.abs(pair.dphi1(samples))))
    panels = resolved_panels(0.0, 1.0, nonlinearity.phase_rate * xi1 * slope)

    def integrand(r: np.ndarray) -> np.ndarray:
        profile = pair.phi1(r)
        return nonlinearity.h(xi1 * profile) * profile * np.power(r, n - 1)

    try:
        result = integrate_with_error(
            integrand,
            0.0,
            1.0,
            tol=settings.quad_tol,
            rel_tol=1e-10,
            initial_panels=panels,
            max_panels=max(settings.quad_max_panels, 4 * panels),
        )
    except QuadratureError:
        LOGGER.exception("Projection integral failed at xi=%g for %s.", xi1, nonlinearity.id)
        raise
    return omega_n(n) * float(result.value)


def asymptotic_curve(
    formula: AsymptoticFormula | str,
    *,
    p: float | None = None,
    dims: Sequence[float] | None = None,
    nonlinearity: Nonlinearity | None = None,
    pair: Eigenpair | None = None,
) -> AsymptoticCurve:
    """Bind one of the formulas to its parameters."""

    formula = AsymptoticFormula(formula)
    if formula is AsymptoticFormula.DISK_POWER_SIN:
        if p is None or not 0.0 <= p <= 1.0:
            raise ValueError(f"disk-power-sin needs p in [0, 1], got {p}.")
        return AsymptoticCurve(formula, lambda xi: mu_disk_power_sin(xi, p), {"p": p})
    if formula in (AsymptoticFormula.RECT2D, AsymptoticFormula.RECTND):
        if not dims:
            raise ValueError(f"{formula.value} needs side lengths.")
        lengths = tuple(float(d) for d in dims)
        if formula is AsymptoticFormula.RECT2D and len(lengths) != 2:
            raise ValueError("rect2d takes exactly two side lengths.")
        general = formula is AsymptoticFormula.RECTND
        return AsymptoticCurve(formula, lambda xi: mu_rect(xi, lengths, general=general), {"dims": lengths})
    if formula is AsymptoticFormula.RADIAL_N2:
        return AsymptoticCurve(formula, mu_radial_n2)
    if formula is AsymptoticFormula.RADIAL_N3:
        return AsymptoticCurve(formula, mu_radial_n3)
    if nonlinearity is None:
        raise ValueError("projection needs a nonlinearity.")
    bound_pair = pair or ball_eigenpair(2)
    return AsymptoticCurve(
        formula,
        lambda xi: mu_projection(xi, nonlinearity, bound_pair),
        {"nonlinearity": nonlinearity.id, "n": bound_pair.domain.dimension},
    )


def envelope(xi: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local maxima of |mu| on the sample grid, as (xi_peaks, amplitude)."""

    xi = np.asarray(xi, dtype=float)
    magnitude = np.abs(np.asarray(mu, dtype=float))
    if xi.shape != magnitude.shape:
        raise ValueError("xi and mu must have the same shape.")
    if magnitude.size < 3:
        return np.empty(0), np.empty(0)
    inner = magnitude[1:-1]
    peaks = np.flatnonzero((inner >= magnitude[:-2]) & (inner > magnitude[2:])) + 1
    return xi[peaks], magnitude[peaks]


def envelope_slope(
    xi: np.ndarray,
    mu: np.ndarray,
    *,
    xi_min: float | None = None,
    xi_max: float | None = None,
) -> float:
    """Least-squares slope of log|envelope| against log xi."""

    peaks_xi, peaks_mu = envelope(xi, mu)
    keep = (peaks_xi > 0) & (peaks_mu > 0)
    if xi_min is not None:
        keep &= peaks_xi >= xi_min
    if xi_max is not None:
        keep &= peaks_xi <= xi_max
    if np.count_nonzero(keep) < 2:
        raise ValueError("At least two envelope peaks are needed for a slope.")
    slope, _ = np.polyfit(np.log(peaks_xi[keep]), np.log(peaks_mu[keep]), 1)
    return float(slope)


def sign_changes(mu: np.ndarray) -> int:
    signs = np.sign(np.asarray(mu, dtype=float))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def zero_crossings(xi: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Linearly interpolated zeros of mu between consecutive samples of opposite sign."""

    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    left = np.flatnonzero(mu[:-1] * mu[1:] < 0)
    exact = xi[np.flatnonzero(mu == 0.0)]
    interpolated = xi[left] - mu[left] * (xi[left + 1] - xi[left]) / (mu[left + 1] - mu[left])
    return np.sort(np.concatenate([interpolated, exact]))
