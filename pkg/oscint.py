"""Adaptive Gauss-Kronrod quadrature and leading-order stationary-phase terms."""

from __future__ import annotations

import cmath
import heapq
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from config import get_settings

LOGGER = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

# 7-point Gauss / 15-point Kronrod pair on [-1, 1] (QUADPACK qk15 constants).
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes.
_GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
_GAUSS_WEIGHTS[7] = _WG[3]
_GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

CRITICAL_POINT_SAMPLES = 1024


class QuadratureError(RuntimeError):
    """Adaptive refinement ran out of panels before meeting the tolerance."""

    def __init__(self, message: str, *, estimate: complex | float, error: float) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class PhaseConditionError(ValueError):
    """A stationary-phase precondition does not hold for the given phase."""


@dataclass(frozen=True)
class QuadratureResult:
    value: complex | float
    error: float
    panels: int


@dataclass(frozen=True)
class PhaseProblem:
    """The integral of amplitude(x) * exp(i * mu * phase(x)) over [a, b]."""

    amplitude: Evaluator
    phase: Evaluator
    dphase: Evaluator
    d2phase: Evaluator
    a: float
    b: float
    mu: float
    # Set only for the pure quadratic phase -alpha * (x - x0)^2.
    alpha: float | None = None
    x0: float | None = None

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"Interval must satisfy a < b, got [{self.a}, {self.b}].")
        if not self.mu > 0:
            raise ValueError(f"Frequency mu must be positive, got {self.mu}.")

    @classmethod
    def quadratic(
        cls,
        amplitude: Evaluator,
        *,
        alpha: float,
        x0: float,
        mu: float,
        a: float,
        b: float,
    ) -> PhaseProblem:
        """Build the problem with phase g(x) = -alpha (x - x0)^2."""

        return cls(
            amplitude=amplitude,
            phase=lambda x: -alpha * (np.asarray(x, dtype=float) - x0) ** 2,
            dphase=lambda x: -2.0 * alpha * (np.asarray(x, dtype=float) - x0),
            d2phase=lambda x: np.full_like(np.asarray(x, dtype=float), -2.0 * alpha),
            a=a,
            b=b,
            mu=mu,
            alpha=alpha,
            x0=x0,
        )

    def integrand(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude(x) * np.exp(1j * self.mu * self.phase(x))


def _kronrod_panel(f: Evaluator, lo: float, hi: float) -> tuple[complex | float, float]:
    half = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    values = np.asarray(f(center + half * _NODES))
    kronrod = half * np.dot(_KRONROD_WEIGHTS, values)
    gauss = half * np.dot(_GAUSS_WEIGHTS, values)
    return kronrod, float(abs(kronrod - gauss))


def integrate_with_error(
    f: Evaluator,
    a: float,
    b: float,
    tol: float | None = None,
    *,
    rel_tol: float = 0.0,
    initial_panels: int = 1,
    max_panels: int | None = None,
) -> QuadratureResult:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature of a vectorised integrand.

    The worst panel is bisected until the summed error estimate drops below
    max(tol, rel_tol * |value|). Nodes never touch the endpoints, so integrable
    endpoint singularities are allowed. Complex-valued integrands are accepted.
    """

    settings = get_settings()
    tol = settings.quad_tol if tol is None else tol
    max_panels = settings.quad_max_panels if max_panels is None else max_panels
    if not a < b:
        raise ValueError(f"Integration interval must satisfy a < b, got [{a}, {b}].")
    if tol <= 0 and rel_tol <= 0:
        raise ValueError("At least one of tol and rel_tol must be positive.")

    edges = np.linspace(a, b, max(1, int(initial_panels)) + 1)
    heap: list[tuple[float, int, float, float, complex | float]] = []
    total: complex | float = 0.0
    total_error = 0.0
    counter = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, error = _kronrod_panel(f, float(lo), float(hi))
        heapq.heappush(heap, (-error, counter, float(lo), float(hi), value))
        counter += 1
        total += value
        total_error += error

    while total_error > max(tol, rel_tol * abs(total)):
        if len(heap) >= max_panels:
            raise QuadratureError(
                f"Quadrature on [{a}, {b}] did not reach tolerance within {max_panels} panels "
                f"(estimate={total}, error={total_error:.3e}).",
                estimate=total,
                error=total_error,
            )
        neg_error, _, lo, hi, value = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise QuadratureError(
                f"Panel [{lo}, {hi}] cannot be bisected further.",
                estimate=total,
                error=total_error,
            )
        left_value, left_error = _kronrod_panel(f, lo, mid)
        right_value, right_error = _kronrod_panel(f, mid, hi)
        total += left_value + right_value - value
        total_error += left_error + right_error + neg_error
        heapq.heappush(heap, (-left_error, counter, lo, mid, left_value))
        heapq.heappush(heap, (-right_error, counter + 1, mid, hi, right_value))
        counter += 2

    # Re-sum to shed the drift of the running updates.
    total = sum(entry[4] for entry in heap)
    return QuadratureResult(value=total, error=total_error, panels=len(heap))


def integrate(
    f: Evaluator,
    a: float,
    b: float,
    tol: float | None = None,
    *,
    rel_tol: float = 0.0,
    initial_panels: int = 1,
    max_panels: int | None = None,
) -> complex | float:
    """Return the integral of f over [a, b] within the estimated tolerance."""

    return integrate_with_error(
        f,
        a,
        b,
        tol,
        rel_tol=rel_tol,
        initial_panels=initial_panels,
        max_panels=max_panels,
    ).value


def resolved_panels(a: float, b: float, frequency: float, *, cap: int = 200_000) -> int:
    """Panel count keeping each panel below half a local wavelength."""

    count = math.ceil(abs(frequency) * (b - a) / math.pi) + 1
    return int(min(max(count, 1), cap))


def oscillatory_integral(problem: PhaseProblem, tol: float = 1e-10) -> complex:
    """Direct quadrature of the phase integral with oscillation-resolving panels."""

    samples = np.linspace(problem.a, problem.b, CRITICAL_POINT_SAMPLES)
    max_slope = float(np.max(np.abs(problem.dphase(samples))))
    panels = resolved_panels(problem.a, problem.b, problem.mu * max_slope)
    return complex(
        integrate(problem.integrand, problem.a, problem.b, tol, initial_panels=panels)
    )


def find_critical_point(problem: PhaseProblem) -> float:
    """Locate the unique interior zero of g' by a sign-change scan and bisection."""

    samples = np.linspace(problem.a, problem.b, CRITICAL_POINT_SAMPLES)
    slopes = np.asarray(problem.dphase(samples), dtype=float)
    scale = max(float(np.max(np.abs(slopes))), 1e-300)
    exact = np.flatnonzero(slopes[1:-1] == 0.0) + 1
    changes = np.flatnonzero(np.sign(slopes[:-1]) * np.sign(slopes[1:]) < 0)

    if exact.size + changes.size == 0:
        if abs(slopes[0]) <= 1e-8 * scale or abs(slopes[-1]) <= 1e-8 * scale:
            raise PhaseConditionError(
                "The phase is stationary only at an endpoint; use stationary_phase_endpoint."
            )
        raise PhaseConditionError("The phase has no critical point on the interval.")
    if exact.size + changes.size > 1:
        raise PhaseConditionError(
            f"The phase has {exact.size + changes.size} critical points; exactly one is required."
        )
    if exact.size:
        return float(samples[exact[0]])

    index = int(changes[0])
    return float(
        brentq(
            lambda x: float(problem.dphase(np.asarray(x))),
            samples[index],
            samples[index + 1],
            xtol=1e-12,
        )
    )


def stationary_phase_quadratic(problem: PhaseProblem) -> complex:
    """Leading term exp(-i pi/4) sqrt(pi / (alpha mu)) f(x0) for a quadratic phase."""

    if problem.alpha is None or problem.x0 is None:
        raise PhaseConditionError("The quadratic form needs a phase built by PhaseProblem.quadratic.")
    if problem.alpha <= 0:
        raise PhaseConditionError(f"alpha must be positive, got {problem.alpha}.")
    if not problem.a < problem.x0 < problem.b:
        raise PhaseConditionError("x0 must lie strictly inside the interval.")

    amplitude = float(problem.amplitude(np.asarray(problem.x0)))
    return cmath.exp(-1j * math.pi / 4) * math.sqrt(math.pi / (problem.alpha * problem.mu)) * amplitude


def stationary_phase_interior(problem: PhaseProblem) -> complex:
    """Leading term for a unique non-degenerate interior critical point."""

    x0 = problem.x0 if problem.x0 is not None else find_critical_point(problem)
    if not problem.a < x0 < problem.b:
        raise PhaseConditionError(
            "The critical point sits at an endpoint; use stationary_phase_endpoint."
        )
    curvature = float(problem.d2phase(np.asarray(x0)))
    if curvature == 0.0:
        raise PhaseConditionError("Degenerate critical point (g''(x0) = 0).")

    sign = 1.0 if curvature > 0 else -1.0
    phase = problem.mu * float(problem.phase(np.asarray(x0))) + sign * math.pi / 4
    amplitude = float(problem.amplitude(np.asarray(x0)))
    return cmath.exp(1j * phase) * math.sqrt(2.0 * math.pi / (problem.mu * abs(curvature))) * amplitude


def stationary_phase_endpoint(problem: PhaseProblem) -> complex:
    """Leading term when g'(a) = 0, g''(a) < 0 and g' < 0 on (a, b]."""

    a = problem.a
    samples = np.linspace(a, problem.b, CRITICAL_POINT_SAMPLES)
    slopes = np.asarray(problem.dphase(samples), dtype=float)
    scale = max(float(np.max(np.abs(slopes))), 1e-300)
    if abs(slopes[0]) > 1e-8 * scale:
        raise PhaseConditionError(f"g'(a) must vanish, got {slopes[0]:.3e}.")
    if np.any(slopes[1:] >= 0):
        raise PhaseConditionError("g' must be negative on (a, b].")
    curvature = float(problem.d2phase(np.asarray(a)))
    if curvature >= 0:
        raise PhaseConditionError(f"g''(a) must be negative, got {curvature}.")

    phase = problem.mu * float(problem.phase(np.asarray(a))) - math.pi / 4
    amplitude = float(problem.amplitude(np.asarray(a)))
    return cmath.exp(1j * phase) * math.sqrt(math.pi / (2.0 * problem.mu * abs(curvature))) * amplitude
