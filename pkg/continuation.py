"""Trace the solution curve (mu(xi), u(xi)) of  Δu + λ1 u + h(u) = μ φ1 + e,  <u, φ1> = ξ.

Each grid value of xi is reached by Newton iterations on the linearisation
h(u) ~ h(u_k) + h'(u_k)(u - u_k), so every iterate solves

    Δu + a u - μ φ1 = b,   <u, φ1> = ξ,   a = λ1 + h'(u_k),   b = h'(u_k) u_k - h(u_k) + e.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator

from linsolve import (
    BorderedOperator,
    DirichletOperator,
    Field,
    Mesh,
    MeshEigenpair,
    SingularOperatorError,
    apply_laplacian,
    discrete_eigenpair,
    inner,
    mesh_for,
    sample_eigenpair,
)
from problems import ProblemSpec

LOGGER = logging.getLogger(__name__)

# Secant steps further than this fraction from dxi are replaced by dxi.
SECANT_CLAMP = 0.5
# A mu change that shrinks by less than this factor per iteration has hit round-off.
STALL_RATIO = 0.5
FORCING_PROJECTION_WARN = 1e-6


class EigenMode(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class PredictorMode(str, Enum):
    NONE = "none"
    SLOPE_REUSE = "slope_reuse"
    SECANT = "secant"


class LinearUpdate(str, Enum):
    BORDERED = "bordered"
    SPLIT = "split"


class ContinuationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    xi_start: float = 0.0
    xi_end: float = 40.0
    dxi: float = PydanticField(default=0.1, gt=0)
    newton_rel_tol: float = PydanticField(default=1e-8, gt=0)
    mu_floor: float = PydanticField(default=1e-12, gt=0)
    mu_stall_tol: float = PydanticField(default=1e-9, gt=0)
    max_newton_iters: int = PydanticField(default=25, ge=1)
    residual_tol: float = PydanticField(default=1e-6, gt=0)
    max_halvings: int = PydanticField(default=4, ge=0)
    mesh_resolution: int | tuple[int, ...] | None = None
    eigen_mode: EigenMode = EigenMode.DISCRETE
    predictor: PredictorMode = PredictorMode.SECANT
    linear_update: LinearUpdate = LinearUpdate.BORDERED

    @model_validator(mode="after")
    def _check_range(self) -> ContinuationConfig:
        if not (math.isfinite(self.xi_start) and math.isfinite(self.xi_end)):
            raise ValueError("xi_start and xi_end must be finite.")
        return self

    def grid(self) -> np.ndarray:
        span = self.xi_end - self.xi_start
        steps = int(round(abs(span) / self.dxi))
        if steps == 0:
            return np.array([self.xi_start])
        direction = 1.0 if span > 0 else -1.0
        return self.xi_start + direction * self.dxi * np.arange(steps + 1)


@dataclass(frozen=True)
class CurvePoint:
    xi: float
    mu: float
    u: Field
    newton_iters: int
    pde_residual: float
    projection_error: float
    # du/dxi and dmu/dxi of the last linearisation
    tangent: Field | None = None
    mu_slope: float | None = None

    @property
    def w1(self) -> Field | None:
        """Solution of Δw + a w = φ1, recovered as tangent / mu_slope."""

        if self.tangent is None or not self.mu_slope:
            return None
        return self.tangent / self.mu_slope


@dataclass
class SolutionCurve:
    problem_id: str
    config: ContinuationConfig
    mesh: Mesh
    eigenpair: MeshEigenpair
    points: list[CurvePoint] = field(default_factory=list)

    @property
    def xi(self) -> np.ndarray:
        return np.array([point.xi for point in self.points])

    @property
    def mu(self) -> np.ndarray:
        return np.array([point.mu for point in self.points])

    @property
    def newton_iters(self) -> np.ndarray:
        return np.array([point.newton_iters for point in self.points])


class NewtonDivergenceError(RuntimeError):
    def __init__(self, message: str, *, xi: float, last_u: Field, last_mu: float, iterations: int) -> None:
        super().__init__(message)
        self.xi = xi
        self.last_u = last_u
        self.last_mu = last_mu
        self.iterations = iterations


class ContinuationError(RuntimeError):
    """Continuation stopped; ``curve`` holds the points computed so far."""

    def __init__(self, message: str, *, curve: SolutionCurve, xi: float) -> None:
        super().__init__(message)
        self.curve = curve
        self.xi = xi


def project_forcing(problem: ProblemSpec, mesh: Mesh, pair: MeshEigenpair) -> Field:
    """Forcing on the mesh with its (discretisation-level) component along phi1 removed."""

    forcing = problem.forcing.evaluate(mesh)
    phi = pair.phi1
    component = inner(mesh, forcing, phi) / inner(mesh, phi, phi)
    scale = max(1.0, forcing.norm())
    if abs(component) > FORCING_PROJECTION_WARN * scale:
        LOGGER.warning(
            "Removing forcing component %.3e along phi1 for %s on %s.",
            component,
            problem.id,
            mesh.describe(),
        )
    return forcing - component * phi


def pde_residual(problem: ProblemSpec, pair: MeshEigenpair, u: Field, mu: float, forcing: Field) -> float:
    """Mesh norm of Δu + λ1 u + h(u) - μ φ1 - e over the interior nodes."""

    mesh = u.mesh
    residual = apply_laplacian(u) + pair.lambda1 * u + u.map(problem.nonlinearity.h) - mu * pair.phi1 - forcing
    values = residual.interior
    return math.sqrt(float(np.dot(mesh.interior_weights, values * values)))


def _bordered_update(mesh: Mesh, a: Field, b: Field, phi: Field, xi: float) -> tuple[Field, float, Field, float]:
    operator = BorderedOperator(mesh, a, phi)
    tangent, mu_slope = operator.solve(None, 1.0)
    base, mu_base = operator.solve(b, 0.0)
    return base + xi * tangent, mu_base + xi * mu_slope, tangent, mu_slope


def _split_update(mesh: Mesh, a: Field, b: Field, phi: Field, xi: float) -> tuple[Field, float, Field, float]:
    operator = DirichletOperator(mesh, a)
    w1 = operator.solve(phi)
    w2 = operator.solve(b)
    denominator = inner(mesh, w1, phi)
    if denominator == 0.0 or not math.isfinite(denominator):
        raise SingularOperatorError("<w1, phi1> vanished in the split update.", condition=math.inf)
    mu = (xi - inner(mesh, w2, phi)) / denominator
    return mu * w1 + w2, mu, w1 / denominator, 1.0 / denominator


def mu_converged(
    change: float,
    previous_change: float | None,
    mu: float,
    xi: float,
    cfg: ContinuationConfig,
) -> bool:
    """Whether the Newton change in mu is small enough to stop.

    Near a zero of mu the relative test asks for more digits than round-off
    allows, so a change that no longer contracts and sits below
    ``mu_stall_tol * (1 + |xi|)`` also counts as settled.
    """

    if change < cfg.newton_rel_tol * max(abs(mu), cfg.mu_floor) or change <= cfg.mu_floor:
        return True
    if previous_change is None:
        return False
    stalled = change >= STALL_RATIO * previous_change
    return stalled and change <= cfg.mu_stall_tol * (1.0 + abs(xi))


def newton_solve(
    problem: ProblemSpec,
    mesh: Mesh,
    pair: MeshEigenpair,
    xi_target: float,
    u0: Field,
    cfg: ContinuationConfig,
    *,
    mu0: float = 0.0,
    forcing: Field | None = None,
) -> CurvePoint:
    """Newton iterations for the point of the curve with first harmonic ``xi_target``."""

    if not np.all(np.isfinite(u0.values)):
        raise ValueError("Initial guess must be finite.")
    forcing = forcing if forcing is not None else project_forcing(problem, mesh, pair)
    nonlinearity = problem.nonlinearity
    phi = pair.phi1
    u = u0
    mu = mu0
    tangent: Field | None = None
    mu_slope: float | None = None
    previous_change: float | None = None
    update = cfg.linear_update

    for iteration in range(1, cfg.max_newton_iters + 1):
        slope = u.map(nonlinearity.dh)
        a = pair.lambda1 + slope
        b = slope * u - u.map(nonlinearity.h) + forcing
        if update is LinearUpdate.SPLIT:
            try:
                u_new, mu_new, tangent, mu_slope = _split_update(mesh, a, b, phi, xi_target)
            except SingularOperatorError as exc:
                LOGGER.warning("Split update singular at xi=%g (%s); using the bordered update.", xi_target, exc)
                u_new, mu_new, tangent, mu_slope = _bordered_update(mesh, a, b, phi, xi_target)
        else:
            u_new, mu_new, tangent, mu_slope = _bordered_update(mesh, a, b, phi, xi_target)

        if not (math.isfinite(mu_new) and np.all(np.isfinite(u_new.values))):
            raise NewtonDivergenceError(
                f"Newton iterate became non-finite at xi={xi_target:g}.",
                xi=xi_target,
                last_u=u,
                last_mu=mu,
                iterations=iteration,
            )

        change = abs(mu_new - mu)
        residual = pde_residual(problem, pair, u_new, mu_new, forcing)
        u_norm = u_new.norm()
        LOGGER.debug(
            "xi=%g iter=%d mu=%.12g dmu=%.3e residual=%.3e",
            xi_target,
            iteration,
            mu_new,
            change,
            residual,
        )
        mu_settled = mu_converged(change, previous_change, mu, xi_target, cfg)
        previous_change = change
        u, mu = u_new, mu_new
        if mu_settled and residual <= cfg.residual_tol * (1.0 + u_norm):
            return CurvePoint(
                xi=float(xi_target),
                mu=float(mu),
                u=u,
                newton_iters=iteration,
                pde_residual=residual,
                projection_error=abs(inner(mesh, u, phi) - xi_target),
                tangent=tangent,
                mu_slope=mu_slope,
            )

    raise NewtonDivergenceError(
        f"Newton did not converge at xi={xi_target:g} within {cfg.max_newton_iters} iterations.",
        xi=xi_target,
        last_u=u,
        last_mu=mu,
        iterations=cfg.max_newton_iters,
    )


def _secant_step(prev: CurvePoint, prev2: CurvePoint | None, dxi: float) -> float:
    if prev2 is None or not prev.mu_slope:
        return dxi
    step = (prev.mu - prev2.mu) / prev.mu_slope
    if not math.isfinite(step) or abs(step - dxi) > SECANT_CLAMP * abs(dxi):
        return dxi
    return step


def predict(
    prev: CurvePoint,
    prev2: CurvePoint | None,
    w1_last: Field | None,
    dxi: float,
    mode: PredictorMode,
) -> Field:
    """Initial Newton guess for the next grid point.

    ``secant`` moves along w1 by the last change in mu (u_n + (mu_n - mu_(n-1)) w1);
    ``slope_reuse`` moves along the last tangent du/dxi by dxi. With no earlier
    point both fall back to ``none``.
    """

    mode = PredictorMode(mode)
    if mode is PredictorMode.NONE:
        return prev.u
    if mode is PredictorMode.SLOPE_REUSE:
        if prev2 is None or prev.tangent is None:
            return prev.u
        return prev.u + dxi * prev.tangent
    if prev.tangent is None:
        if w1_last is not None and prev2 is not None:
            return prev.u + (prev.mu - prev2.mu) * w1_last
        return prev.u
    return prev.u + _secant_step(prev, prev2, dxi) * prev.tangent


def _predict_mu(prev: CurvePoint, prev2: CurvePoint | None, dxi: float, mode: PredictorMode) -> float:
    if mode is PredictorMode.NONE or prev.mu_slope is None:
        return prev.mu
    if mode is PredictorMode.SLOPE_REUSE:
        return prev.mu if prev2 is None else prev.mu + dxi * prev.mu_slope
    return prev.mu + _secant_step(prev, prev2, dxi) * prev.mu_slope


def _march(
    problem: ProblemSpec,
    mesh: Mesh,
    pair: MeshEigenpair,
    forcing: Field,
    cfg: ContinuationConfig,
    prev: CurvePoint,
    prev2: CurvePoint | None,
    target: float,
    substeps: int,
) -> tuple[CurvePoint, CurvePoint]:
    step = (target - prev.xi) / substeps
    for index in range(1, substeps + 1):
        xi = target if index == substeps else prev.xi + step
        guess = predict(prev, prev2, None, step, cfg.predictor)
        mu_guess = _predict_mu(prev, prev2, step, cfg.predictor)
        point = newton_solve(problem, mesh, pair, xi, guess, cfg, mu0=mu_guess, forcing=forcing)
        prev2, prev = prev, point
    return prev, prev2


def trace_curve(problem: ProblemSpec, cfg: ContinuationConfig, *, mesh: Mesh | None = None) -> SolutionCurve:
    """One converged point per grid value of xi, halving the step up to cfg.max_halvings times on failure."""

    mesh = mesh or mesh_for(problem.domain, cfg.mesh_resolution)
    if cfg.eigen_mode is EigenMode.DISCRETE:
        pair = discrete_eigenpair(mesh)
    else:
        pair = sample_eigenpair(mesh, problem.eigenpair)
    forcing = project_forcing(problem, mesh, pair)
    curve = SolutionCurve(problem_id=problem.id, config=cfg, mesh=mesh, eigenpair=pair)
    grid = cfg.grid()
    LOGGER.info(
        "Tracing %s on %s: xi %g -> %g, %d points, %s eigenpair, %s predictor.",
        problem.id,
        mesh.describe(),
        grid[0],
        grid[-1],
        grid.size,
        cfg.eigen_mode.value,
        cfg.predictor.value,
    )

    try:
        first = newton_solve(problem, mesh, pair, float(grid[0]), float(grid[0]) * pair.phi1, cfg, forcing=forcing)
    except (NewtonDivergenceError, SingularOperatorError) as exc:
        raise ContinuationError(f"First point failed at xi={grid[0]:g}: {exc}", curve=curve, xi=float(grid[0])) from exc
    curve.points.append(first)

    prev, prev2 = first, None
    for target in grid[1:]:
        target = float(target)
        error: Exception | None = None
        for halving in range(cfg.max_halvings + 1):
            substeps = 2**halving
            try:
                point, before = _march(problem, mesh, pair, forcing, cfg, prev, prev2, target, substeps)
                break
            except (NewtonDivergenceError, SingularOperatorError) as exc:
                error = exc
                if halving < cfg.max_halvings:
                    LOGGER.warning(
                        "Step to xi=%g failed (%s); retrying with %d substeps.", target, exc, 2 * substeps
                    )
        else:
            raise ContinuationError(
                f"Continuation failed at xi={target:g} after {cfg.max_halvings} step halvings: {error}",
                curve=curve,
                xi=target,
            ) from error
        curve.points.append(point)
        prev, prev2 = point, before

    LOGGER.info(
        "Finished %s: %d points, mean Newton iterations %.2f.",
        problem.id,
        len(curve.points),
        float(np.mean(curve.newton_iters)),
    )
    return curve


def profile_error(point: CurvePoint, pair: MeshEigenpair) -> float:
    """||u / xi - phi1|| / ||phi1||."""

    if point.xi == 0:
        raise ValueError("Profile error is undefined at xi = 0.")
    return (point.u / point.xi - pair.phi1).norm() / pair.phi1.norm()


def perturbation_norm(point: CurvePoint, pair: MeshEigenpair) -> float:
    """||U|| with U = u - xi phi1."""

    return (point.u - point.xi * pair.phi1).norm()
