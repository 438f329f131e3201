"""Finite-volume Dirichlet Laplacians on radial, rectangular and polar-disk meshes.

Every mesh is described by node coordinates, control-volume weights and edge
conductances. The discrete Laplacian at an interior node k is

    (L u)_k = (1 / w_k) * sum_l c_kl (u_l - u_k)

restricted to interior unknowns (boundary values are zero), so M L is
symmetric in the weighted inner product sum_k w_k u_k v_k.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from config import get_settings
from specfun import DomainKind, DomainSpec, Eigenpair, omega_n

LOGGER = logging.getLogger(__name__)

BACKWARD_ERROR_TOL = 1e-10
CENTER_QUADRATURE_POINTS = 16


class SingularOperatorError(RuntimeError):
    """The discrete operator is singular or too ill-conditioned to trust."""

    def __init__(self, message: str, *, condition: float) -> None:
        super().__init__(message)
        self.condition = condition


class EigenIterationError(RuntimeError):
    """Inverse iteration did not settle on the principal eigenpair."""


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    domain: DomainSpec
    shape: tuple[int, ...]
    coords: tuple[np.ndarray, ...]
    radius: np.ndarray
    weights: np.ndarray
    interior: np.ndarray
    stiffness: sp.csr_matrix
    spacing: float

    @property
    def n_nodes(self) -> int:
        return int(self.weights.size)

    @property
    def n_interior(self) -> int:
        return int(self.interior.size)

    @property
    def is_radial(self) -> bool:
        return self.domain.kind is DomainKind.BALL_RADIAL

    @cached_property
    def interior_weights(self) -> np.ndarray:
        return _frozen(self.weights[self.interior])

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(1.0 / self.interior_weights) @ self.stiffness).tocsr()

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)[self.interior]

    def extend(self, interior_values: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_nodes)
        full[self.interior] = interior_values
        return full

    def field(self, values: np.ndarray | float) -> Field:
        return Field(self, np.broadcast_to(np.asarray(values, dtype=float), (self.n_nodes,)))

    def dirichlet_field(self, values: np.ndarray | float) -> Field:
        """Field with the given values inside and zero on the boundary."""

        full = np.broadcast_to(np.asarray(values, dtype=float), (self.n_nodes,))
        return Field(self, self.extend(full[self.interior]))

    def zeros(self) -> Field:
        return Field(self, np.zeros(self.n_nodes))

    def evaluate(self, function: Callable[..., np.ndarray]) -> Field:
        return self.field(function(*self.coords))

    def describe(self) -> str:
        return f"{self.domain.label()} mesh {'x'.join(str(s) for s in self.shape)}"


@dataclass(frozen=True, eq=False)
class Field:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise ValueError(f"Field has {values.size} values for a mesh of {self.mesh.n_nodes} nodes.")
        object.__setattr__(self, "values", _frozen(values))

    def _other(self, other: Field | float) -> np.ndarray | float:
        if isinstance(other, Field):
            if other.mesh is not self.mesh:
                raise ValueError("Fields live on different meshes.")
            return other.values
        return float(other)

    def __add__(self, other: Field | float) -> Field:
        return Field(self.mesh, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other: Field | float) -> Field:
        return Field(self.mesh, self.values - self._other(other))

    def __rsub__(self, other: float) -> Field:
        return Field(self.mesh, float(other) - self.values)

    def __mul__(self, other: Field | float) -> Field:
        return Field(self.mesh, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> Field:
        return Field(self.mesh, self.values / float(other))

    def __neg__(self) -> Field:
        return Field(self.mesh, -self.values)

    def map(self, function: Callable[[np.ndarray], np.ndarray]) -> Field:
        return Field(self.mesh, function(self.values))

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior]

    def norm(self) -> float:
        return math.sqrt(max(inner(self.mesh, self, self), 0.0))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min(self) -> float:
        return float(np.min(self.values))

    def max(self) -> float:
        return float(np.max(self.values))


@dataclass(frozen=True)
class MeshEigenpair:
    lambda1: float
    phi1: Field
    discrete: bool = True


def inner(mesh: Mesh, u: Field, v: Field) -> float:
    """Weighted inner product sum_k w_k u_k v_k (radial weights carry omega_n r^(n-1))."""

    if u.mesh is not mesh or v.mesh is not mesh:
        raise ValueError("inner() got fields from a different mesh.")
    return float(np.dot(mesh.weights, u.values * v.values))


def _stiffness(n_nodes: int, interior: np.ndarray, k: np.ndarray, l: np.ndarray, c: np.ndarray) -> sp.csr_matrix:
    rows = np.concatenate([k, l])
    cols = np.concatenate([l, k])
    conductance = sp.coo_matrix((np.concatenate([c, c]), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    total = np.asarray(conductance.sum(axis=1)).ravel()
    full = conductance - sp.diags(total)
    return full[interior][:, interior].tocsr()


def _build(
    domain: DomainSpec,
    shape: tuple[int, ...],
    coords: tuple[np.ndarray, ...],
    radius: np.ndarray,
    weights: np.ndarray,
    boundary: np.ndarray,
    edges: tuple[np.ndarray, np.ndarray, np.ndarray],
    spacing: float,
) -> Mesh:
    if np.any(weights <= 0):
        raise ValueError("Control-volume weights must be positive.")
    interior = np.flatnonzero(~boundary)
    stiffness = _stiffness(weights.size, interior, *edges)
    mesh = Mesh(
        domain=domain,
        shape=shape,
        coords=tuple(_frozen(c) for c in coords),
        radius=_frozen(radius),
        weights=_frozen(weights),
        interior=interior,
        stiffness=stiffness,
        spacing=spacing,
    )
    LOGGER.debug("Built %s (%d interior unknowns).", mesh.describe(), mesh.n_interior)
    return mesh


def radial_mesh(n: int, nodes: int) -> Mesh:
    """Nodes r_i = i / (nodes - 1) on [0, 1]; r = 1 carries the Dirichlet condition."""

    if nodes < 3:
        raise ValueError(f"A radial mesh needs at least 3 nodes, got {nodes}.")
    h = 1.0 / (nodes - 1)
    r = np.linspace(0.0, 1.0, nodes)
    faces = np.clip(np.concatenate([[0.0], r[:-1] + 0.5 * h, [1.0]]), 0.0, 1.0)
    surface = omega_n(n)
    weights = surface / n * (faces[1:] ** n - faces[:-1] ** n)
    k = np.arange(nodes - 1)
    conductance = surface * faces[1:-1] ** (n - 1) / h
    boundary = np.zeros(nodes, dtype=bool)
    boundary[-1] = True
    return _build(DomainSpec.ball(n), (nodes,), (r,), r, weights, boundary, (k, k + 1, conductance), h)


def rect_mesh(a: float, b: float, nx: int, ny: int) -> Mesh:
    """Tensor grid on (0, a) x (0, b), node (i, j) stored at i * ny + j."""

    if nx < 3 or ny < 3:
        raise ValueError(f"A rectangle mesh needs at least 3 nodes per axis, got {nx}x{ny}.")
    hx = a / (nx - 1)
    hy = b / (ny - 1)
    x, y = np.meshgrid(np.linspace(0.0, a, nx), np.linspace(0.0, b, ny), indexing="ij")
    wx = np.full(nx, hx)
    wx[[0, -1]] = 0.5 * hx
    wy = np.full(ny, hy)
    wy[[0, -1]] = 0.5 * hy
    weights = np.outer(wx, wy).ravel()

    index = np.arange(nx * ny).reshape(nx, ny)
    k = np.concatenate([index[:-1, :].ravel(), index[:, :-1].ravel()])
    l = np.concatenate([index[1:, :].ravel(), index[:, 1:].ravel()])
    c = np.concatenate([np.full((nx - 1) * ny, hy / hx), np.full(nx * (ny - 1), hx / hy)])

    boundary = np.zeros((nx, ny), dtype=bool)
    boundary[[0, -1], :] = True
    boundary[:, [0, -1]] = True
    return _build(
        DomainSpec.rect(a, b),
        (nx, ny),
        (x.ravel(), y.ravel()),
        np.hypot(x, y).ravel(),
        weights,
        boundary.ravel(),
        (k, l, c),
        max(hx, hy),
    )


def polar_mesh(rings: int, angles: int) -> Mesh:
    """Unit disk: a centre node, then rings i = 1..rings of `angles` nodes; the last ring is the boundary.

    Ring i, angle j is stored at 1 + (i - 1) * angles + j.
    """

    if rings < 2 or angles < 4:
        raise ValueError(f"A polar mesh needs >= 2 rings and >= 4 angles, got {rings}x{angles}.")
    h = 1.0 / rings
    dtheta = 2.0 * math.pi / angles
    r = np.arange(1, rings + 1) * h
    theta = np.arange(angles) * dtheta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    x = np.concatenate([[0.0], (rr * np.cos(tt)).ravel()])
    y = np.concatenate([[0.0], (rr * np.sin(tt)).ravel()])
    radius = np.concatenate([[0.0], rr.ravel()])

    ring_weights = np.repeat(r * h * dtheta, angles)
    ring_weights[-angles:] = math.pi * (1.0 - (1.0 - 0.5 * h) ** 2) / angles
    weights = np.concatenate([[math.pi * (0.5 * h) ** 2], ring_weights])

    index = 1 + np.arange(rings * angles).reshape(rings, angles)
    centre_k = np.zeros(angles, dtype=int)
    centre_l = index[0]
    centre_c = np.full(angles, 0.5 * dtheta)
    radial_k = index[:-1].ravel()
    radial_l = index[1:].ravel()
    radial_c = np.repeat((r[:-1] + 0.5 * h) * dtheta / h, angles)
    # the boundary ring needs no angular coupling
    angular_k = index[:-1].ravel()
    angular_l = np.roll(index[:-1], -1, axis=1).ravel()
    angular_c = np.repeat(h / (r[:-1] * dtheta), angles)

    boundary = np.zeros(weights.size, dtype=bool)
    boundary[index[-1]] = True
    return _build(
        DomainSpec.disk(),
        (rings, angles),
        (x, y),
        radius,
        weights,
        boundary,
        (
            np.concatenate([centre_k, radial_k, angular_k]),
            np.concatenate([centre_l, radial_l, angular_l]),
            np.concatenate([centre_c, radial_c, angular_c]),
        ),
        h,
    )


def mesh_for(domain: DomainSpec, resolution: int | tuple[int, ...] | None = None) -> Mesh:
    """Default mesh of a supported domain; ``resolution`` overrides the configured node counts."""

    settings = get_settings()
    sizes = (resolution,) if isinstance(resolution, int) else tuple(resolution or ())
    if domain.kind is DomainKind.BALL_RADIAL:
        return radial_mesh(domain.dimension, sizes[0] if sizes else settings.radial_nodes)
    if domain.kind is DomainKind.DISK2D:
        rings = sizes[0] if sizes else settings.polar_rings
        angles = sizes[1] if len(sizes) > 1 else (2 * rings if sizes else settings.polar_angles)
        return polar_mesh(rings, angles)
    if len(domain.lengths) != 2:
        raise ValueError("Only planar boxes can be meshed; use the asymptotic formulas for n > 2.")
    a, b = domain.lengths
    nx = sizes[0] if sizes else settings.rect_nodes
    ny = sizes[1] if len(sizes) > 1 else int(round((nx - 1) * b / a)) + 1
    return rect_mesh(a, b, nx, ny)


def apply_laplacian(field: Field) -> Field:
    mesh = field.mesh
    return Field(mesh, mesh.extend(mesh.laplacian @ field.interior))


def _interior_coefficient(mesh: Mesh, a: Field | np.ndarray | float) -> np.ndarray:
    if isinstance(a, Field):
        if a.mesh is not mesh:
            raise ValueError("Coefficient field lives on a different mesh.")
        return a.interior
    values = np.asarray(a, dtype=float)
    if values.ndim == 0:
        return np.full(mesh.n_interior, float(values))
    return mesh.restrict(values)


def _factorize(matrix: sp.csc_matrix):
    try:
        return splu(matrix)
    except RuntimeError as exc:
        raise SingularOperatorError(f"Sparse factorisation failed: {exc}", condition=math.inf) from exc


def _condition_estimate(matrix: sp.csc_matrix, lu) -> float:
    size = matrix.shape[0]
    inverse = LinearOperator(
        (size, size),
        matvec=lu.solve,
        rmatvec=lambda x: lu.solve(np.asarray(x, dtype=float), trans="T"),
        dtype=float,
    )
    return float(onenormest(matrix) * onenormest(inverse))


def _check_backward_error(matrix: sp.csc_matrix, x: np.ndarray, rhs: np.ndarray, condition: float) -> None:
    residual = np.max(np.abs(matrix @ x - rhs)) if rhs.size else 0.0
    row_norm = float(abs(matrix).sum(axis=1).max())
    scale = row_norm * np.max(np.abs(x), initial=0.0) + np.max(np.abs(rhs), initial=0.0)
    if scale > 0 and residual > BACKWARD_ERROR_TOL * scale:
        raise SingularOperatorError(
            f"Linear solve lost accuracy (backward error {residual / scale:.2e}).",
            condition=condition,
        )


class DirichletOperator:
    """Factorised L + diag(a) on the interior unknowns of a mesh."""

    def __init__(self, mesh: Mesh, a: Field | np.ndarray | float) -> None:
        self.mesh = mesh
        coefficient = _interior_coefficient(mesh, a)
        self.matrix = (mesh.laplacian + sp.diags(coefficient)).tocsc()
        self._lu = _factorize(self.matrix)
        self.condition = _condition_estimate(self.matrix, self._lu)
        limit = get_settings().max_condition
        if not self.condition <= limit:
            raise SingularOperatorError(
                f"Operator on {mesh.describe()} has condition estimate {self.condition:.3e} > {limit:.1e}.",
                condition=self.condition,
            )

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.ascontiguousarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        _check_backward_error(self.matrix, x, rhs, self.condition)
        return x

    def solve(self, b: Field | np.ndarray) -> Field:
        rhs = b.interior if isinstance(b, Field) else self.mesh.restrict(b)
        return Field(self.mesh, self.mesh.extend(self.solve_interior(rhs)))


class BorderedOperator:
    """Solves L w + a w - mu phi = b together with <w, phi> = xi for (w, mu)."""

    def __init__(self, mesh: Mesh, a: Field | np.ndarray | float, phi: Field) -> None:
        if phi.mesh is not mesh:
            raise ValueError("phi lives on a different mesh.")
        self.mesh = mesh
        coefficient = _interior_coefficient(mesh, a)
        weights = mesh.interior_weights
        # the constraint row is scaled to O(1) entries
        self._row_scale = 1.0 / float(np.mean(weights))
        column = sp.csc_matrix(-phi.interior.reshape(-1, 1))
        row = sp.csr_matrix((self._row_scale * weights * phi.interior).reshape(1, -1))
        block = mesh.laplacian + sp.diags(coefficient)
        self.matrix = sp.bmat([[block, column], [row, None]], format="csc")
        self._lu = _factorize(self.matrix)
        self.condition = _condition_estimate(self.matrix, self._lu)
        limit = get_settings().max_condition
        if not self.condition <= limit:
            raise SingularOperatorError(
                f"Bordered operator on {mesh.describe()} has condition estimate {self.condition:.3e}.",
                condition=self.condition,
            )

    def solve(self, b: Field | np.ndarray | None, xi: float) -> tuple[Field, float]:
        rhs_field = np.zeros(self.mesh.n_interior) if b is None else (
            b.interior if isinstance(b, Field) else self.mesh.restrict(b)
        )
        rhs = np.concatenate([rhs_field, [self._row_scale * xi]])
        x = self._lu.solve(rhs)
        _check_backward_error(self.matrix, x, rhs, self.condition)
        return Field(self.mesh, self.mesh.extend(x[:-1])), float(x[-1])


def solve_linear(mesh: Mesh, a: Field | np.ndarray | float, b: Field | np.ndarray) -> Field:
    """Solve Δw + a w = b with w = 0 on the Dirichlet boundary."""

    return DirichletOperator(mesh, a).solve(b)


@lru_cache(maxsize=16)
def discrete_eigenpair(mesh: Mesh) -> MeshEigenpair:
    """Principal eigenpair of -L by inverse iteration, normalised in the mesh inner product."""

    settings = get_settings()
    operator = DirichletOperator(mesh, 0.0)
    weights = mesh.interior_weights
    x = np.ones(mesh.n_interior)
    x /= math.sqrt(np.dot(weights, x * x))
    lam = math.inf
    for iteration in range(1, settings.eigen_max_iters + 1):
        y = -operator.solve_interior(x)
        y /= math.sqrt(np.dot(weights, y * y))
        if np.dot(weights, y) < 0:
            y = -y
        rayleigh = -float(np.dot(weights * y, mesh.laplacian @ y))
        change = math.sqrt(np.dot(weights, (y - x) ** 2))
        x = y
        if abs(rayleigh - lam) <= settings.eigen_tol * abs(rayleigh) and change <= 1e3 * settings.eigen_tol:
            lam = rayleigh
            break
        lam = rayleigh
    else:
        raise EigenIterationError(
            f"Inverse iteration on {mesh.describe()} did not converge in {settings.eigen_max_iters} steps."
        )
    if np.min(x) <= 0:
        raise EigenIterationError("Discrete principal eigenfunction is not positive inside the domain.")
    LOGGER.info("Discrete lambda1 on %s: %.10g (%d iterations).", mesh.describe(), lam, iteration)
    return MeshEigenpair(lambda1=lam, phi1=Field(mesh, mesh.extend(x)))


def sample_eigenpair(mesh: Mesh, pair: Eigenpair) -> MeshEigenpair:
    """Continuous eigenpair sampled on the mesh (boundary values pinned to zero)."""

    values = pair.value(*mesh.coords)
    return MeshEigenpair(lambda1=pair.lambda1, phi1=mesh.dirichlet_field(values), discrete=False)


def center_cell_average(mesh: Mesh, radial_function: Callable[[np.ndarray], np.ndarray]) -> float:
    """Average of e(r) over the centre control volume of a radial mesh, never evaluating r = 0."""

    if not mesh.is_radial:
        raise ValueError("center_cell_average needs a radial mesh.")
    n = mesh.domain.dimension
    half = 0.5 * mesh.spacing
    nodes, weights = np.polynomial.legendre.leggauss(CENTER_QUADRATURE_POINTS)
    r = 0.5 * half * (nodes + 1.0)
    integral = 0.5 * half * float(np.dot(weights, radial_function(r) * r ** (n - 1)))
    return n * integral / half**n
