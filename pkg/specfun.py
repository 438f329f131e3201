"""Bessel functions, their first roots, and principal Dirichlet eigenpairs of balls and rectangles.

Normalisation follows the standard convention J_{1/2}(x) = sqrt(2 / (pi x)) sin x.
Writing J_{1/2}(x) = sin x / sqrt(x) instead only rescales the Bessel factor, and
that constant is absorbed by c0, so phi1 is the same either way.

For n = 3 the first zero of J_{1/2} is nu1 = pi and lambda1 = pi^2 (not nu1 = pi^2).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import brentq

from config import get_settings
from oscint import QuadratureError, integrate_with_error

LOGGER = logging.getLogger(__name__)

SERIES_LIMIT = 8.0
MILLER_LIMIT = 30.0

RadialEvaluator = Callable[[np.ndarray], np.ndarray]


class UnsupportedOrderError(ValueError):
    """Requested Bessel order is not a supported half-integer."""


class DomainKind(str, Enum):
    DISK2D = "disk2d"
    BALL_RADIAL = "ball"
    RECT2D = "rect"
    RECTND = "rectnd"


class DomainSpec(BaseModel):
    """One of the supported domains: unit disk, radial unit ball, or a box."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: DomainKind
    dimension: int = 2
    lengths: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_shape(self) -> DomainSpec:
        if self.kind is DomainKind.DISK2D and self.dimension != 2:
            raise ValueError("disk2d is two-dimensional.")
        if self.kind is DomainKind.BALL_RADIAL and self.dimension < 2:
            raise ValueError(f"ball dimension must be >= 2, got {self.dimension}.")
        if self.kind in (DomainKind.RECT2D, DomainKind.RECTND):
            if not self.lengths:
                raise ValueError("rectangle side lengths are required.")
            if any(length <= 0 for length in self.lengths):
                raise ValueError(f"rectangle side lengths must be positive, got {self.lengths}.")
            if self.kind is DomainKind.RECT2D and len(self.lengths) != 2:
                raise ValueError("rect takes exactly two side lengths.")
            if self.dimension != len(self.lengths):
                raise ValueError("dimension must match the number of side lengths.")
        return self

    @classmethod
    def disk(cls) -> DomainSpec:
        return cls(kind=DomainKind.DISK2D, dimension=2)

    @classmethod
    def ball(cls, n: int) -> DomainSpec:
        return cls(kind=DomainKind.BALL_RADIAL, dimension=n)

    @classmethod
    def rect(cls, a: float, b: float) -> DomainSpec:
        return cls(kind=DomainKind.RECT2D, dimension=2, lengths=(float(a), float(b)))

    @classmethod
    def rect_nd(cls, dims: list[float] | tuple[float, ...]) -> DomainSpec:
        lengths = tuple(float(d) for d in dims)
        return cls(kind=DomainKind.RECTND, dimension=len(lengths), lengths=lengths)

    @classmethod
    def parse(cls, text: str) -> DomainSpec:
        """Parse "disk2d", "ball 3", "rect 1 2" or "rectnd 1 1 1"."""

        tokens = text.replace(",", " ").split()
        if not tokens:
            raise ValueError("Empty domain specification.")
        head = tokens[0].strip().lower()
        args = tokens[1:]
        try:
            if head in ("disk", "disk2d"):
                return cls.disk()
            if head == "ball":
                return cls.ball(int(args[0]) if args else 2)
            if head == "rect":
                return cls.rect(float(args[0]), float(args[1]))
            if head == "rectnd":
                return cls.rect_nd([float(arg) for arg in args])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"Invalid domain specification {text!r}: {exc}") from exc
        raise ValueError(f"Unknown domain kind {head!r}; expected disk2d, ball, rect or rectnd.")

    @property
    def is_ball(self) -> bool:
        return self.kind in (DomainKind.DISK2D, DomainKind.BALL_RADIAL)

    @property
    def measure(self) -> float:
        if self.is_ball:
            return omega_n(self.dimension) / self.dimension
        return float(np.prod(self.lengths))

    def label(self) -> str:
        if self.kind is DomainKind.DISK2D:
            return "disk2d"
        if self.kind is DomainKind.BALL_RADIAL:
            return f"ball{self.dimension}"
        return self.kind.value + "-" + "x".join(f"{length:g}" for length in self.lengths)


class Eigenpair:
    """Principal Dirichlet eigenpair of -Laplacian on a supported domain.

    For ball-type domains ``phi1``/``dphi1`` are radial profiles phi1(r), phi1'(r);
    for boxes they take one coordinate array per axis and ``dphi1`` returns the
    stacked partial derivatives.
    """

    def __init__(
        self,
        *,
        domain: DomainSpec,
        lambda1: float,
        phi1: Callable[..., np.ndarray],
        dphi1: Callable[..., np.ndarray],
        nu1: float | None = None,
        c0: float | None = None,
        lambda2: float | None = None,
    ) -> None:
        self.domain = domain
        self.lambda1 = float(lambda1)
        self.phi1 = phi1
        self.dphi1 = dphi1
        self.nu1 = nu1
        self.c0 = c0
        self.lambda2 = lambda2

    def value(self, *coords: np.ndarray) -> np.ndarray:
        """phi1 at points given in domain coordinates (r, or x, y, ...)."""

        if self.domain.is_ball:
            if len(coords) == 1:
                radius = np.abs(np.asarray(coords[0], dtype=float))
            else:
                radius = np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))
            return self.phi1(np.minimum(radius, 1.0))
        return self.phi1(*coords)

    @property
    def phi1_at_origin(self) -> float:
        if not self.domain.is_ball:
            raise ValueError("phi1(0) is defined for ball-type domains only.")
        return float(self.phi1(np.asarray(0.0)))

    @property
    def phi1_curvature_at_origin(self) -> float:
        """phi1''(0) = -lambda1 phi1(0) / n (from the radial equation at r = 0)."""

        return -self.lambda1 * self.phi1_at_origin / self.domain.dimension

    def __repr__(self) -> str:
        return (
            f"Eigenpair(domain={self.domain.label()}, lambda1={self.lambda1:.10g}, "
            f"nu1={self.nu1}, c0={self.c0}, lambda2={self.lambda2})"
        )


def _check_order(order: float) -> Fraction:
    frac = Fraction(order).limit_denominator(2)
    if abs(float(frac) - float(order)) > 1e-12 or frac.denominator not in (1, 2) or frac < 0:
        raise UnsupportedOrderError(f"Bessel order must be a non-negative half-integer, got {order}.")
    max_order = get_settings().max_bessel_order
    if float(frac) > max_order + 1e-12:
        raise UnsupportedOrderError(
            f"Bessel order {order} exceeds the supported maximum {max_order} "
            "(raise RESCURVE_MAX_BESSEL_ORDER to extend)."
        )
    return frac


def _series(nu: float, x: np.ndarray) -> np.ndarray:
    """Ascending series sum (-1)^k (x/2)^(2k+nu) / (k! Gamma(k+nu+1))."""

    half = 0.5 * x
    term = np.power(half, nu) / math.gamma(nu + 1.0)
    total = term.copy()
    square = half * half
    for k in range(1, 200):
        term = -term * square / (k * (k + nu))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _scaled_series(nu: float, z: np.ndarray) -> np.ndarray:
    """z^-nu J_nu(z) by its (entire) power series."""

    half_sq = 0.25 * z * z
    term = np.full_like(z, 1.0 / (2.0**nu * math.gamma(nu + 1.0)))
    total = term.copy()
    for k in range(1, 200):
        term = -term * half_sq / (k * (k + nu))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _hankel(nu: float, x: np.ndarray) -> np.ndarray:
    """Large-argument expansion sqrt(2/(pi x)) (P cos chi - Q sin chi)."""

    mu = 4.0 * nu * nu
    chi = x - (0.5 * nu + 0.25) * math.pi
    p_sum = np.ones_like(x)
    q_sum = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 40):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if k % 2:
            q_sum = q_sum + (term if (k // 2) % 2 == 0 else -term)
        else:
            p_sum = p_sum + (-term if (k // 2) % 2 else term)
        if np.all(np.abs(term) < 1e-17):
            break
    return np.sqrt(2.0 / (math.pi * x)) * (p_sum * np.cos(chi) - q_sum * np.sin(chi))


def _miller(order: int, x: np.ndarray) -> np.ndarray:
    """Integer-order J via downward recurrence normalised by J0 + 2 sum J_2k = 1."""

    start = 2 * ((int(np.max(x)) + order + int(math.sqrt(40.0 * (np.max(x) + order + 1))) + 30) // 2)
    j_next = np.zeros_like(x)
    j_curr = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    result = np.zeros_like(x)
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_curr - j_next
        j_next, j_curr = j_curr, j_prev
        if k - 1 == order:
            result = j_curr.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * j_curr
        big = np.abs(j_curr) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            j_curr = j_curr * scale
            j_next = j_next * scale
            norm = norm * scale
            result = result * scale
    norm = norm + j_curr
    return result / norm


def _half_integer_closed(order: Fraction, x: np.ndarray) -> np.ndarray:
    """Spherical-Bessel closed forms with upward recurrence from J_{-1/2}, J_{1/2}."""

    root = np.sqrt(2.0 / (math.pi * x))
    previous = root * np.cos(x)
    current = root * np.sin(x)
    nu = 0.5
    while nu < float(order):
        previous, current = current, (2.0 * nu / x) * current - previous
        nu += 1.0
    return current


def bessel_j(order: float, x: float | np.ndarray) -> float | np.ndarray:
    """Bessel function of the first kind J_order(x) for half-integer order >= 0 and x >= 0."""

    frac = _check_order(order)
    nu = float(frac)
    values = np.asarray(x, dtype=float)
    scalar = values.ndim == 0
    values = np.atleast_1d(values)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("bessel_j expects finite x >= 0.")

    out = np.empty_like(values)
    if frac.denominator == 2:
        small = values < max(1.0, nu)
        if np.any(small):
            out[small] = _series(nu, values[small])
        if np.any(~small):
            out[~small] = _half_integer_closed(frac, values[~small])
    else:
        series = values <= SERIES_LIMIT
        miller = (values > SERIES_LIMIT) & (values <= MILLER_LIMIT)
        hankel = values > MILLER_LIMIT
        if np.any(series):
            out[series] = _series(nu, values[series])
        if np.any(miller):
            out[miller] = _miller(int(frac), values[miller])
        if np.any(hankel):
            out[hankel] = _hankel(nu, values[hankel])
    return float(out[0]) if scalar else out


def scaled_bessel_j(order: float, z: float | np.ndarray) -> float | np.ndarray:
    """z^-order J_order(z), with the removable singularity at z = 0 resolved."""

    nu = float(_check_order(order))
    values = np.asarray(z, dtype=float)
    scalar = values.ndim == 0
    values = np.atleast_1d(values)
    out = np.empty_like(values)
    small = values < 1.0
    if np.any(small):
        out[small] = _scaled_series(nu, values[small])
    if np.any(~small):
        big = values[~small]
        out[~small] = bessel_j(nu, big) / np.power(big, nu)
    return float(out[0]) if scalar else out


@lru_cache(maxsize=None)
def bessel_first_root(order: float) -> float:
    """Smallest positive zero of J_order, bracketed by a coarse scan then refined."""

    _check_order(order)
    step = 0.05
    lo = step
    f_lo = bessel_j(order, lo)
    while lo < 100.0:
        hi = lo + step
        f_hi = bessel_j(order, hi)
        if f_lo == 0.0:
            return lo
        if f_lo * f_hi < 0:
            return float(brentq(lambda t: bessel_j(order, t), lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
        lo, f_lo = hi, f_hi
    raise RuntimeError(f"No zero of J_{order} found below 100.")


def omega_n(n: int) -> float:
    """Surface area of the unit sphere in R^n: n pi^(n/2) / Gamma(n/2 + 1)."""

    if n < 2:
        raise ValueError(f"omega_n needs n >= 2, got {n}.")
    return n * math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@lru_cache(maxsize=None)
def ball_eigenpair(n: int) -> Eigenpair:
    """phi1(r) = c0 r^{-(n-2)/2} J_{(n-2)/2}(nu1 r), normalised in L^2 of the unit ball."""

    if n < 2:
        raise ValueError(f"Ball dimension must be >= 2, got {n}.")
    order = (n - 2) / 2
    # phi1' needs J_{order + 1}.
    if order + 1 > get_settings().max_bessel_order:
        raise UnsupportedOrderError(
            f"Ball dimension {n} needs Bessel order {order + 1}, above the configured maximum."
        )

    nu1 = bessel_first_root(order)
    try:
        quad = integrate_with_error(
            lambda r: bessel_j(order, nu1 * r) ** 2 * r,
            0.0,
            1.0,
            tol=1e-14,
            rel_tol=1e-12,
        )
    except QuadratureError as exc:
        raise RuntimeError(f"Normalisation quadrature for n={n} failed: {exc}") from exc
    c0 = 1.0 / math.sqrt(omega_n(n) * float(quad.value))
    # phi1(r) = c0 nu1^order * (nu1 r)^-order J_order(nu1 r)
    scale = c0 * nu1**order

    def phi1(r: np.ndarray) -> np.ndarray:
        return scale * scaled_bessel_j(order, nu1 * np.asarray(r, dtype=float))

    def dphi1(r: np.ndarray) -> np.ndarray:
        z = nu1 * np.asarray(r, dtype=float)
        return -scale * nu1 * z * scaled_bessel_j(order + 1, z)

    lambda2 = bessel_first_root(1.0) ** 2 if n == 2 else None
    pair = Eigenpair(
        domain=DomainSpec.ball(n),
        lambda1=nu1 * nu1,
        phi1=phi1,
        dphi1=dphi1,
        nu1=nu1,
        c0=c0,
        lambda2=lambda2,
    )
    LOGGER.debug("Ball eigenpair n=%d: %s", n, pair)
    return pair


def rect_eigenpair(dims: list[float] | tuple[float, ...]) -> Eigenpair:
    """Closed-form product eigenpair of the box (0, a1) x ... x (0, an)."""

    lengths = tuple(float(d) for d in dims)
    if not lengths or any(d <= 0 for d in lengths):
        raise ValueError(f"Box side lengths must be positive, got {dims}.")
    amplitude = 2.0 ** (len(lengths) / 2) / math.sqrt(math.prod(lengths))

    def phi1(*coords: np.ndarray) -> np.ndarray:
        value = amplitude
        for length, coord in zip(lengths, coords):
            value = value * np.sin(math.pi * np.asarray(coord, dtype=float) / length)
        return value

    def dphi1(*coords: np.ndarray) -> np.ndarray:
        partials = []
        for axis in range(len(lengths)):
            value = amplitude
            for index, (length, coord) in enumerate(zip(lengths, coords)):
                arg = math.pi * np.asarray(coord, dtype=float) / length
                if index == axis:
                    value = value * (math.pi / length) * np.cos(arg)
                else:
                    value = value * np.sin(arg)
            partials.append(value)
        return np.stack(np.broadcast_arrays(*partials))

    domain = DomainSpec.rect(*lengths) if len(lengths) == 2 else DomainSpec.rect_nd(lengths)
    return Eigenpair(
        domain=domain,
        lambda1=sum(math.pi**2 / d**2 for d in lengths),
        phi1=phi1,
        dphi1=dphi1,
    )


def eigenpair_for(domain: DomainSpec) -> Eigenpair:
    """Principal eigenpair of any supported domain."""

    if domain.kind is DomainKind.BALL_RADIAL:
        return ball_eigenpair(domain.dimension)
    if domain.kind is DomainKind.DISK2D:
        base = ball_eigenpair(2)
        return Eigenpair(
            domain=domain,
            lambda1=base.lambda1,
            phi1=base.phi1,
            dphi1=base.dphi1,
            nu1=base.nu1,
            c0=base.c0,
            lambda2=base.lambda2,
        )
    return rect_eigenpair(domain.lengths)
