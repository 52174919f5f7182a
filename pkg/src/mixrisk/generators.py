"""Radial density generators of elliptic laws.

A generator ``g`` defines the standardized density ``g(|z|²)`` on R^n.  Each
generator knows its lower tail ``G(s) = P(Z_1 <= -s)`` for one coordinate of
the standardized vector and the radial tail moment

    ∫_{q²}^∞ (u - q²)^((n-1)/2) g(u) du

that drives expected shortfall.  Student and normal generators have closed
forms; ``Custom`` falls back to quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from . import specfun
from .errors import ConvergenceError, DomainError

_LOG_PI = math.log(math.pi)
_LOG_2PI = math.log(2.0 * math.pi)

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200


def _quad(fun, lo, hi):
    value, error, *rest = integrate.quad(
        fun, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1)
    if len(rest) > 1 and error > max(QUAD_EPSABS, QUAD_EPSREL * abs(value)) * 100:
        raise ConvergenceError(f"quadrature failed: {rest[1]}")
    return value


def radial_tail_moment_quad(log_g: Callable[[float], float], q: float, dim: int) -> float:
    """∫_{q²}^∞ (u - q²)^((dim-1)/2) g(u) du by adaptive Gauss-Kronrod.

    Works on v = u - q² and in log space: the integrand is rescaled by its
    largest value on a coarse grid before exponentiation.
    """
    q2 = q * q
    half = 0.5 * (dim - 1)
    scale = max(q2, 1.0)

    def log_integrand(v):
        if v <= 0.0:
            return -math.inf if half > 0 else log_g(q2)
        return half * math.log(v) + log_g(v + q2)

    grid = scale * np.geomspace(1e-4, 1e4, 41)
    ref = max(log_integrand(float(v)) for v in grid)
    if not math.isfinite(ref):
        raise ConvergenceError("radial integrand vanishes on the sampling grid")

    def f(v):
        return math.exp(log_integrand(v) - ref)

    total = _quad(f, 0.0, scale) + _quad(f, scale, math.inf)
    return total * math.exp(ref)


@dataclass(frozen=True)
class StudentT:
    """Multivariate Student-t generator with ``nu`` degrees of freedom.

    ``nu`` only needs to be positive here; models enforce nu > 2 at
    validation time so that the scale matrix has a finite covariance.
    """

    nu: float

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise DomainError(f"Student-t requires a finite nu > 0, got {self.nu!r}")
        object.__setattr__(self, "nu", float(self.nu))

    kind = "student-t"

    def log_radial(self, u: float, dim: int) -> float:
        nu = self.nu
        log_c = (math.lgamma(0.5 * (nu + dim)) - math.lgamma(0.5 * nu)
                 - 0.5 * dim * (math.log(nu) + _LOG_PI))
        return log_c - 0.5 * (nu + dim) * math.log1p(u / nu)

    def radial(self, u: float, dim: int) -> float:
        return math.exp(self.log_radial(u, dim))

    def upper_tail(self, s: float, dim: int = 1) -> float:
        """P(Z_1 <= -s) for s > 0."""
        return specfun.student_tail(s, self.nu)

    def lower_tail(self, s: float, dim: int = 1) -> float:
        """P(Z_1 <= -s) for any real s."""
        if s > 0:
            return specfun.student_tail(s, self.nu)
        if s < 0:
            return 1.0 - specfun.student_tail(-s, self.nu)
        return 0.5

    def tail_moment(self, q: float, dim: int) -> float:
        """Closed form ∫_{q²}^∞ (u-q²)^((n-1)/2) g(u) du, finite for nu > 1."""
        nu = self.nu
        if nu <= 1:
            raise DomainError(f"tail moment needs nu > 1, got {nu}")
        log_val = (0.5 * (dim + nu) * math.log(nu)
                   + 0.5 * (1.0 - nu) * math.log(q * q + nu)
                   + specfun.log_beta(0.5 * (nu - 1.0), 0.5 * (dim + 1.0)))
        return math.exp(log_val + self.log_radial(0.0, dim))

    def to_dict(self) -> dict:
        return {"type": self.kind, "nu": self.nu}


@dataclass(frozen=True)
class Normal:
    """Gaussian generator (2π)^(-n/2) exp(-u/2)."""

    kind = "normal"

    def log_radial(self, u: float, dim: int) -> float:
        return -0.5 * dim * _LOG_2PI - 0.5 * u

    def radial(self, u: float, dim: int) -> float:
        return math.exp(self.log_radial(u, dim))

    def lower_tail(self, s: float, dim: int = 1) -> float:
        return specfun.normal_tail(s)

    def tail_moment(self, q: float, dim: int) -> float:
        log_val = (math.lgamma(0.5 * (dim + 1)) + 0.5 * (dim + 1) * math.log(2.0)
                   + self.log_radial(q * q, dim))
        return math.exp(log_val)

    def to_dict(self) -> dict:
        return {"type": self.kind}


@dataclass(frozen=True)
class Custom:
    """User-supplied generator ``g(s)``, s >= 0, for a fixed dimension.

    The function must already be normalized on R^n for the model dimension;
    :func:`check_normalization` verifies it.
    """

    g: Callable[[float], float] = field(compare=False)
    name: str = "custom"

    kind = "custom"

    def log_radial(self, u: float, dim: int) -> float:
        val = self.g(u)
        return math.log(val) if val > 0 else -math.inf

    def radial(self, u: float, dim: int) -> float:
        return self.g(u)

    def lower_tail(self, s: float, dim: int = 1) -> float:
        if s < 0:
            return 1.0 - self.lower_tail(-s, dim)
        if s == 0:
            return 0.5
        s2 = s * s
        if dim == 1:
            # marginal density is g(z²) itself
            return 0.5 * _quad(lambda u: self.g(u) / math.sqrt(u), s2, math.inf)
        # fold the sphere integral into one incomplete beta factor
        k = 0.5 * (dim - 1)
        const = math.exp(0.5 * dim * _LOG_PI - math.lgamma(0.5 * dim)) / 2.0

        def f(u):
            x = s2 / u
            return self.g(u) * u ** (0.5 * dim - 1.0) * specfun._ibeta(1.0 - x, x, k, 0.5)

        return const * _quad(f, s2, max(4.0 * s2, s2 + 1.0)) \
            + const * _quad(f, max(4.0 * s2, s2 + 1.0), math.inf)

    def tail_moment(self, q: float, dim: int) -> float:
        return radial_tail_moment_quad(lambda u: self.log_radial(u, dim), q, dim)

    def to_dict(self) -> dict:
        return {"type": self.kind, "name": self.name}


GeneratorKind = Union[StudentT, Normal, Custom]


def total_mass(gen: GeneratorKind, dim: int) -> float:
    """∫_{R^n} g(|x|²) dx = π^(n/2)/Γ(n/2) ∫_0^∞ u^(n/2-1) g(u) du."""
    c = math.exp(0.5 * dim * _LOG_PI - math.lgamma(0.5 * dim))
    p = 0.5 * dim - 1.0
    f = lambda u: u ** p * gen.radial(u, dim) if u > 0 else (gen.radial(0.0, dim) if p == 0 else 0.0)
    return c * (_quad(f, 0.0, 1.0) + _quad(f, 1.0, math.inf))


def check_normalization(gen: GeneratorKind, dim: int, tol: float = 1e-6) -> list[str]:
    """Problems with a custom generator: negativity or a total mass != 1."""
    problems = []
    grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 121)])
    if any(gen.radial(float(u), dim) < 0 for u in grid):
        problems.append(f"generator {getattr(gen, 'name', gen.kind)!r} is negative somewhere on [0, inf)")
        return problems
    try:
        mass = total_mass(gen, dim)
    except ConvergenceError as exc:
        return [f"generator normalization integral failed: {exc}"]
    if abs(mass - 1.0) > tol:
        problems.append(
            f"generator {getattr(gen, 'name', gen.kind)!r} integrates to {mass:.9g} "
            f"on R^{dim}, expected 1")
    return problems


def generator_from_dict(data: dict) -> GeneratorKind:
    kind = data.get("type")
    if kind == "student-t":
        if "nu" not in data:
            raise DomainError("student-t generator needs 'nu'")
        return StudentT(float(data["nu"]))
    if kind == "normal":
        return Normal()
    raise DomainError(f"unknown generator type {kind!r} (expected 'student-t' or 'normal')")
