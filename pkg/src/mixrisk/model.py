"""Portfolios and mixture-of-elliptic risk-factor models.

``scale`` is the dispersion matrix exactly as it enters the elliptic density
|Σ|^(-1/2) g((x-μ) Σ^(-1) (x-μ)ᵗ).  No ν/(ν-2) covariance rescaling is ever
applied to Student components.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .generators import Custom, GeneratorKind, Normal, StudentT, check_normalization, generator_from_dict

SYMMETRY_TOL = 1e-12
WEIGHT_TOL = 1e-12
COMMON_TOL = 1e-12


def _as_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EllipticComponent:
    weight: float
    mean: np.ndarray
    scale: np.ndarray
    generator: GeneratorKind
    # lower Cholesky factor L with L Lᵗ = scale, filled in by validate()
    cholesky: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_vector(self.mean))
        object.__setattr__(self, "scale", _as_vector(self.scale))

    def to_dict(self) -> dict:
        return {
            "weight": float(self.weight),
            "mean": [float(v) for v in self.mean],
            "scale": [[float(v) for v in row] for row in self.scale],
            "generator": self.generator.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class MixtureModel:
    components: tuple
    validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def dimension(self) -> int:
        return int(self.components[0].mean.shape[0])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def mixture(self) -> list:
        """(weight, generator) pairs in component order."""
        return [(c.weight, c.generator) for c in self.components]

    @property
    def common_moments(self) -> bool:
        first = self.components[0]
        norm = max(np.max(np.abs(first.scale)), 1.0)
        for c in self.components[1:]:
            if np.max(np.abs(c.mean - first.mean)) > COMMON_TOL:
                return False
            if np.max(np.abs(c.scale - first.scale)) > COMMON_TOL * norm:
                return False
        return True

    @property
    def all_student(self) -> bool:
        return all(isinstance(c.generator, StudentT) for c in self.components)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension,
                "components": [c.to_dict() for c in self.components]}

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class Portfolio:
    """Linear P&L δ·X (+ Θ·t for the Delta-Theta approximation)."""

    delta: np.ndarray
    theta: float = 0.0
    horizon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta", _as_vector(self.delta))
        problems = []
        if self.delta.ndim != 1 or self.delta.size == 0:
            problems.append("portfolio.delta must be a non-empty vector")
        elif not np.all(np.isfinite(self.delta)):
            problems.append("portfolio.delta contains non-finite entries")
        elif not np.any(self.delta):
            problems.append("portfolio.delta is identically zero")
        if not self.horizon >= 0:
            problems.append(f"portfolio.horizon must be >= 0, got {self.horizon}")
        if problems:
            raise ValidationError(problems)

    @property
    def theta_shift(self) -> float:
        return float(self.theta) * float(self.horizon)

    def scaled(self, factor: float) -> "Portfolio":
        return replace(self, delta=self.delta * factor)

    def to_dict(self) -> dict:
        out = {"delta": [float(v) for v in self.delta]}
        if self.theta or self.horizon:
            out["theta"] = float(self.theta)
            out["horizon"] = float(self.horizon)
        return out


def component(weight, mean, scale, generator) -> EllipticComponent:
    """Convenience constructor accepting plain lists."""
    return EllipticComponent(float(weight), np.asarray(mean, float), np.asarray(scale, float), generator)


def _component_problems(i, comp, dim):
    label = f"components[{i}]"
    problems = []
    if not comp.weight > 0:
        problems.append(f"{label}.weight must be > 0, got {comp.weight}")
    if comp.weight > 1 + WEIGHT_TOL:
        problems.append(f"{label}.weight must be <= 1, got {comp.weight}")
    if comp.mean.shape != (dim,):
        problems.append(f"{label}.mean has shape {comp.mean.shape}, expected ({dim},)")
    if comp.scale.shape != (dim, dim):
        problems.append(f"{label}.scale has shape {comp.scale.shape}, expected ({dim}, {dim})")
        return problems, None
    if not np.all(np.isfinite(comp.scale)):
        problems.append(f"{label}.scale contains non-finite entries")
        return problems, None
    norm = max(np.max(np.abs(comp.scale)), np.finfo(float).tiny)
    if np.max(np.abs(comp.scale - comp.scale.T)) > SYMMETRY_TOL * norm:
        problems.append(f"{label}.scale is not symmetric")
        return problems, None
    try:
        chol = np.linalg.cholesky(comp.scale)
    except np.linalg.LinAlgError:
        problems.append(f"{label}.scale is not positive definite")
        chol = None
    gen = comp.generator
    if isinstance(gen, StudentT) and not gen.nu > 2:
        problems.append(f"{label}.generator.nu must be > 2, got {gen.nu}")
    elif isinstance(gen, Custom):
        problems.extend(f"{label}: {p}" for p in check_normalization(gen, dim))
    elif not isinstance(gen, (StudentT, Normal, Custom)):
        problems.append(f"{label}.generator has unsupported type {type(gen).__name__}")
    return problems, chol


def validate(model: MixtureModel) -> MixtureModel:
    """Check every invariant and cache Cholesky factors.

    Raises :class:`ValidationError` listing all violations. Validating an
    already validated model returns it unchanged.
    """
    if model.validated:
        return model
    if not model.components:
        raise ValidationError(["model has no components"])
    dim = model.components[0].mean.shape[0] if model.components[0].mean.ndim == 1 else 0
    problems = []
    if dim < 1:
        problems.append("components[0].mean must be a non-empty vector")
        raise ValidationError(problems)
    factored = []
    for i, comp in enumerate(model.components):
        comp_problems, chol = _component_problems(i, comp, dim)
        problems.extend(comp_problems)
        factored.append(replace(comp, cholesky=chol))
    total = sum(c.weight for c in model.components)
    if abs(total - 1.0) > WEIGHT_TOL:
        problems.append(f"weights sum to {total!r}, expected 1")
    if problems:
        raise ValidationError(problems)
    return MixtureModel(tuple(factored), validated=True)


def _check_dims(p: Portfolio, c: EllipticComponent):
    if p.delta.shape != c.mean.shape:
        raise DomainError(
            f"portfolio has {p.delta.shape[0]} positions but the model has dimension {c.mean.shape[0]}")


def portfolio_mean(p: Portfolio, c: EllipticComponent) -> float:
    """δ·μ_j."""
    _check_dims(p, c)
    return float(p.delta @ c.mean)


def portfolio_stdev(p: Portfolio, c: EllipticComponent) -> float:
    """√(δ Σ_j δᵗ), the scale of the component's P&L."""
    _check_dims(p, c)
    var = float(p.delta @ c.scale @ p.delta)
    if not var > 0:
        raise DomainError("portfolio has zero dispersion under a model component")
    return math.sqrt(var)


def portfolio_stdev_cholesky(p: Portfolio, c: EllipticComponent) -> float:
    """|δ L_j| computed from the cached factor (L Lᵗ = Σ_j)."""
    _check_dims(p, c)
    chol = c.cholesky if c.cholesky is not None else np.linalg.cholesky(c.scale)
    return float(np.linalg.norm(p.delta @ chol))


def check_portfolio(p: Portfolio, model: MixtureModel) -> None:
    problems = []
    for i, c in enumerate(model.components):
        if p.delta.shape != c.mean.shape:
            problems.append(
                f"portfolio.delta has length {p.delta.size}, model dimension is {c.mean.size}")
            break
        if not float(p.delta @ c.scale @ p.delta) > 0:
            problems.append(f"portfolio has zero dispersion under components[{i}]")
    if problems:
        raise ValidationError(problems)


# --------------------------------------------------------------------------
# JSON schema


def model_from_dict(data: dict) -> MixtureModel:
    problems = []
    comps = data.get("components")
    if not isinstance(comps, list) or not comps:
        raise ValidationError(["'components' must be a non-empty list"])
    out = []
    for i, raw in enumerate(comps):
        try:
            gen = generator_from_dict(raw.get("generator", {}))
            out.append(component(raw["weight"], raw["mean"], raw["scale"], gen))
        except KeyError as exc:
            problems.append(f"components[{i}] is missing field {exc.args[0]!r}")
        except (DomainError, TypeError, ValueError) as exc:
            problems.append(f"components[{i}]: {exc}")
    if problems:
        raise ValidationError(problems)
    model = MixtureModel(tuple(out))
    if "dimension" in data and data["dimension"] != model.dimension:
        raise ValidationError(
            [f"dimension is {data['dimension']} but components[0].mean has length {model.dimension}"])
    return validate(model)


def portfolio_from_dict(data: dict) -> Portfolio:
    if not isinstance(data, dict) or "delta" not in data:
        raise ValidationError(["'portfolio.delta' is required"])
    return Portfolio(np.asarray(data["delta"], float),
                     float(data.get("theta", 0.0)), float(data.get("horizon", 0.0)))


def load(path) -> tuple[MixtureModel, Portfolio]:
    """Read a model + portfolio JSON file."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError([f"{path}: invalid JSON ({exc})"]) from exc
    model = model_from_dict(data)
    portfolio = portfolio_from_dict(data.get("portfolio"))
    check_portfolio(portfolio, model)
    return model, portfolio


def dump(model: MixtureModel, portfolio: Optional[Portfolio] = None) -> dict:
    out = model.to_dict()
    if portfolio is not None:
        out["portfolio"] = portfolio.to_dict()
    return out


def common_model(weights: Sequence[float], generators: Sequence[GeneratorKind], mean, scale) -> MixtureModel:
    """Mixture whose components share one mean and scale matrix."""
    return validate(MixtureModel(tuple(
        component(w, mean, scale, g) for w, g in zip(weights, generators))))
