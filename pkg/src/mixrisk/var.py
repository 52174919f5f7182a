"""Value-at-Risk for linear portfolios under elliptic mixtures.

Losses are signed internally (P&L < 0 is a loss); every reported VaR and ES
is a positive currency amount.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import (ConvergenceError, DomainError, InfeasibleConfidenceError,
                     InvalidCorrelationError, UnsupportedModelError)
from .generators import GeneratorKind
from .model import MixtureModel, Portfolio, check_portfolio, portfolio_mean, portfolio_stdev, validate

CONVENTION = "VaR/ES reported as positive currency losses"

MAX_ITER = 200
BRACKET_GROWTH = 4.0
BRACKET_LIMIT = 1e12
TAIL_TOL = 1e-10


@dataclass(frozen=True)
class QuantileSolution:
    q_alpha: float
    residual: float
    iterations: int
    bracket: tuple


@dataclass(frozen=True)
class RiskReport:
    var: float
    alpha: float
    method: str
    q_alpha: Optional[float] = None
    es: Optional[float] = None
    es_multiplier: Optional[float] = None
    es_route: Optional[str] = None
    theta_shift: float = 0.0
    incremental: Optional[tuple] = None
    convention: str = CONVENTION

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if v is not None}
        if self.incremental is not None:
            out["incremental"] = list(self.incremental)
        return out


def _check_alpha(alpha):
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha!r}")


def _check_weights(mix):
    total = sum(w for w, _ in mix)
    if abs(total - 1.0) > 1e-12 or any(not w > 0 for w, _ in mix):
        raise DomainError(f"mixture weights must be positive and sum to 1 (sum={total!r})")


def mixture_tail(q: float, mix: Sequence[tuple[float, GeneratorKind]], dim: int = 1) -> float:
    """Σ_j β_j G_j(q): probability that the standardized P&L falls below -q."""
    if not q > 0:
        raise DomainError(f"mixture_tail requires q > 0, got {q!r}")
    _check_weights(mix)
    return sum(w * g.lower_tail(q, dim) for w, g in mix)


def _brent(f, lo, hi):
    try:
        root, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                     maxiter=MAX_ITER, full_output=True)
    except RuntimeError as exc:
        raise ConvergenceError(f"root finder failed: {exc}") from exc
    return root, info.iterations


def solve_quantile(mix: Sequence[tuple[float, GeneratorKind]], alpha: float,
                   dim: int = 1) -> QuantileSolution:
    """Unique q > 0 with Σ_j β_j G_j(q) = alpha.

    The upper bracket starts at 1 and grows by a factor 4 until the tail
    drops below ``alpha``.
    """
    _check_alpha(alpha)
    _check_weights(mix)

    def f(q):
        return sum(w * g.lower_tail(q, dim) for w, g in mix) - alpha

    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        lo, hi = hi, hi * BRACKET_GROWTH
        if hi > BRACKET_LIMIT:
            raise ConvergenceError(
                f"tail still above alpha={alpha} at q={BRACKET_LIMIT:g}; alpha too small for this mixture")
    q, iterations = _brent(f, lo, hi)
    residual = f(q)
    if abs(residual) > TAIL_TOL:
        raise ConvergenceError(f"quantile residual {residual:.3g} exceeds {TAIL_TOL}")
    return QuantileSolution(q, residual, iterations, (lo, hi))


def _prepare(p: Portfolio, model: MixtureModel) -> MixtureModel:
    model = validate(model)
    check_portfolio(p, model)
    return model


def var_common_moments(p: Portfolio, model: MixtureModel, alpha: float) -> RiskReport:
    """VaR = -δ·μ + q_α √(δΣδᵗ) for a mixture sharing one mean and scale."""
    model = _prepare(p, model)
    if not model.common_moments:
        raise UnsupportedModelError("components have different means or scales; use var_general")
    sol = solve_quantile(model.mixture, alpha, model.dimension)
    comp = model.components[0]
    var = -portfolio_mean(p, comp) + sol.q_alpha * portfolio_stdev(p, comp)
    if not var > 0:
        raise InfeasibleConfidenceError(
            f"expected gain exceeds the {alpha} tail loss; VaR would be {var:.6g} <= 0")
    return RiskReport(var=var, alpha=alpha, method="common-moments", q_alpha=sol.q_alpha)


def var_general(p: Portfolio, model: MixtureModel, alpha: float) -> RiskReport:
    """Solve α = Σ_j β_j G_j((δ·μ_j + VaR) / √(δΣ_jδᵗ)) for VaR > 0."""
    model = _prepare(p, model)
    _check_alpha(alpha)
    dim = model.dimension
    means = [portfolio_mean(p, c) for c in model.components]
    scales = [portfolio_stdev(p, c) for c in model.components]
    terms = [(c.weight, c.generator, m, s) for c, m, s in zip(model.components, means, scales)]

    def f(v):
        return sum(w * g.lower_tail((m + v) / s, dim) for w, g, m, s in terms) - alpha

    if not f(0.0) > 0:
        raise InfeasibleConfidenceError(
            f"P(P&L < 0) <= alpha={alpha}: no positive VaR at this confidence")
    step = max(scales)
    lo, hi = 0.0, step
    while f(hi) > 0:
        lo, hi = hi, hi * BRACKET_GROWTH
        if hi > BRACKET_LIMIT * step:
            raise ConvergenceError(f"could not bracket VaR at alpha={alpha}")
    var, _ = _brent(f, lo, hi)
    q = None
    if model.common_moments:
        q = (means[0] + var) / scales[0]
    return RiskReport(var=var, alpha=alpha, method="general", q_alpha=q)


def value_at_risk(p: Portfolio, model: MixtureModel, alpha: float) -> RiskReport:
    """Dispatch to the common-moment formula when possible."""
    model = validate(model)
    if model.common_moments:
        return var_common_moments(p, model, alpha)
    return var_general(p, model, alpha)


def var_delta_theta(p: Portfolio, model: MixtureModel, alpha: float) -> RiskReport:
    """Delta-Theta VaR: -δ·μ + Θ·t + q_α √(δΣδᵗ).

    Θ·t enters with a plus sign, so Θ must be supplied with that orientation.
    """
    base = var_common_moments(p, model, alpha)
    shift = p.theta_shift
    return replace(base, var=base.var + shift, theta_shift=shift, method="delta-theta")


def _require_zero_mean_common(model):
    if not model.common_moments:
        raise UnsupportedModelError("incremental VaR needs common means and scales")
    if np.any(model.components[0].mean != 0):
        raise UnsupportedModelError("incremental VaR is only defined here for zero mean (μ = 0)")


def incremental_var(p: Portfolio, model: MixtureModel, alpha: float) -> np.ndarray:
    """Euler contributions IVaR_i = δ_i ∂VaR/∂δ_i; they sum to VaR.

    With μ = 0, ∂VaR/∂δ = q_α Σδᵗ / √(δΣδᵗ).
    """
    model = _prepare(p, model)
    _require_zero_mean_common(model)
    sol = solve_quantile(model.mixture, alpha, model.dimension)
    scale = model.components[0].scale
    sigma_delta = scale @ p.delta
    gradient = sol.q_alpha * sigma_delta / math.sqrt(float(p.delta @ sigma_delta))
    return p.delta * gradient


def implied_correlation(delta1, delta2, scale1, scale2, cross_scale) -> float:
    """φ = δ₁ᵗΣ₁₂δ₂ / √((δ₁ᵗΣ₁δ₁)(δ₂ᵗΣ₂δ₂))."""
    d1 = np.asarray(delta1, float)
    d2 = np.asarray(delta2, float)
    cross = float(d1 @ np.asarray(cross_scale, float) @ d2)
    v1 = float(d1 @ np.asarray(scale1, float) @ d1)
    v2 = float(d2 @ np.asarray(scale2, float) @ d2)
    return cross / math.sqrt(v1 * v2)


def _aggregate(r1, r2, k, cross, label):
    if r1 < 0 or r2 < 0:
        raise DomainError(f"{label} inputs must be non-negative")
    coupling = k * k * cross
    if r1 > 0 and r2 > 0 and abs(coupling) > r1 * r2 * (1 + 1e-12):
        raise InvalidCorrelationError(
            f"implied correlation {coupling / (r1 * r2):.6g} lies outside [-1, 1]")
    radicand = r1 * r1 + r2 * r2 + 2.0 * coupling
    if radicand < 0:
        raise InvalidCorrelationError(f"negative radicand {radicand:.6g} in {label} aggregation")
    return math.sqrt(radicand)


def aggregate_var(var1: float, var2: float, q: float, cross: float) -> float:
    """VaR(M) = √(VaR₁² + VaR₂² + 2 q² δ₁ᵗΣ₁₂δ₂) for μ ≈ 0 sub-portfolios."""
    return _aggregate(var1, var2, q, cross, "VaR")


def aggregate_by_correlation(r1: float, r2: float, phi: float) -> float:
    """√(R₁² + R₂² + 2φ R₁R₂) for VaR or ES with implied correlation φ."""
    if not -1.0 - 1e-12 <= phi <= 1.0 + 1e-12:
        raise InvalidCorrelationError(f"correlation {phi} lies outside [-1, 1]")
    return math.sqrt(max(r1 * r1 + r2 * r2 + 2.0 * phi * r1 * r2, 0.0))
