"""Expected Shortfall under elliptic mixtures.

For a standardized component with generator g on R^n,

    E[-Z₁; Z₁ <= -q] = K_n ∫_{q²}^∞ (u - q²)^((n-1)/2) g(u) du,
    K_n = π^((n-1)/2) / (2 Γ((n+1)/2)).

The factor 1/2 comes from du = 2r dr in the radial substitution.  Passing
``literal=True`` drops it (and, for distinct component means, weights the
mean term by β_i alone) to reproduce the published closed form, which is
twice the tail mean; see docs/es_constant_report.md.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional

from .errors import DomainError, UnsupportedModelError
from .generators import StudentT, radial_tail_moment_quad
from .model import MixtureModel, Portfolio, portfolio_mean, portfolio_stdev, validate
from .var import (RiskReport, _aggregate, _prepare, var_common_moments, var_delta_theta,
                  var_general)

_LOG_PI = math.log(math.pi)


def radial_constant(dim: int, literal: bool = False) -> float:
    """K_n (or 2 K_n when ``literal``)."""
    k = math.exp(0.5 * (dim - 1) * _LOG_PI - math.lgamma(0.5 * (dim + 1)))
    return k if literal else 0.5 * k


def student_es_coefficient(q: float, nu: float, alpha: float, literal: bool = False) -> float:
    """(c/(α√π)) Γ((ν-1)/2)/Γ(ν/2) ν^(ν/2) (q² + ν)^((1-ν)/2), c = ½ (or 1 if literal)."""
    if not nu > 1:
        raise DomainError(f"expected shortfall needs nu > 1, got {nu}")
    log_val = (math.lgamma(0.5 * (nu - 1.0)) - math.lgamma(0.5 * nu) + 0.5 * nu * math.log(nu)
               + 0.5 * (1.0 - nu) * math.log(q * q + nu) - 0.5 * _LOG_PI)
    c = 1.0 if literal else 0.5
    return c * math.exp(log_val) / alpha


def _check_report(var_report, alpha):
    if var_report.alpha != alpha:
        raise DomainError(f"VaR report is for alpha={var_report.alpha}, requested {alpha}")


def _standardized_q(report, p, comp):
    if report.q_alpha is not None:
        return report.q_alpha
    return (portfolio_mean(p, comp) + report.var - report.theta_shift) / portfolio_stdev(p, comp)


def _require_common(model):
    if not model.common_moments:
        raise UnsupportedModelError("components have different means or scales; use es_general_moments")


def es_student_mixture(p: Portfolio, model: MixtureModel, alpha: float,
                       var_report: Optional[RiskReport] = None, literal: bool = False) -> RiskReport:
    """Closed-form ES for a common-moment Student-t mixture."""
    model = _prepare(p, model)
    _require_common(model)
    if not model.all_student:
        raise UnsupportedModelError("closed-form ES needs Student-t generators only")
    if var_report is None:
        var_report = var_common_moments(p, model, alpha)
    _check_report(var_report, alpha)
    comp = model.components[0]
    q = _standardized_q(var_report, p, comp)
    multiplier = sum(c.weight * student_es_coefficient(q, c.generator.nu, alpha, literal)
                     for c in model.components)
    es = -portfolio_mean(p, comp) + multiplier * portfolio_stdev(p, comp) + var_report.theta_shift
    route = "closed-form-literal" if literal else "closed-form"
    return replace(var_report, q_alpha=q, es=es, es_multiplier=multiplier, es_route=route)


def es_multiplier_quadrature(q: float, model: MixtureModel, alpha: float,
                             literal: bool = False) -> float:
    dim = model.dimension
    total = 0.0
    for c in model.components:
        gen = c.generator
        total += c.weight * radial_tail_moment_quad(lambda u, g=gen: g.log_radial(u, dim), q, dim)
    return radial_constant(dim, literal) * total / alpha


def es_generic(p: Portfolio, model: MixtureModel, alpha: float,
               var_report: Optional[RiskReport] = None, literal: bool = False) -> RiskReport:
    """ES = -δ·μ + multiplier·√(δΣδᵗ) with the radial integral done by quadrature."""
    model = _prepare(p, model)
    _require_common(model)
    if var_report is None:
        var_report = var_common_moments(p, model, alpha)
    _check_report(var_report, alpha)
    comp = model.components[0]
    q = _standardized_q(var_report, p, comp)
    multiplier = es_multiplier_quadrature(q, model, alpha, literal)
    es = -portfolio_mean(p, comp) + multiplier * portfolio_stdev(p, comp) + var_report.theta_shift
    route = "quadrature-literal" if literal else "quadrature"
    return replace(var_report, q_alpha=q, es=es, es_multiplier=multiplier, es_route=route)


def es_general_moments(p: Portfolio, model: MixtureModel, alpha: float,
                       var_report: Optional[RiskReport] = None, literal: bool = False) -> RiskReport:
    """ES for components with distinct means and scales.

    Each component i is standardized at q_i = (δ·μ_i + VaR)/√(δΣ_iδᵗ); its
    mean term carries the component's own tail probability G_i(q_i).
    """
    model = _prepare(p, model)
    if var_report is None:
        var_report = var_general(p, model, alpha)
    _check_report(var_report, alpha)
    dim = model.dimension
    k = radial_constant(dim, literal)
    var = var_report.var
    es = 0.0
    for c in model.components:
        m = portfolio_mean(p, c)
        s = portfolio_stdev(p, c)
        q = (m + var) / s
        gen = c.generator
        moment = radial_tail_moment_quad(lambda u, g=gen: g.log_radial(u, dim), q, dim)
        if literal:
            es += c.weight * (-m + s * k * moment / alpha)
        else:
            es += c.weight * (-m * gen.lower_tail(q, dim) + s * k * moment) / alpha
    route = "quadrature-literal" if literal else "quadrature"
    return replace(var_report, es=es, es_route=route)


def es_delta_theta(p: Portfolio, model: MixtureModel, alpha: float,
                   var_report: Optional[RiskReport] = None, literal: bool = False) -> RiskReport:
    """Delta-Theta ES: the generic ES plus Θ·t."""
    if var_report is None:
        var_report = var_delta_theta(p, model, alpha)
    return replace(es_generic(p, model, alpha, var_report, literal), method="delta-theta")


def expected_shortfall(p: Portfolio, model: MixtureModel, alpha: float,
                       literal: bool = False) -> RiskReport:
    """VaR and ES through the most specific available formula."""
    model = validate(model)
    if model.common_moments:
        var_report = var_delta_theta(p, model, alpha) if p.theta_shift else var_common_moments(p, model, alpha)
        if model.all_student:
            return es_student_mixture(p, model, alpha, var_report, literal)
        return es_generic(p, model, alpha, var_report, literal)
    if p.theta_shift:
        raise UnsupportedModelError("Delta-Theta risk needs common means and scales")
    return es_general_moments(p, model, alpha, literal=literal)


def aggregate_es(es1: float, es2: float, k: float, cross: float) -> float:
    """ES(M) = √(ES₁² + ES₂² + 2 K² δ₁ᵗΣ₁₂δ₂), K the standardized ES multiplier."""
    return _aggregate(es1, es2, k, cross, "ES")
