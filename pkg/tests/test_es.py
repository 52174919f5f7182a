import math

import numpy as np
import pytest
from scipy import integrate, stats

from mixrisk.errors import DomainError, UnsupportedModelError
from mixrisk.es import (aggregate_es, es_delta_theta, es_general_moments, es_generic,
                        es_student_mixture, expected_shortfall, student_es_coefficient)
from mixrisk.generators import Normal, StudentT
from mixrisk.model import MixtureModel, Portfolio, common_model, component, validate
from mixrisk.var import aggregate_by_correlation, var_common_moments, var_general

from conftest import random_spd
from oracle_values import NORMAL_QUANTILES, T_TAIL_MEANS

ALPHAS = [0.05, 0.01, 0.001]



def textbook_t_es(nu, alpha):
    q = stats.t.ppf(1 - alpha, nu)
    return stats.t.pdf(q, nu) * (nu + q * q) / ((nu - 1) * alpha)


@pytest.mark.parametrize("key", sorted(T_TAIL_MEANS))
def test_single_student_es_matches_oracle(key):
    nu, alpha = key
    model = common_model([1.0], [StudentT(nu)], [0.0], [[1.0]])
    report = es_student_mixture(Portfolio([1.0]), model, alpha)
    assert report.es == pytest.approx(T_TAIL_MEANS[key], rel=1e-9)


def test_t4_textbook_identity():
    model = common_model([1.0], [StudentT(4)], [0.0], [[1.0]])
    assert es_student_mixture(Portfolio([1.0]), model, 0.05).es == pytest.approx(textbook_t_es(4, 0.05), rel=1e-9)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_normal_limit_of_student_es(alpha):
    z = NORMAL_QUANTILES[alpha]
    model = common_model([1.0], [StudentT(1e6)], [0.0], [[1.0]])
    assert es_student_mixture(Portfolio([1.0]), model, alpha).es == \
        pytest.approx(stats.norm.pdf(z) / alpha, abs=1e-3)


@pytest.mark.parametrize("dim", [1, 2, 3, 5])
@pytest.mark.parametrize("alpha", ALPHAS)
def test_normal_generator_es(dim, alpha):
    z = NORMAL_QUANTILES[alpha]
    delta = np.zeros(dim)
    delta[0] = 1.0
    model = common_model([1.0], [Normal()], np.zeros(dim), np.eye(dim))
    assert es_generic(Portfolio(delta), model, alpha).es == pytest.approx(stats.norm.pdf(z) / alpha, rel=1e-8)


@pytest.mark.parametrize("dim", [2, 3, 5])
@pytest.mark.parametrize("nus", [(3.0,), (4.0,), (8.0,), (3.0, 8.0)])
@pytest.mark.parametrize("alpha", ALPHAS)
def test_closed_form_matches_quadrature(dim, nus, alpha, rng):
    weights = [1.0] if len(nus) == 1 else [0.35, 0.65]
    model = common_model(weights, [StudentT(nu) for nu in nus], np.zeros(dim), random_spd(dim, rng))
    p = Portfolio(rng.normal(size=dim))
    closed = es_student_mixture(p, model, alpha)
    quad = es_generic(p, model, alpha)
    assert quad.es == pytest.approx(closed.es, rel=1e-6)
    assert quad.es_multiplier == pytest.approx(closed.es_multiplier, rel=1e-6)


def test_multiplier_independent_of_dimension():
    mults = []
    for dim in (2, 3, 5):
        model = common_model([0.4, 0.6], [StudentT(4), Normal()], np.zeros(dim), np.eye(dim))
        delta = np.zeros(dim)
        delta[0] = 1.0
        mults.append(es_generic(Portfolio(delta), model, 0.01).es_multiplier)
    assert mults[1] == pytest.approx(mults[0], rel=1e-9)
    assert mults[2] == pytest.approx(mults[0], rel=1e-9)


def test_literal_constant_is_twice_validated():
    model = common_model([0.3, 0.7], [StudentT(3), StudentT(8)], [0, 0], np.eye(2))
    p = Portfolio([1, 1])
    default = es_student_mixture(p, model, 0.01)
    literal = es_student_mixture(p, model, 0.01, literal=True)
    assert literal.es_multiplier == pytest.approx(2 * default.es_multiplier, rel=1e-14)
    assert literal.es_route == "closed-form-literal"
    quad_literal = es_generic(p, model, 0.01, literal=True)
    assert quad_literal.es_multiplier == pytest.approx(literal.es_multiplier, rel=1e-6)


def test_student_coefficient_domain():
    with pytest.raises(DomainError):
        student_es_coefficient(2.0, 1.0, 0.01)


def mixture_es_oracle(model, p, var, alpha):
    """(1/α) Σ β_i ∫_{-∞}^{-VaR} (-x) f_i(x) dx with scipy's univariate laws."""
    total = 0.0
    for c in model.components:
        m = float(p.delta @ c.mean)
        s = math.sqrt(p.delta @ c.scale @ p.delta)
        law = stats.norm(m, s) if isinstance(c.generator, Normal) else stats.t(c.generator.nu, m, s)
        total += c.weight * integrate.quad(lambda x: -x * law.pdf(x), -np.inf, -var,
                                           epsabs=1e-13, epsrel=1e-12)[0]
    return total / alpha


@pytest.mark.parametrize("alpha", [0.05, 0.01])
def test_general_moments_matches_direct_integration(alpha):
    model = validate(MixtureModel((
        component(0.8, [0.01, 0.0], [[1.0, 0.2], [0.2, 1.0]], StudentT(4.0)),
        component(0.2, [-0.02, 0.01], [[4.0, 0.8], [0.8, 4.0]], Normal()))))
    p = Portfolio([1.0, 1.0])
    report = es_general_moments(p, model, alpha)
    assert report.es == pytest.approx(mixture_es_oracle(model, p, report.var, alpha), rel=1e-8)
    assert report.es > report.var


def test_general_moments_reduces_to_generic():
    model = common_model([0.3, 0.7], [StudentT(3), Normal()], [0.05, 0.02], [[1, 0.5], [0.5, 1.5]])
    p = Portfolio([2, 1])
    assert es_general_moments(p, model, 0.01).es == pytest.approx(es_generic(p, model, 0.01).es, abs=1e-9)


def test_general_moments_single_component():
    model = common_model([1.0], [StudentT(5)], [0.0], [[1.0]])
    assert es_general_moments(Portfolio([1.0]), model, 0.05).es == pytest.approx(textbook_t_es(5, 0.05), rel=1e-8)


def test_general_literal_mode_differs_only_when_asked():
    model = validate(MixtureModel((component(0.5, [0.3], [[1.0]], StudentT(4.0)),
                                   component(0.5, [-0.3], [[2.0]], StudentT(4.0)))))
    p = Portfolio([1.0])
    default = es_general_moments(p, model, 0.01)
    literal = es_general_moments(p, model, 0.01, literal=True)
    assert default.es == pytest.approx(mixture_es_oracle(model, p, default.var, 0.01), rel=1e-8)
    assert literal.es_route == "quadrature-literal"
    assert literal.es != pytest.approx(default.es, rel=1e-3)


def test_delta_theta_es():
    model = common_model([0.4, 0.6], [StudentT(4), Normal()], [0, 0], [[1, 0.1], [0.1, 2]])
    p0 = Portfolio([1, 1])
    base = es_generic(p0, model, 0.01)
    assert es_delta_theta(p0, model, 0.01).es == pytest.approx(base.es, abs=1e-15)
    r = es_delta_theta(Portfolio([1, 1], theta=3.0, horizon=1.0), model, 0.01)
    assert r.es == pytest.approx(3.0 + base.es_multiplier * math.sqrt(3.2), rel=1e-12)
    r2 = es_delta_theta(Portfolio([1, 1], theta=6.0, horizon=1.0), model, 0.01)
    assert r2.es - r.es == pytest.approx(3.0, abs=1e-12)


def test_var_report_alpha_must_match():
    model = common_model([1.0], [StudentT(5)], [0.0], [[1.0]])
    p = Portfolio([1.0])
    with pytest.raises(DomainError):
        es_student_mixture(p, model, 0.01, var_report=var_common_moments(p, model, 0.05))


def test_closed_form_needs_common_student():
    distinct = validate(MixtureModel((component(0.5, [0.0], [[1.0]], StudentT(4)),
                                      component(0.5, [0.0], [[2.0]], StudentT(4)))))
    with pytest.raises(UnsupportedModelError):
        es_student_mixture(Portfolio([1.0]), distinct, 0.01)
    mixed = common_model([0.5, 0.5], [StudentT(4), Normal()], [0.0], [[1.0]])
    with pytest.raises(UnsupportedModelError):
        es_student_mixture(Portfolio([1.0]), mixed, 0.01)


def test_es_decreasing_in_alpha():
    model = common_model([0.3, 0.7], [StudentT(3), StudentT(9)], [0, 0], np.eye(2))
    p = Portfolio([1, 2])
    values = [expected_shortfall(p, model, a).es for a in (0.001, 0.01, 0.05, 0.2)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("alpha", ALPHAS)
def test_multiplier_exceeds_quantile(alpha):
    model = common_model([0.5, 0.5], [StudentT(3), Normal()], [0, 0], np.eye(2))
    r = expected_shortfall(Portfolio([1, 0]), model, alpha)
    assert r.es_multiplier > r.q_alpha


def test_aggregate_es_examples():
    assert aggregate_es(3.0, 4.0, 2.0, 0.0) == pytest.approx(5.0)
    assert aggregate_by_correlation(3.0, 4.0, 1.0) == pytest.approx(7.0)


@pytest.mark.parametrize("seed", range(5))
def test_aggregate_es_matches_stacked_block_model(seed):
    rng = np.random.default_rng(100 + seed)
    n1, n2 = 2, 3
    big = random_spd(n1 + n2, rng)
    d1, d2 = rng.normal(size=n1), rng.normal(size=n2)
    gens = [StudentT(5.0), StudentT(15.0)]
    stacked = common_model([0.6, 0.4], gens, np.zeros(n1 + n2), big)
    direct = expected_shortfall(Portfolio(np.concatenate([d1, d2])), stacked, 0.01)
    e1 = expected_shortfall(Portfolio(d1), common_model([0.6, 0.4], gens, np.zeros(n1), big[:n1, :n1]), 0.01).es
    e2 = expected_shortfall(Portfolio(d2), common_model([0.6, 0.4], gens, np.zeros(n2), big[n1:, n1:]), 0.01).es
    cross = float(d1 @ big[:n1, n1:] @ d2)
    assert aggregate_es(e1, e2, direct.es_multiplier, cross) == pytest.approx(direct.es, abs=1e-9)
