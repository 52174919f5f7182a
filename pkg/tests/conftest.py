import numpy as np
import pytest

from mixrisk.generators import Normal, StudentT
from mixrisk.model import MixtureModel, Portfolio, common_model, component, validate

CRITERIA = {
    1: "quantile tables reproduce within 1e-3 (flagged misprints excluded), < 10 s",
    2: "single-component quantile matches bisection oracle within 1e-6",
    3: "tail routes agree within 1e-10; ES closed form vs quadrature within 1e-6 rel",
    4: "analytic VaR/ES within 3 SE of Monte-Carlo at N=1e6, seed 42, < 60 s",
    5: "Euler, homogeneity, translation, ES >= VaR, block aggregation properties",
    6: "incremental VaR matches central finite differences within 1e-5 rel",
    7: "ES constant report exists and default ES passes the Monte-Carlo check",
}

_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(crit, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, text in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status:7s} {text} ({len(results or [])} checks)")


def random_spd(n, rng):
    a = rng.normal(size=(n, n))
    return a @ a.T / n + 0.5 * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def mc_configurations():
    """Six fixed (name, model, portfolio, alpha) cases: m in {1,2}, n in {1,2,5}."""
    rng = np.random.default_rng(7)
    s5 = random_spd(5, rng)
    return [
        ("m1-n1-normal", validate(MixtureModel((component(1.0, [0.1], [[2.0]], Normal()),))),
         Portfolio([1.5]), 0.05),
        ("m1-n2-t4", common_model([1.0], [StudentT(4.0)], [0, 0], [[1, 0.3], [0.3, 2]]),
         Portfolio([1, -0.5]), 0.01),
        ("m2-n2-t3-t8", common_model([0.3, 0.7], [StudentT(3.0), StudentT(8.0)], [0.05, 0.02],
                                     [[1, 0.5], [0.5, 1.5]]), Portfolio([2, 1]), 0.01),
        ("m2-n5-t5-normal", common_model([0.4, 0.6], [StudentT(5.0), Normal()], np.zeros(5), s5),
         Portfolio([1, 2, -1, 0.5, 1]), 0.05),
        ("m2-n2-t4-distinct-scale", validate(MixtureModel((
            component(0.8, [0, 0], [[1, 0.2], [0.2, 1]], StudentT(4.0)),
            component(0.2, [0, 0], [[4, 0.8], [0.8, 4]], StudentT(4.0))))), Portfolio([1, 1]), 0.01),
        ("m2-n5-distinct", validate(MixtureModel((
            component(0.7, 0.01 * np.ones(5), s5, Normal()),
            component(0.3, -0.02 * np.ones(5), 2 * s5, StudentT(6.0))))), Portfolio([1, 1, 1, 1, 1]), 0.05),
    ]
