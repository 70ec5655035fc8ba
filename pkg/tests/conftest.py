import numpy as np
import pytest
from hypothesis import strategies as st

from ragnet.model import ModelParams, SymmetricParams

unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def model_params(draw, lam=unit):
    lp1, lp2 = draw(unit), draw(unit)
    return ModelParams(
        lambda1=draw(lam), lambda2=draw(lam), alpha1=draw(unit), alpha2=draw(unit),
        s1=draw(unit), s2=draw(unit), l1_minus=1.0 - lp1, l1_plus=lp1,
        l2_minus=1.0 - lp2, l2_plus=lp2,
    )


@st.composite
def symmetric_params(draw, lam=unit):
    return SymmetricParams.make(draw(lam), draw(unit), draw(unit), draw(unit))


def random_model(rng, lam_max=1.0) -> ModelParams:
    lp1, lp2 = rng.uniform(size=2)
    a1, a2, s1, s2 = rng.uniform(size=4)
    l1, l2 = rng.uniform(0, lam_max, size=2)
    return ModelParams(l1, l2, a1, a2, s1, s2, 1 - lp1, lp1, 1 - lp2, lp2)


def aloha(lam1=0.2, lam2=0.2, alpha=0.5) -> ModelParams:
    """Plain collision channel: no signals."""
    return ModelParams(lam1, lam2, alpha, alpha, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = _ACCEPTANCE.get(report.nodeid)
    if marker is None:
        return
    if report.when == "call" or report.failed:
        marker["outcome"] = "PASS" if report.passed else "FAIL"
        marker["seconds"] = marker.get("seconds", 0.0) + report.duration


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _ACCEPTANCE[item.nodeid] = {"number": m.args[0], "title": m.args[1]}


def pytest_terminal_summary(terminalreporter):
    done = [m for m in _ACCEPTANCE.values() if "outcome" in m]
    if not done:
        return
    terminalreporter.section("acceptance criteria")
    for m in sorted(done, key=lambda m: m["number"]):
        terminalreporter.write_line(
            f"criterion {m['number']} {m['title']}: {m['outcome']} ({m['seconds']:.1f} s)")
