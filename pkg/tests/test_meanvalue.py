import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import symmetric_params
from ragnet.chain import simulate, truncated_stationary
from ragnet.meanvalue import (NearSingularWarning, PiEstimates, UnstableError, bounds_csv,
                              dominant_gap, dominant_transfer_residual, flow_residuals,
                              l_from_pi, pbb_range, queue_bounds, symmetric_stability)
from ragnet.model import SymmetricParams
from ragnet.regions import in_stability_region

FIG2 = SymmetricParams.make(0.1, 0.5, 0.2, 0.5)


def _oracle(sp):
    return truncated_stationary(sp.embed(), max_N=512)


def _random_stable(rng, n, s_range=(0.0, 1.0)):
    out = []
    while len(out) < n:
        sp = SymmetricParams.make(rng.uniform(0.01, 0.3), rng.uniform(0.1, 0.9),
                                  rng.uniform(*s_range), rng.uniform())
        stable, margins = symmetric_stability(sp)
        if stable and max(margins) < -0.02:
            out.append(sp)
    return out


def test_stability_example():
    stable, (first, second) = symmetric_stability(FIG2)
    assert first == pytest.approx(0.1 + 0.1 - (0.2 + 0.64 * 0.25), abs=1e-15)
    assert stable and second < 0


@given(st.floats(0, 1), st.floats(0, 1))
def test_stability_without_signals(lam, alpha):
    sp = SymmetricParams.make(lam, alpha, 0.0, 0.5)
    stable, (first, second) = symmetric_stability(sp)
    assume(abs(lam - alpha * (1 - alpha)) > 1e-12)
    assert stable == (lam < alpha * (1 - alpha))
    assert (first < 0) == (second < 0) == stable


@settings(max_examples=100)
@given(symmetric_params())
def test_stability_matches_region(sp):
    stable, margins = symmetric_stability(sp)
    assume(min(abs(m) for m in margins) > 1e-9)
    v = in_stability_region(sp.lam, sp.lam, sp.embed())
    assume(not v.boundary)
    assert stable == v.member


def test_degenerate_denominator_does_not_raise():
    sp = SymmetricParams(lam=0.0, alpha=0.0, s=5e-324, l_minus=1.0, l_plus=0.0)
    with pytest.warns(NearSingularWarning):
        b = queue_bounds(sp, "dominant")
    assert b.near_singular


def test_unstable_refused():
    with pytest.raises(UnstableError, match="unstable"):
        queue_bounds(SymmetricParams.make(0.4, 0.5, 0.2, 0.5))


def test_near_singular_warning():
    sp = FIG2
    edge = 0.2 + 0.64 * 0.25 - 0.2 * 0.5  # lam at which the interior drift vanishes
    near = sp.replace(lam=edge - 5e-7)
    if symmetric_stability(near)[0]:
        with pytest.warns(NearSingularWarning):
            b = queue_bounds(near)
        assert b.near_singular


@settings(max_examples=200)
@given(symmetric_params(lam=st.floats(0, 0.4)))
def test_bounds_ordered(sp):
    assume(symmetric_stability(sp)[0])
    assume(symmetric_stability(sp)[1][0] < -1e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        for closure in ("exact", "dominant"):
            b = queue_bounds(sp, closure)
            assert b.L_low <= b.L_up
            assert b.S_term == b.L_low


@settings(max_examples=200)
@given(symmetric_params(lam=st.floats(0, 0.4)))
def test_dominant_closure_gap_formula(sp):
    assume(symmetric_stability(sp)[0])
    assume(symmetric_stability(sp)[1][0] < -1e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        b = queue_bounds(sp, "dominant")
    assert b.gap == pytest.approx(dominant_gap(sp), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("closure", ["exact", "dominant"])
@given(st.floats(0.01, 0.2), st.floats(0.2, 0.8))
def test_bounds_collapse_without_signals(closure, lam, alpha):
    sp = SymmetricParams.make(lam, alpha, 0.0, 0.3)
    assume(symmetric_stability(sp)[0] and symmetric_stability(sp)[1][0] < -1e-3)
    b = queue_bounds(sp, closure)
    assert b.L_up == pytest.approx(b.L_low, abs=1e-12)


def test_dominant_closure_collapses_with_pure_triggers():
    sp = SymmetricParams.make(0.1, 0.6, 0.1, 1.0)
    assert queue_bounds(sp, "dominant").gap == pytest.approx(0.0, abs=1e-15)
    # the bracketing closure keeps a gap here
    assert queue_bounds(sp).gap > 1e-3


def test_bounds_bracket_oracle_example():
    L = _oracle(FIG2).stats.mean_q1
    b = queue_bounds(FIG2)
    assert b.L_low - 1e-6 <= L <= b.L_up + 1e-6


@pytest.mark.parametrize("sp", _random_stable(np.random.default_rng(4), 8))
def test_bounds_bracket_oracle(sp):
    L = _oracle(sp).stats.mean_q1
    b = queue_bounds(sp)
    assert b.L_low - 1e-6 <= L <= b.L_up + 1e-6
    lo, hi = pbb_range(sp)
    assert lo - 1e-9 <= _oracle(sp).stats.p_both_busy <= hi + 1e-9


@pytest.mark.parametrize("closure", ["exact", "dominant"])
@pytest.mark.parametrize("lp", [0.0, 0.2, 0.5, 0.8, 1.0])
def test_bounds_nonincreasing_in_alpha(closure, lp):
    alphas = np.linspace(0.3, 0.6, 31)
    bs = [queue_bounds(SymmetricParams.make(0.1, a, 0.2, lp), closure) for a in alphas]
    for key in ("L_low", "L_up"):
        vals = np.array([getattr(b, key) for b in bs])
        assert np.all(np.diff(vals) <= 1e-12)


@pytest.mark.parametrize("sp", [FIG2] + _random_stable(np.random.default_rng(8), 5))
def test_l_routes_agree_with_oracle(sp):
    sol = _oracle(sp)
    pi = PiEstimates.from_solution(sol)
    assert 0 <= pi.pi00 <= pi.pi10 <= 1 and pi.pi1_10 >= 0
    est = l_from_pi(pi, sp)
    assert est.via_w == pytest.approx(est.via_marginal, abs=1e-8)
    for v in est:
        assert v == pytest.approx(sol.stats.mean_q1, abs=1e-6)


def test_l_routes_empty_system():
    est = l_from_pi(PiEstimates(pi00=1.0, pi10=1.0, pi1_10=0.0), FIG2.replace(lam=0.0))
    assert est == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)


@pytest.mark.parametrize("sp", _random_stable(np.random.default_rng(9), 10, (0.0, 0.0)))
def test_l_reduces_to_collision_channel_relation(sp):
    # without signals: L (alpha*ab - lam) = lam*(1 - lam) - alpha**2 * E[Q1; Q2 = 0]
    sol = _oracle(sp)
    pi = PiEstimates.from_solution(sol)
    a, lam = sp.alpha, sp.lam
    classical = (lam * (1 - lam) - a * a * pi.pi1_10) / (a * (1 - a) - lam)
    assert l_from_pi(pi, sp).via_marginal == pytest.approx(classical, abs=1e-12)
    assert classical == pytest.approx(sol.stats.mean_q1, abs=1e-6)


@pytest.mark.parametrize("sp", [FIG2] + _random_stable(np.random.default_rng(5), 4))
def test_flow_residuals_at_oracle(sp):
    r = flow_residuals(_oracle(sp), sp.embed())
    assert np.all(np.abs(r) < 1e-8)


def test_flow_residuals_asymmetric_oracle():
    from ragnet.model import ModelParams

    p = ModelParams(0.1, 0.05, 0.5, 0.4, 0.2, 0.3, 0.4, 0.6, 0.7, 0.3)
    r = flow_residuals(truncated_stationary(p), p)
    assert np.all(np.abs(r[:2]) < 1e-8) and np.isnan(r[2:]).all()


def test_flow_residuals_empty_system():
    sp = FIG2.replace(lam=0.0)
    r = flow_residuals(_oracle(sp), sp.embed())
    assert np.all(r == 0.0)


def test_flow_residuals_at_simulation():
    sp = FIG2
    sim = simulate(sp.embed(), 10**6, 10_000, seed=17)
    r = flow_residuals(sim, sp.embed())
    se = sim.se
    # linear propagation of the standard errors with unit-bounded coefficients
    bound = 3 * 4 * (se["p_empty1"] + se["p_empty2"] + se["p_both_empty"] + se["p_both_busy"])
    assert np.all(np.abs(r) < bound)


def test_dominant_transfer_residual_is_diagnostic():
    sol = _oracle(FIG2)
    assert abs(dominant_transfer_residual(sol, FIG2)) > 1e-3
    no_trigger = FIG2.replace(l_plus=0.0)
    assert dominant_transfer_residual(_oracle(no_trigger), no_trigger) == 0.0


def test_bounds_csv_header():
    bs = [queue_bounds(FIG2)]
    assert bounds_csv([0.5], bs).splitlines()[0] == "x,L_low,L_up"
    assert bounds_csv([0.5], bs, [0.3]).splitlines()[0] == "x,L_low,L_up,L_oracle"
