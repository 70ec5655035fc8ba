"""End-to-end acceptance checks, one test per criterion.

Each test runs at the tolerance and time budget stated for its criterion and
reports PASS or FAIL in the terminal summary (see ``conftest.py``).
"""
import time
import warnings

import numpy as np
import pytest

from test_chain import listed_boundary_q2, listed_interior
from ragnet.bvp import solve_riemann
from ragnet.chain import simulate, simulate_dominant, step_kernel, truncated_stationary
from ragnet.meanvalue import NearSingularWarning, flow_residuals, queue_bounds, symmetric_stability
from ragnet.model import ModelParams, SymmetricParams
from ragnet.regions import (SaturatedCompanionError, classify_drift, dominant_rates, membership,
                            region_closure, region_margins)

FIELDS = ("mean_q1", "mean_q2", "p_empty1", "p_empty2", "p_both_empty", "p_both_busy",
          "throughput1", "throughput2", "drop_rate1", "drop_rate2", "transfer_rate_1to2",
          "transfer_rate_2to1")


def _model(rng, lam_max=1.0):
    lp1, lp2 = rng.uniform(size=2)
    a1, a2, s1, s2 = rng.uniform(size=4)
    l1, l2 = rng.uniform(0, lam_max, size=2)
    return ModelParams(l1, l2, a1, a2, s1, s2, 1 - lp1, lp1, 1 - lp2, lp2)


def _stable_symmetric(rng, n, lam=(0.01, 0.3), alpha=(0.1, 0.9), s=(0.0, 1.0), lp=(0.0, 1.0),
                      margin=0.02):
    out = []
    while len(out) < n:
        sp = SymmetricParams.make(rng.uniform(*lam), rng.uniform(*alpha), rng.uniform(*s),
                                  rng.uniform(*lp))
        stable, margins = symmetric_stability(sp)
        if stable and max(margins) < -margin:
            out.append(sp)
    return out


def _boundary_q1(p: ModelParams) -> dict:
    """Law at (q1>0, 0) written out by hand."""
    return {
        (-1, 1): p.s1 * p.l1_plus,
        (-1, 0): p.s1 * p.l1_minus + (1 - p.s1) * p.alpha1,
        (0, 0): (1 - p.s1) * (1 - p.alpha1),
    }


def _within_budget(start, seconds):
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.1f} s, budget {seconds} s"


@pytest.mark.acceptance(1, "kernel soundness")
def test_kernel_soundness():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    for _ in range(1000):
        p = _model(rng)
        state = tuple(rng.integers(0, 6, size=2))
        assert abs(step_kernel(state, p).total() - 1.0) <= 1e-12
    cases = 0
    for state, listed in (((3, 5), listed_interior), ((0, 4), listed_boundary_q2),
                          ((6, 0), _boundary_q1)):
        for _ in range(7 if state == (3, 5) else 6 if state == (0, 4) else 7):
            p = _model(rng)
            got = step_kernel(state, p).by_delta()
            want = listed(p)
            for key in set(got) | set(want):
                assert got.get(key, 0.0) == pytest.approx(want.get(key, 0.0), abs=1e-15)
            cases += 1
    assert cases == 20
    _within_budget(start, 1.0)


@pytest.mark.acceptance(2, "region agreement")
def test_region_agreement():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    lams = np.linspace(0.0, 1.0, 50)
    checked = 0
    for _ in range(10):
        p = _model(rng)
        for l1 in lams:
            for l2 in lams:
                margins = np.array([float(m) for m in region_margins(l1, l2, p)])
                if np.any(np.abs(margins) <= 1e-9):
                    continue
                member = bool(membership(l1, l2, p))
                drift = classify_drift(l1, l2, p).verdict == "positive-recurrent"
                assert member == drift, (p, l1, l2)
                checked += 1
    assert checked > 20000
    _within_budget(start, 10.0)


@pytest.mark.acceptance(3, "throughput region inside stability region")
def test_throughput_inside_stability():
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    L1, L2 = np.meshgrid(np.linspace(0, 1, 100), np.linspace(0, 1, 100))
    for _ in range(20):
        p = _model(rng)
        R = membership(L1, L2, p, "stability")
        T = membership(L1, L2, p, "throughput")
        assert not np.any(T & ~R)
        q = p.replace(s1=0.0, s2=0.0)
        assert np.array_equal(membership(L1, L2, q, "throughput"), membership(L1, L2, q))
        q = p.replace(l1_minus=0.0, l1_plus=1.0, l2_minus=0.0, l2_plus=1.0,
                      s1=max(p.s1, 1e-3), s2=max(p.s2, 1e-3))
        assert np.array_equal(membership(L1, L2, q, "throughput"), membership(L1, L2, q))
    _within_budget(start, 30.0)


@pytest.mark.acceptance(4, "oracle and simulation consistency")
def test_oracle_simulation_consistency():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    misses = []
    for i, sp in enumerate(_stable_symmetric(rng, 20, s=(0.05, 1.0), margin=0.05)):
        p = sp.embed()
        orc = truncated_stationary(p, max_N=512)
        assert orc.tail_mass < 1e-8
        assert np.all(np.abs(flow_residuals(orc, p)) < 1e-8)
        sim = simulate(p, 10**6, 10_000, seed=1000 + i)
        for f in FIELDS:
            dev = abs(getattr(sim, f) - getattr(orc.stats, f))
            if dev > 3 * sim.se[f]:
                misses.append((i, f, dev, sim.se[f]))
    assert not misses, misses
    _within_budget(start, 300.0)


@pytest.mark.acceptance(5, "mean-value bracketing")
def test_mean_value_bracketing():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        for sp in _stable_symmetric(rng, 50, s=(0.01, 1.0), lp=(0.0, 0.99)):
            b = queue_bounds(sp)
            L = truncated_stationary(sp.embed(), max_N=512).stats.mean_q1
            assert b.L_low - 1e-6 <= L <= b.L_up + 1e-6, sp
            assert b.gap > 0, sp
        no_signals = _stable_symmetric(rng, 10, s=(0.0, 0.0))
        pure_triggers = _stable_symmetric(rng, 10, s=(0.01, 1.0), lp=(1.0, 1.0))
        gaps = {
            "s=0": [queue_bounds(sp).gap for sp in no_signals],
            "l-=0": [queue_bounds(sp).gap for sp in pure_triggers],
        }
    failing = {k: max(v) for k, v in gaps.items() if max(abs(g) for g in v) > 1e-12}
    assert not failing, f"nonzero gap where zero is required: {failing}"
    _within_budget(start, 300.0)


@pytest.mark.acceptance(6, "dominant-system empty probability")
def test_dominant_empty_probability():
    start = time.perf_counter()
    rng = np.random.default_rng(606)
    settings = [("R1", ModelParams(0.05, 0.1, 0.5, 0.5, 0.1, 0.1, 0.0, 1.0, 0.0, 1.0))]
    while len(settings) < 10:
        p = _model(rng, lam_max=0.3)
        dom = "R1" if len(settings) % 2 else "R2"
        try:
            r = dominant_rates(p, dom)
        except SaturatedCompanionError:
            continue
        if r.p_empty_other > 0.05:
            settings.append((dom, p))
    worked = dominant_rates(*settings[0][::-1])
    assert worked.p_empty_other == pytest.approx(0.3388, abs=5e-5)
    for i, (dom, p) in enumerate(settings):
        want = dominant_rates(p, dom).p_empty_other
        sim = simulate_dominant(p, dom, 10**6, seed=2000 + i)
        field = "p_empty2" if dom == "R1" else "p_empty1"
        assert abs(getattr(sim, field) - want) < 3 * sim.se[field], (dom, p)
    _within_budget(start, 120.0)


@pytest.mark.acceptance(7, "boundary value solution end to end")
def test_bvp_end_to_end():
    start = time.perf_counter()
    rng = np.random.default_rng(707)
    points = _stable_symmetric(rng, 10, lam=(0.02, 0.25), alpha=(0.2, 0.8), s=(0.1, 0.5),
                               lp=(0.0, 0.8))
    for sp in points:
        sol = solve_riemann(sp)
        assert sol.chi == 1
        assert sol.grid.kernel_residual < 1e-8
        assert sol.boundary_residual() < 1e-6
        orc = truncated_stationary(sp.embed(), max_N=512)
        assert sol.pi00 == pytest.approx(orc.pi00, abs=1e-3)
        assert sol.L_exact == pytest.approx(orc.stats.mean_q1, abs=1e-3)
        finer = solve_riemann(sp, M=2 * len(sol.grid.z))
        for k in ("c0", "c1", "pi00", "pi10", "pi1_10", "L_exact"):
            assert getattr(finer, k) == pytest.approx(getattr(sol, k), abs=1e-6), (sp, k)
    _within_budget(start, 600.0)


@pytest.mark.acceptance(8, "qualitative figure trends")
def test_figure_trends():
    start = time.perf_counter()
    problems = []
    for lp in (0.2, 0.4):
        grids = {}
        for s in (0.1, 0.2):
            p = ModelParams(0, 0, 0.5, 0.5, s, s, 1 - lp, lp, 1 - lp, lp)
            grids[s] = region_closure(p, "stability", 101, 101)[1]
        lost = int(np.sum(grids[0.1] & ~grids[0.2]))
        if lost:
            problems.append(f"l+={lp}: {lost} points of the s=0.1 closure lie outside s=0.2")
    ragn = SymmetricParams.make(0.1, 0.6, 0.1, 1.0)
    aloha = ragn.replace(s=0.0)
    for lam in np.linspace(0.01, 0.2, 20):
        a, r = aloha.replace(lam=lam), ragn.replace(lam=lam)
        if not (symmetric_stability(a)[0] and symmetric_stability(r)[0]):
            continue
        La = truncated_stationary(a.embed(), max_N=512).stats.mean_q1
        Lr = truncated_stationary(r.embed(), max_N=512).stats.mean_q1
        if Lr > La:
            problems.append(f"lambda={lam:.3f}: signalled {Lr:.4f} > plain {La:.4f}")
    assert not problems, "; ".join(problems)
    _within_budget(start, 300.0)
