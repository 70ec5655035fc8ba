"""Mean-value relations and queue-length bounds for the symmetric system.

Notation used below, with ``sb = 1 - s`` and ``ab = 1 - alpha``:

``c = sb**2 * alpha * ab``
    Probability that a given user succeeds when both are busy.
``m = s + c``
    Removal probability of a busy user when the other is busy.
``den = m - lam - s*l_plus``
    Net interior drift towards the origin; positive inside the region.
``Pbb``
    Stationary probability that both queues are busy.

The exact expected queue length follows from two mean-value identities,
one from the marginal of queue 1 and one from the total ``Q1 + Q2``.
Together they leave a single unknown, ``Pbb``, and the explicit bounds are
the extreme values over its admissible range.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chain import SimStats, StationarySolution
from .model import ModelParams, SymmetricParams

NEAR_SINGULAR = 1e-6


class UnstableError(ValueError):
    pass


class NearSingularWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class MeanValueBounds:
    L_low: float
    L_up: float
    S_term: float
    W0: float
    W1: float
    stable: bool
    transfer_closure: str = "exact"
    near_singular: bool = False

    @property
    def gap(self) -> float:
        return self.L_up - self.L_low


@dataclass(frozen=True)
class PiEstimates:
    """Boundary probabilities of the symmetric stationary distribution.

    ``pi10`` is ``P(Q2 = 0)`` (equal to ``P(Q1 = 0)`` by symmetry),
    ``pi00`` is ``P(Q1 = Q2 = 0)`` and ``pi1_10`` is ``E[Q1; Q2 = 0]``.
    """

    pi00: float
    pi10: float
    pi1_10: float
    p_both_busy: float | None = None

    def __post_init__(self):
        if self.p_both_busy is None:
            object.__setattr__(self, "p_both_busy", 1.0 - 2.0 * self.pi10 + self.pi00)

    @classmethod
    def from_solution(cls, sol: StationarySolution) -> "PiEstimates":
        # average the two mirror images to cancel asymmetric rounding
        return cls(
            pi00=sol.pi00,
            pi10=0.5 * (sol.pi10 + sol.pi01),
            pi1_10=0.5 * (sol.pi1_10 + float(np.arange(sol.N + 1) @ sol.distribution[0, :])),
            p_both_busy=sol.stats.p_both_busy,
        )

    @classmethod
    def from_stats(cls, stats: SimStats) -> "PiEstimates":
        """Estimates available from simulation; ``pi1_10`` is not, so NaN."""
        return cls(
            pi00=stats.p_both_empty,
            pi10=0.5 * (stats.p_empty1 + stats.p_empty2),
            pi1_10=float("nan"),
            p_both_busy=stats.p_both_busy,
        )


class _Sym(NamedTuple):
    lam: float
    alpha: float
    s: float
    lm: float
    lp: float
    sb: float
    c: float
    m: float
    den: float


def _sym(params: SymmetricParams) -> _Sym:
    sb = 1.0 - params.s
    c = sb * sb * params.alpha * (1.0 - params.alpha)
    m = params.s + c
    den = m - params.lam - params.s * params.l_plus
    return _Sym(params.lam, params.alpha, params.s, params.l_minus, params.l_plus, sb, c, m, den)


def symmetric_stability(params: SymmetricParams):
    """Both symmetric stability conditions, evaluated literally.

    Returns ``(stable, margins)``; each margin is left side minus right
    side, so the system is stable iff both are negative.
    """
    v = _sym(params)
    load = v.lam + v.s * v.lp
    first = load - v.m
    if v.m > 0:
        rho = load / v.m
        second = v.lam + v.s * v.lp * rho - ((v.s + v.sb * v.alpha) * (1.0 - rho) + rho * v.m)
    else:
        second = float("inf")
    return (first < 0 and second < 0), (first, second)


def _check(params: SymmetricParams) -> _Sym:
    stable, margins = symmetric_stability(params)
    if not stable:
        raise UnstableError(f"unstable: margins {margins[0]:.6g}, {margins[1]:.6g}")
    v = _sym(params)
    if v.den < NEAR_SINGULAR:
        warnings.warn(f"near-singular: interior drift {v.den:.3g}", NearSingularWarning,
                      stacklevel=3)
    return v


def _coefficients(v: _Sym):
    """Coefficients shared by the mean-value identities."""
    D = v.c - v.sb * v.alpha - v.s * v.lp  # Pi1(1,0) coefficient, queue-1 marginal
    K = 2.0 * v.c - v.sb * v.alpha + v.s * v.lm  # Pi1(1,0) coefficient, total queue
    X = 2.0 * v.lam - 3.0 * v.lam**2
    A = v.sb * v.alpha - 2.0 * v.c - v.s * v.lm
    B = v.c - v.sb * v.alpha
    return D, K, X, A, B


def w_coefficients(params: SymmetricParams):
    """``(W0, W1)`` of the constant-free marginal relation.

    With them ``L = D/den * Pi1(1,0) + W1 * Pi(1,0) + W0 * Pi(0,0)``.
    """
    v = _sym(params)
    _, _, _, A, B = _coefficients(v)
    lead = v.lam * (1.0 - v.lam) + v.s * v.lp * v.sb
    den2 = np.float64(v.den) ** 2
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        W1 = (v.s * v.lp * (1.0 - 2.0 * v.sb) * v.den - lead * A) / den2
        W0 = (v.s * v.lp * (v.sb - 1.0) * v.den - lead * B) / den2
    return float(W0), float(W1)


def _l_of_pbb(v: _Sym, pbb, tau):
    """Eliminate Pi1(1,0) between the two identities; linear in ``pbb``."""
    D, K, X, _, _ = _coefficients(v)
    num = D * (X + (v.s * v.lm) ** 2 * pbb) - 2.0 * K * (v.lam * (1.0 - v.lam) + tau)
    # float64 so an underflowed denominator yields inf/nan, not an exception
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.float64(num) / (-2.0 * (v.s + v.sb * v.alpha + v.s * v.lp) * v.den)


def _exact_tau(v: _Sym, pbb):
    # P(Q1 > 0, Q2 = 0) follows from Pbb through the boundary flow identity
    u = (v.lam - (v.c + v.s * v.lm) * pbb) / (v.sb * v.alpha + v.s * v.lm)
    return v.s * v.lp * (v.sb * pbb + u)


def pbb_range(params: SymmetricParams):
    """Admissible interval for ``P(both busy)``.

    Besides ``0 <= Pbb <= 1`` it enforces ``P(Q1>0, Q2=0) >= 0`` and
    ``P(Q1=Q2=0) >= 0`` once the boundary identity fixes them from Pbb.
    """
    v = _sym(params)
    lo, hi = 0.0, 1.0
    r = v.sb * v.alpha + v.s * v.lm
    if r <= 0:
        return lo, hi
    # u >= 0
    if v.c + v.s * v.lm > 0:
        hi = min(hi, v.lam / (v.c + v.s * v.lm))
    # q = 1 - Pbb - 2u >= 0, linear in Pbb with slope K/r
    _, K, _, _, _ = _coefficients(v)
    const = 1.0 - 2.0 * v.lam / r
    slope = K / r
    if slope > 0:
        lo = max(lo, -const / slope)
    elif slope < 0:
        hi = min(hi, -const / slope)
    elif const < 0:
        hi = lo - 1.0
    if lo > hi:
        raise UnstableError("no admissible P(both busy); parameters inconsistent")
    return lo, hi


def queue_bounds(params: SymmetricParams, transfer_closure: str = "exact") -> MeanValueBounds:
    """Explicit lower and upper bounds for the expected queue length per user.

    Parameters
    ----------
    params : SymmetricParams
        Must satisfy :func:`symmetric_stability`.
    transfer_closure : {"exact", "dominant"}
        How the triggering-signal transfer rate is expressed.  ``"exact"``
        writes it through ``Pbb`` and bounds ``Pbb`` by :func:`pbb_range`;
        these bounds always contain the true value.  ``"dominant"`` uses the
        rate of the dominant system, ``s*l_plus*rho``, and lets ``Pbb`` range
        over ``[0, 1]``.  It is exact only when ``s*l_plus = 0`` and is kept
        for comparison with that simpler closed form.

    Returns
    -------
    MeanValueBounds
        ``S_term`` is the lower bound and ``W0``, ``W1`` are the coefficients
        from :func:`w_coefficients`.
    """
    v = _check(params)
    if transfer_closure == "exact":
        lo, hi = pbb_range(params)
        ends = [float(_l_of_pbb(v, x, _exact_tau(v, x))) for x in (lo, hi)]
    elif transfer_closure == "dominant":
        tau = v.s * v.lp * (v.lam + v.s * v.lp) / v.m
        ends = [float(_l_of_pbb(v, x, tau)) for x in (0.0, 1.0)]
    else:
        raise ValueError(f"unknown transfer_closure {transfer_closure!r}")
    W0, W1 = w_coefficients(params)
    low, up = min(ends), max(ends)
    return MeanValueBounds(
        L_low=low,
        L_up=up,
        S_term=low,
        W0=W0,
        W1=W1,
        stable=True,
        transfer_closure=transfer_closure,
        near_singular=v.den < NEAR_SINGULAR,
    )


def dominant_gap(params: SymmetricParams) -> float:
    """Closed-form width of the ``"dominant"`` closure bounds."""
    v = _sym(params)
    fac = v.s * v.lp + v.sb * v.alpha - v.c
    return (v.s * v.lm) ** 2 * fac / (2.0 * (v.s + v.sb * v.alpha + v.s * v.lp) * v.den)


class LFromPi(NamedTuple):
    via_w: float  # constant-free marginal relation with W0, W1
    via_marginal: float  # marginal relation with the explicit transfer rate
    via_total: float  # relation for Q1 + Q2, needs p_both_busy


def l_from_pi(pi: PiEstimates, params: SymmetricParams) -> LFromPi:
    """Expected queue length per user from boundary probabilities.

    The first two values use only ``pi00``, ``pi10`` and ``pi1_10`` and
    agree whenever the inputs satisfy the boundary flow identity.  The third
    comes from the total queue and also uses ``p_both_busy``.
    """
    v = _sym(params)
    D, K, X, _, _ = _coefficients(v)
    W0, W1 = w_coefficients(params)
    p, q, P1 = pi.pi10, pi.pi00, pi.pi1_10
    via_w = D / v.den * P1 + W1 * p + W0 * q
    pbb = 1.0 - 2.0 * p + q
    tau = v.s * v.lp * (v.sb * pbb + p - q)
    via_marginal = (v.lam * (1.0 - v.lam) + tau + D * P1) / v.den
    via_total = (X + 2.0 * K * P1 + (v.s * v.lm) ** 2 * pi.p_both_busy) / (4.0 * v.den)
    return LFromPi(via_w, via_marginal, via_total)


def _boundary_probs(stats):
    if isinstance(stats, StationarySolution):
        stats = stats.stats
    # Pi(1,0) = P(Q2 = 0), Pi(0,1) = P(Q1 = 0)
    return stats.p_empty2, stats.p_empty1, stats.p_both_empty, stats.p_both_busy


def flow_residuals(stats, params: ModelParams) -> np.ndarray:
    """Signed residuals of four flow identities at estimated probabilities.

    Entries are, in order: the flow balance of queue 1, that of queue 2,
    the boundary identity of the symmetric system and the transfer balance
    of the symmetric system (transfers into queue 1 minus transfers out).
    The last two are NaN when ``params`` is not symmetric.
    """
    p10, p01, p00, pbb = _boundary_probs(stats)
    p = params
    out = np.full(4, np.nan)
    out[0] = (p.lambda1 + p.s2 * p.l2_plus * (1.0 - p10)) - (
        (p.s1 + (1 - p.s1) * (1 - p.s2) * p.alpha1 * (1 - p.alpha2)) * (1 - p10 - p01 + p00)
        + (p.s1 + (1 - p.s1) * p.alpha1) * (p10 - p00)
    )
    out[1] = (p.lambda2 + p.s1 * p.l1_plus * (1.0 - p01)) - (
        (p.s2 + (1 - p.s1) * (1 - p.s2) * p.alpha2 * (1 - p.alpha1)) * (1 - p10 - p01 + p00)
        + (p.s2 + (1 - p.s2) * p.alpha2) * (p01 - p00)
    )
    if p.is_symmetric():
        v = _sym(SymmetricParams.from_model(p))
        _, _, _, A, B = _coefficients(v)
        pe = 0.5 * (p10 + p01)
        out[2] = A * pe + B * p00 - (v.lam + v.s * v.lp - v.m)
        transfer_in = v.s * v.lp * (v.sb * pbb + (p01 - p00))
        transfer_out = v.s * v.lp * (v.sb * pbb + (p10 - p00))
        out[3] = transfer_in - transfer_out
    return out


def dominant_transfer_residual(stats, params: SymmetricParams) -> float:
    """Transfer balance with the inflow taken from the dominant system.

    Equates ``s*l_plus*rho`` with the actual outflow.  This is not an
    identity of the chain when ``s*l_plus > 0``; it is reported only as a
    diagnostic.
    """
    p10, p01, p00, _ = _boundary_probs(stats)
    v = _sym(params)
    pe = 0.5 * (p10 + p01)
    rho = (v.lam + v.s * v.lp) / v.m
    return v.s * v.lp * rho - (
        v.s * v.sb * v.lp * (1.0 - 2.0 * pe + p00) + v.s * v.lp * (pe - p00)
    )


CSV_COLUMNS = ("x", "L_low", "L_up", "L_oracle")


def bounds_csv(xs, bounds, oracle=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS if oracle is not None else CSV_COLUMNS[:3])
    for i, (x, b) in enumerate(zip(xs, bounds)):
        row = [repr(float(x)), repr(b.L_low), repr(b.L_up)]
        if oracle is not None:
            row.append(repr(float(oracle[i])))
        w.writerow(row)
    return buf.getvalue()
