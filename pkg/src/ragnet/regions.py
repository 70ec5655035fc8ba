"""Stability and stable-throughput regions for a fixed transmission vector.

Margins follow one convention throughout: left side minus right side of a
strict inequality, so a negative margin means the condition holds.  Region
membership is strict; points within ``BOUNDARY_TOL`` of a boundary are
reported as non-members with ``boundary=True``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import ModelParams

BOUNDARY_TOL = 1e-12


class SaturatedCompanionError(ValueError):
    """The non-dominant queue of a dominant system is itself unstable."""


class IndeterminateDriftError(ValueError):
    pass


@dataclass(frozen=True)
class RegionVerdict:
    member: bool
    via: str  # "R1", "R2", "both" or "none"
    margins: tuple  # (sub-region 1 first, second, sub-region 2 first, second)
    boundary: bool


@dataclass(frozen=True)
class DominantRates:
    mu1: float
    mu2: float
    m1: float
    m2: float
    lambda1_int: float
    lambda2_int: float
    p_empty_other: float


@dataclass(frozen=True)
class DriftClassification:
    mu3: float
    nu3: float
    mu1d: float
    nu1d: float
    mu2d: float
    nu2d: float
    r1: float
    r2: float
    verdict: str  # "positive-recurrent", "null-recurrent" or "transient"


def _comp(x):
    return 1.0 - x


def dominant_rates(params: ModelParams, dominant: str = "R1") -> DominantRates:
    """Removal, service and internal-arrival probabilities of a dominant system.

    In system ``R1`` queue 1 never idles, so queue 2 is served at the
    constant probability ``m2`` and its empty probability is available in
    closed form; queue 1's rates follow from it.
    """
    if dominant == "R2":
        r = dominant_rates(params.swapped(), "R1")
        return DominantRates(r.mu2, r.mu1, r.m2, r.m1, r.lambda2_int, r.lambda1_int,
                             r.p_empty_other)
    if dominant != "R1":
        raise ValueError(f"dominant must be R1 or R2, got {dominant!r}")
    p = params
    sb1, sb2 = _comp(p.s1), _comp(p.s2)
    ab1, ab2 = _comp(p.alpha1), _comp(p.alpha2)
    m2 = p.alpha2 * sb2 * ab1 * sb1 + p.s2
    load2 = p.lambda2 + p.s1 * p.l1_plus
    if not load2 < m2:
        raise SaturatedCompanionError(
            f"saturated companion queue: lambda2+s1*l1_plus={load2:.6g} >= m2={m2:.6g}"
        )
    busy2 = load2 / m2
    empty2 = 1.0 - busy2
    m1 = p.alpha1 * sb1 * (empty2 + busy2 * ab2 * sb2) + p.s1
    mu1 = p.alpha1 * empty2 * sb1 + p.alpha1 * busy2 * sb1 * ab2 * sb2 + p.s1 * p.l1_plus
    mu2 = p.alpha2 * sb2 * ab1 * sb1 + p.s2 * p.l2_plus
    return DominantRates(
        mu1=mu1,
        mu2=mu2,
        m1=m1,
        m2=m2,
        lambda1_int=p.s2 * p.l2_plus * busy2,
        lambda2_int=p.s1 * p.l1_plus,
        p_empty_other=empty2,
    )


# ---------------------------------------------------------------------------
# margins, vectorised over arrival rates


def _safe_div(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return out


def _margins_sub1(l1, l2, p: ModelParams, throughput: bool):
    """Margins of sub-region 1 (queue 1 dominant) at arrays ``l1``, ``l2``."""
    sb1, sb2 = _comp(p.s1), _comp(p.s2)
    ab1, ab2 = _comp(p.alpha1), _comp(p.alpha2)
    m2 = p.alpha2 * sb2 * ab1 * sb1 + p.s2
    load2 = l2 + p.s1 * p.l1_plus
    coupling = p.s2 * p.l2_plus + p.alpha1 * sb1 * (1.0 - ab2 * sb2)
    first_rhs = p.alpha1 * sb1 + (p.s1 * p.l1_plus if throughput else p.s1)
    second_rhs = p.alpha2 * sb2 * ab1 * sb1 + (p.s2 * p.l2_plus if throughput else p.s2)
    first = l1 + _safe_div(load2 * coupling, np.full_like(load2, m2)) - first_rhs
    if m2 == 0:
        first = np.full_like(load2, np.inf)
    second = load2 - second_rhs
    return first, second


def region_margins(lambda1, lambda2, params: ModelParams, which: str = "stability"):
    """The four margins as arrays broadcast over ``lambda1`` and ``lambda2``."""
    if which not in ("stability", "throughput"):
        raise ValueError(f"unknown region {which!r}")
    throughput = which == "throughput"
    l1, l2 = np.broadcast_arrays(np.asarray(lambda1, dtype=float),
                                 np.asarray(lambda2, dtype=float))
    a, b = _margins_sub1(l1, l2, params, throughput)
    c, d = _margins_sub1(l2, l1, params.swapped(), throughput)
    return a, b, c, d


def membership(lambda1, lambda2, params: ModelParams, which: str = "stability"):
    """Boolean array of strict membership (vectorised ``in_*_region``)."""
    a, b, c, d = region_margins(lambda1, lambda2, params, which)
    t = -BOUNDARY_TOL
    return ((a < t) & (b < t)) | ((c < t) & (d < t))


def _verdict(lambda1, lambda2, params, which) -> RegionVerdict:
    margins = tuple(float(m) for m in region_margins(lambda1, lambda2, params, which))
    t = -BOUNDARY_TOL
    in1 = margins[0] < t and margins[1] < t
    in2 = margins[2] < t and margins[3] < t
    via = "both" if in1 and in2 else "R1" if in1 else "R2" if in2 else "none"
    boundary = any(abs(m) < BOUNDARY_TOL for m in margins)
    return RegionVerdict(member=in1 or in2, via=via, margins=margins, boundary=boundary)


def in_stability_region(lambda1: float, lambda2: float, params: ModelParams) -> RegionVerdict:
    """Membership of ``(lambda1, lambda2)`` in the stability region.

    ``params`` supplies everything except the arrival rates; its own
    ``lambda1``/``lambda2`` are ignored.
    """
    return _verdict(lambda1, lambda2, params, "stability")


def in_throughput_region(lambda1: float, lambda2: float, params: ModelParams) -> RegionVerdict:
    """Membership in the stable-throughput region (same conventions)."""
    return _verdict(lambda1, lambda2, params, "throughput")


def classify_drift(lambda1: float, lambda2: float, params: ModelParams) -> DriftClassification:
    """Ergodicity of the queue process from its interior and axis drifts.

    ``mu3 - 1`` and ``nu3 - 1`` are the interior drifts of queues 1 and 2;
    ``mu1d - 1``, ``nu1d`` the drifts on the axis where queue 2 is empty and
    ``mu2d``, ``nu2d - 1`` those on the axis where queue 1 is empty.  ``r1``
    (``r2``) is the mean drift of queue 1 (2) when the other queue is
    recurrent near that axis, scaled by ``1/(1 - nu3)`` (``1/(1 - mu3)``).
    """
    p = params.replace(lambda1=lambda1, lambda2=lambda2)
    sb1, sb2 = _comp(p.s1), _comp(p.s2)
    ab1, ab2 = _comp(p.alpha1), _comp(p.alpha2)
    mu3 = lambda1 + p.s2 * p.l2_plus + 1.0 - (p.s1 + sb1 * sb2 * p.alpha1 * ab2)
    nu3 = lambda2 + p.s1 * p.l1_plus + 1.0 - (p.s2 + sb1 * sb2 * p.alpha2 * ab1)
    mu1d = lambda1 + sb1 * ab1
    nu1d = lambda2 + p.s1 * p.l1_plus
    mu2d = lambda1 + p.s2 * p.l2_plus
    nu2d = lambda2 + sb2 * ab2
    r1 = mu1d - 1.0 - nu1d * (1.0 - mu3) / (1.0 - nu3) if nu3 != 1.0 else float("nan")
    r2 = nu2d - 1.0 - mu2d * (1.0 - nu3) / (1.0 - mu3) if mu3 != 1.0 else float("nan")

    def by_sign(r):
        if np.isnan(r):
            raise IndeterminateDriftError("indeterminate: zero drift denominator")
        if r < 0:
            return "positive-recurrent"
        return "null-recurrent" if r == 0 else "transient"

    if mu3 < 1.0 and nu3 < 1.0:
        if r1 < 0 and r2 < 0:
            verdict = "positive-recurrent"
        elif r1 > 0 or r2 > 0:
            verdict = "transient"
        else:
            verdict = "null-recurrent"
    elif mu3 < 1.0:
        verdict = by_sign(r2)
    elif nu3 < 1.0:
        verdict = by_sign(r1)
    elif mu3 == 1.0 and nu3 == 1.0:
        verdict = "null-recurrent"
    else:
        verdict = "transient"
    return DriftClassification(mu3, nu3, mu1d, nu1d, mu2d, nu2d, r1, r2, verdict)


# ---------------------------------------------------------------------------
# boundary tracing and closure


def _bisect_edge(inside, lo, hi, tol=1e-10):
    """Largest x in [lo, hi] with inside(x), given inside(lo) and monotonicity."""
    if inside(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def trace_boundary(params: ModelParams, which: str = "stability", resolution: int = 101,
                   lambda_max: float = 1.0):
    """Outer boundary of the region as ``resolution`` points ordered by lambda2.

    For each lambda2 on a uniform grid up to the largest admissible lambda2,
    the edge in lambda1 is located by bisection.  Membership along lambda1
    is an interval starting at zero, since every margin increases in it.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")

    def member(l1, l2):
        return bool(membership(l1, l2, params, which))

    if not member(0.0, 0.0):
        return np.empty((0, 2))
    top = _bisect_edge(lambda l2: member(0.0, l2), 0.0, lambda_max)
    pts = []
    for l2 in np.linspace(0.0, top, resolution):
        # the top point itself sits on the boundary and fails strict membership
        if not member(0.0, l2):
            pts.append((0.0, l2))
            continue
        pts.append((_bisect_edge(lambda l1: member(l1, l2), 0.0, lambda_max), l2))
    return np.array(pts)


def alpha_grid(resolution: int) -> np.ndarray:
    """Open-interval grid ``{1/(G+1), ..., G/(G+1)}``."""
    return np.arange(1, resolution + 1) / (resolution + 1.0)


def region_closure(params: ModelParams, which: str = "stability", alpha_resolution: int = 101,
                   lambda_resolution: int = 101, lambda_max: float = 1.0):
    """Membership grid of the union of regions over all transmission vectors.

    Returns ``(lambdas, grid)`` where ``grid[i, j]`` is True when
    ``(lambdas[j], lambdas[i])`` (lambda1 along columns) lies in the region
    for some ``(alpha1, alpha2)`` on the open grid.  The alpha fields of
    ``params`` are ignored.
    """
    if alpha_resolution < 2 or lambda_resolution < 2:
        raise ValueError("resolutions must be at least 2")
    lambdas = np.linspace(0.0, lambda_max, lambda_resolution)
    L1, L2 = np.meshgrid(lambdas, lambdas)
    grid = np.zeros_like(L1, dtype=bool)
    for a1 in alpha_grid(alpha_resolution):
        for a2 in alpha_grid(alpha_resolution):
            grid |= membership(L1, L2, params.replace(alpha1=a1, alpha2=a2), which)
    return lambdas, grid


def closure_boundary(lambdas, grid):
    """Largest member lambda1 per lambda2 row (NaN for empty rows)."""
    edge = np.full(len(lambdas), np.nan)
    for i, row in enumerate(grid):
        if row.any():
            edge[i] = lambdas[np.nonzero(row)[0].max()]
    return edge


CSV_COLUMNS = ("lambda1", "lambda2", "member", "via", "margin1", "margin2", "margin3",
               "margin4", "verdict")


def verdict_rows(points, params: ModelParams, which: str = "stability"):
    """CSV-ready rows for a list of ``(lambda1, lambda2)`` points."""
    check = in_stability_region if which == "stability" else in_throughput_region
    rows = []
    for l1, l2 in points:
        v = check(l1, l2, params)
        try:
            drift = classify_drift(l1, l2, params).verdict
        except IndeterminateDriftError:
            drift = "indeterminate"
        rows.append([l1, l2, v.member, v.via, *v.margins, drift])
    return rows


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()
