"""Slot-level dynamics of the two-user queue process.

The chain ``Q_n = (Q1_n, Q2_n)`` evolves in two stages per slot: signals and
transmissions act on the queues present at the start of the slot, then the
slot's Bernoulli arrivals are added (early departure, late arrival).

``step_kernel`` enumerates the first stage exactly.  ``simulate`` samples the
full chain and ``truncated_stationary`` solves it on a finite box; the latter
is the brute-force reference that the closed-form modules are checked
against.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ModelParams

log = logging.getLogger(__name__)


class Event(str, enum.Enum):
    NONE = "none"
    SUCCESS1 = "success1"
    SUCCESS2 = "success2"
    DROP1 = "drop1"
    DROP2 = "drop2"
    TRANSFER1TO2 = "transfer1to2"
    TRANSFER2TO1 = "transfer2to1"
    BOTH_DROP = "both-drop"
    SWAP = "swap"
    COLLISION = "collision"
    IDLE = "idle"
    # both users signal, one transfers and the other deletes
    TRANSFER1TO2_DROP2 = "transfer1to2+drop2"
    TRANSFER2TO1_DROP1 = "transfer2to1+drop1"


class QueueState(NamedTuple):
    q1: int
    q2: int


class Outcome(NamedTuple):
    """One branch of the pre-arrival law.

    ``out_k`` / ``in_k`` are the gross packets leaving / entering queue k, so
    ``delta_k = in_k - out_k``.  The gross split matters only for dominant
    systems, where an empty queue sends dummies.
    """

    delta1: int
    delta2: int
    event: Event
    prob: float
    out1: int = 0
    in1: int = 0
    out2: int = 0
    in2: int = 0


@dataclass(frozen=True)
class SlotDistribution:
    state: QueueState
    outcomes: tuple

    def total(self) -> float:
        return sum(o.prob for o in self.outcomes)

    def by_delta(self) -> dict:
        """Probabilities merged over outcomes with the same queue change."""
        merged: dict = {}
        for o in self.outcomes:
            key = (o.delta1, o.delta2)
            merged[key] = merged.get(key, 0.0) + o.prob
        return merged


def _out(d1, d2, event, prob, out1=0, in1=0, out2=0, in2=0):
    return Outcome(d1, d2, event, prob, out1, in1, out2, in2)


def _interior(p: ModelParams):
    a1, a2 = p.alpha1, p.alpha2
    s1, s2 = p.s1, p.s2
    sb1, sb2 = 1.0 - s1, 1.0 - s2
    ab1, ab2 = 1.0 - a1, 1.0 - a2
    m1, p1, m2, p2 = p.l1_minus, p.l1_plus, p.l2_minus, p.l2_plus
    return [
        _out(0, 0, Event.IDLE, sb1 * sb2 * ab1 * ab2),
        _out(0, 0, Event.COLLISION, sb1 * sb2 * a1 * a2),
        _out(0, 0, Event.SWAP, s1 * s2 * p1 * p2, out1=1, in1=1, out2=1, in2=1),
        _out(-1, 0, Event.SUCCESS1, sb1 * sb2 * a1 * ab2, out1=1),
        _out(-1, 0, Event.DROP1, s1 * sb2 * m1, out1=1),
        # U1 moves a packet to U2 while U2 deletes one
        _out(-1, 0, Event.TRANSFER1TO2_DROP2, s1 * s2 * p1 * m2, out1=1, in2=1, out2=1),
        _out(-1, 1, Event.TRANSFER1TO2, s1 * sb2 * p1, out1=1, in2=1),
        _out(0, -1, Event.SUCCESS2, sb1 * sb2 * a2 * ab1, out2=1),
        _out(0, -1, Event.DROP2, s2 * sb1 * m2, out2=1),
        _out(0, -1, Event.TRANSFER2TO1_DROP1, s1 * s2 * p2 * m1, out2=1, in1=1, out1=1),
        _out(1, -1, Event.TRANSFER2TO1, s2 * sb1 * p2, out2=1, in1=1),
        _out(-1, -1, Event.BOTH_DROP, s1 * s2 * m1 * m2, out1=1, out2=1),
    ]


def _boundary_1(p: ModelParams, global_malfunction: bool):
    """Law when only queue 1 holds packets."""
    a1, s1 = p.alpha1, p.s1
    silent = p.s2 if global_malfunction else 0.0
    quiet = (1.0 - s1) * (1.0 - silent)
    out = [
        _out(-1, 1, Event.TRANSFER1TO2, s1 * p.l1_plus, out1=1, in2=1),
        _out(-1, 0, Event.DROP1, s1 * p.l1_minus, out1=1),
        _out(-1, 0, Event.SUCCESS1, quiet * a1, out1=1),
        _out(0, 0, Event.IDLE, quiet * (1.0 - a1)),
    ]
    if silent:
        out.append(_out(0, 0, Event.IDLE, (1.0 - s1) * silent))
    return out


def _mirror(outcomes):
    swap_event = {
        Event.SUCCESS1: Event.SUCCESS2,
        Event.SUCCESS2: Event.SUCCESS1,
        Event.DROP1: Event.DROP2,
        Event.DROP2: Event.DROP1,
        Event.TRANSFER1TO2: Event.TRANSFER2TO1,
        Event.TRANSFER2TO1: Event.TRANSFER1TO2,
        Event.TRANSFER1TO2_DROP2: Event.TRANSFER2TO1_DROP1,
        Event.TRANSFER2TO1_DROP1: Event.TRANSFER1TO2_DROP2,
    }
    return [
        Outcome(o.delta2, o.delta1, swap_event.get(o.event, o.event), o.prob,
                o.out2, o.in2, o.out1, o.in1)
        for o in outcomes
    ]


def _state_class(q1: int, q2: int) -> int:
    return (q1 > 0) + 2 * (q2 > 0)


def _class_outcomes(cls: int, params: ModelParams, global_malfunction: bool):
    if cls == 0:
        return [_out(0, 0, Event.IDLE, 1.0)]
    if cls == 1:
        return _boundary_1(params, global_malfunction)
    if cls == 2:
        return _mirror(_boundary_1(params.swapped(), global_malfunction))
    return _interior(params)


def step_kernel(state, params: ModelParams, global_malfunction: bool = False) -> SlotDistribution:
    """Exact law of the pre-arrival queue change from ``state``.

    Zero-probability branches are kept so the branch structure is the same
    for every parameter set.  With ``global_malfunction`` a signal raised at
    an empty user still silences the channel for the other user.
    """
    state = QueueState(*state)
    if state.q1 < 0 or state.q2 < 0:
        raise ValueError(f"negative queue length in {state}")
    outcomes = _class_outcomes(_state_class(*state), params, global_malfunction)
    return SlotDistribution(state, tuple(outcomes))


def apply_arrivals(state, deltas, rng=None, arrivals=None, params: ModelParams | None = None):
    """Add the pre-arrival change and the slot's arrivals to ``state``.

    Arrivals are either given explicitly as ``(a1, a2)`` or drawn from
    ``rng`` as independent Bernoulli(lambda_k) variables.
    """
    q1, q2 = state
    d1, d2 = deltas
    if arrivals is None:
        if rng is None or params is None:
            raise ValueError("need either arrivals or rng and params")
        arrivals = (int(rng.random() < params.lambda1), int(rng.random() < params.lambda2))
    a1, a2 = arrivals
    return QueueState(q1 + d1 + a1, q2 + d2 + a2)


# ---------------------------------------------------------------------------
# statistics

_ESTIMATES = (
    "mean_q1",
    "mean_q2",
    "p_empty1",
    "p_empty2",
    "p_both_empty",
    "p_both_busy",
    "throughput1",
    "throughput2",
    "drop_rate1",
    "drop_rate2",
    "transfer_rate_1to2",
    "transfer_rate_2to1",
)

# per-event counts: success1, success2, drop1, drop2, transfer 1->2, transfer 2->1
_EVENT_COUNTS = {
    Event.NONE: (0, 0, 0, 0, 0, 0),
    Event.IDLE: (0, 0, 0, 0, 0, 0),
    Event.COLLISION: (0, 0, 0, 0, 0, 0),
    Event.SUCCESS1: (1, 0, 0, 0, 0, 0),
    Event.SUCCESS2: (0, 1, 0, 0, 0, 0),
    Event.DROP1: (0, 0, 1, 0, 0, 0),
    Event.DROP2: (0, 0, 0, 1, 0, 0),
    Event.BOTH_DROP: (0, 0, 1, 1, 0, 0),
    Event.TRANSFER1TO2: (0, 0, 0, 0, 1, 0),
    Event.TRANSFER2TO1: (0, 0, 0, 0, 0, 1),
    Event.SWAP: (0, 0, 0, 0, 1, 1),
    Event.TRANSFER1TO2_DROP2: (0, 0, 0, 1, 1, 0),
    Event.TRANSFER2TO1_DROP1: (0, 0, 1, 0, 0, 1),
}


@dataclass
class SimStats:
    mean_q1: float = 0.0
    mean_q2: float = 0.0
    p_empty1: float = 0.0
    p_empty2: float = 0.0
    p_both_empty: float = 0.0
    p_both_busy: float = 0.0
    throughput1: float = 0.0
    throughput2: float = 0.0
    drop_rate1: float = 0.0
    drop_rate2: float = 0.0
    transfer_rate_1to2: float = 0.0
    transfer_rate_2to1: float = 0.0
    se: dict = field(default_factory=lambda: {k: 0.0 for k in _ESTIMATES})
    slots: int = 0
    burn_in: int = 0
    seed: int | None = None
    diverged: bool = False
    dominant: str | None = None

    def estimates(self) -> dict:
        return {k: getattr(self, k) for k in _ESTIMATES}

    def to_dict(self) -> dict:
        d = asdict(self)
        se = d.pop("se")
        for k in _ESTIMATES:
            d[f"se_{k}"] = se[k]
        return d


def _batch_se(series: np.ndarray, batches: int) -> float:
    n = len(series) // batches
    if n < 2 or batches < 2:
        return float(np.std(series) / np.sqrt(max(len(series), 1)))
    means = series[: n * batches].reshape(batches, n).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(batches))


def _stats_from_series(q1, q2, counts, batches) -> SimStats:
    """Point estimates and batch-means standard errors from per-slot data."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    series = {
        "mean_q1": q1,
        "mean_q2": q2,
        "p_empty1": (q1 == 0).astype(float),
        "p_empty2": (q2 == 0).astype(float),
        "p_both_empty": ((q1 == 0) & (q2 == 0)).astype(float),
        "p_both_busy": ((q1 > 0) & (q2 > 0)).astype(float),
    }
    names = ("throughput1", "throughput2", "drop_rate1", "drop_rate2",
             "transfer_rate_1to2", "transfer_rate_2to1")
    for i, name in enumerate(names):
        series[name] = counts[:, i].astype(float)
    stats = SimStats()
    for name, values in series.items():
        setattr(stats, name, float(values.mean()) if len(values) else 0.0)
        stats.se[name] = _batch_se(values, batches) if len(values) else 0.0
    return stats


# ---------------------------------------------------------------------------
# simulation


def _tables(params, global_malfunction):
    """Per state class: cumulative probabilities and outcome data arrays."""
    tables = []
    for cls in range(4):
        outcomes = [o for o in _class_outcomes(cls, params, global_malfunction) if o.prob > 0]
        probs = np.array([o.prob for o in outcomes])
        cum = np.cumsum(probs)
        cum[-1] = 1.0 + 1e-9  # guard against rounding at u close to 1
        gross = [(o.out1, o.in1, o.out2, o.in2) for o in outcomes]
        counts = [_EVENT_COUNTS[o.event] for o in outcomes]
        tables.append((cum.tolist(), gross, counts, outcomes))
    return tables


def _run_chain(params, slots, burn_in, rng, dominant=None, global_malfunction=False):
    """Run the chain from (0, 0); return post-burn-in per-slot records."""
    from bisect import bisect_right

    tables = _tables(params, global_malfunction)
    dom1 = dominant == "R1"
    dom2 = dominant == "R2"
    u = rng.random(slots)
    arr1 = (rng.random(slots) < params.lambda1).tolist()
    arr2 = (rng.random(slots) < params.lambda2).tolist()
    u = u.tolist()
    keep = slots - burn_in
    rec_q1 = [0] * keep
    rec_q2 = [0] * keep
    rec_c = [None] * keep
    q1 = q2 = 0
    for t in range(slots):
        busy1 = q1 > 0 or dom1
        busy2 = q2 > 0 or dom2
        cum, gross, counts, _ = tables[busy1 + 2 * busy2]
        k = bisect_right(cum, u[t])
        out1, in1, out2, in2 = gross[k]
        c = counts[k]
        if q1 == 0 and out1:
            # dummy packet: nothing leaves, its success/drop is not counted
            out1 = 0
            c = (0, c[1], 0, c[3], c[4], c[5])
        if q2 == 0 and out2:
            out2 = 0
            c = (c[0], 0, c[2], 0, c[4], c[5])
        if t >= burn_in:
            i = t - burn_in
            rec_q1[i] = q1
            rec_q2[i] = q2
            rec_c[i] = c
        q1 += in1 - out1 + arr1[t]
        q2 += in2 - out2 + arr2[t]
    return rec_q1, rec_q2, np.array(rec_c, dtype=np.int8).reshape(keep, 6)


def _diverged(q1, q2) -> bool:
    for q in (np.asarray(q1, dtype=float), np.asarray(q2, dtype=float)):
        if len(q) < 10:
            continue
        tail = q[-(len(q) // 10):].mean()
        if tail <= 50.0:
            continue
        # linear growth from zero caps tail/overall at 1.9, so the first
        # half is used as a second reference (ratio 3.8 under linear growth)
        if tail > 2.0 * q.mean() or tail > 2.0 * q[: len(q) // 2].mean():
            return True
    return False


def simulate(
    params: ModelParams,
    slots: int,
    burn_in: int = 0,
    seed: int = 0,
    *,
    batches: int = 50,
    global_malfunction: bool = False,
    dominant: str | None = None,
) -> SimStats:
    """Estimate stationary quantities from one run started at (0, 0).

    Rates are per slot.  Standard errors come from ``batches`` batch means of
    the post-burn-in record.  The run is reproducible for a fixed ``seed``.
    """
    slots = int(slots)
    burn_in = int(burn_in)
    if not slots > burn_in >= 0:
        raise ValueError("need slots > burn_in >= 0")
    if dominant not in (None, "R1", "R2"):
        raise ValueError(f"dominant must be R1 or R2, got {dominant!r}")
    rng = np.random.default_rng(seed)
    q1, q2, counts = _run_chain(params, slots, burn_in, rng, dominant, global_malfunction)
    stats = _stats_from_series(q1, q2, counts, batches)
    stats.slots = slots
    stats.burn_in = burn_in
    stats.seed = seed
    stats.dominant = dominant
    stats.diverged = _diverged(q1, q2)
    if stats.diverged:
        log.warning("queue growth detected; parameters are likely unstable")
    return stats


def simulate_dominant(
    params: ModelParams,
    dominant: str,
    slots: int,
    seed: int = 0,
    burn_in: int | None = None,
    **kwargs,
) -> SimStats:
    """Simulate the dominant system in which queue ``dominant`` never idles.

    When that queue is empty it still signals and transmits as if it held a
    packet; such dummy packets neither leave the queue nor count towards its
    throughput or drops.  A dummy moved by a triggering signal arrives at the
    other queue as a real packet.
    """
    if dominant not in ("R1", "R2"):
        raise ValueError(f"dominant must be R1 or R2, got {dominant!r}")
    if burn_in is None:
        burn_in = int(slots) // 20
    return simulate(params, slots, burn_in, seed, dominant=dominant, **kwargs)


# ---------------------------------------------------------------------------
# truncated-chain oracle


class TruncationError(RuntimeError):
    pass


@dataclass
class StationarySolution:
    N: int
    distribution: np.ndarray  # shape (N+1, N+1), indexed [q1, q2]
    tail_mass: float
    clamped1: float
    clamped2: float
    residual: float
    stats: SimStats

    def to_dict(self) -> dict:
        d = self.stats.to_dict()
        d.update(N=self.N, tail_mass=self.tail_mass, residual=self.residual)
        return d

    @property
    def pi00(self) -> float:
        return float(self.distribution[0, 0])

    @property
    def pi10(self) -> float:
        """P(Q2 = 0), the pgf evaluated at x = 1, y = 0."""
        return float(self.distribution[:, 0].sum())

    @property
    def pi01(self) -> float:
        return float(self.distribution[0, :].sum())

    @property
    def pi1_10(self) -> float:
        """E[Q1; Q2 = 0], the x-derivative of the pgf at (1, 0)."""
        n = self.distribution.shape[0]
        return float(np.arange(n) @ self.distribution[:, 0])


def _transition_matrix(params, N, global_malfunction):
    n = N + 1
    idx = np.arange(n * n)
    I, J = np.divmod(idx, n)
    cls = (I > 0).astype(int) + 2 * (J > 0).astype(int)
    lam1, lam2 = params.lambda1, params.lambda2
    arrivals = [
        (0, 0, (1 - lam1) * (1 - lam2)),
        (1, 0, lam1 * (1 - lam2)),
        (0, 1, (1 - lam1) * lam2),
        (1, 1, lam1 * lam2),
    ]
    rows, cols, vals = [], [], []
    clamp1 = np.zeros(n * n)
    clamp2 = np.zeros(n * n)
    for c in range(4):
        mask = cls == c
        src = idx[mask]
        i0, j0 = I[mask], J[mask]
        merged = {}
        for o in _class_outcomes(c, params, global_malfunction):
            if o.prob > 0:
                merged[(o.delta1, o.delta2)] = merged.get((o.delta1, o.delta2), 0.0) + o.prob
        for (d1, d2), p in merged.items():
            for a1, a2, pa in arrivals:
                w = p * pa
                if w == 0.0:
                    continue
                ti = i0 + d1 + a1
                tj = j0 + d2 + a2
                over1 = np.maximum(ti - N, 0)
                over2 = np.maximum(tj - N, 0)
                clamp1[src] += w * over1
                clamp2[src] += w * over2
                rows.append(src)
                cols.append(np.minimum(ti, N) * n + np.minimum(tj, N))
                vals.append(np.full(len(src), w))
    P = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    )
    return P, clamp1, clamp2


def _solve_stationary(P, tol, max_iter):
    """Solve pi P = pi, sum(pi) = 1: sparse LU, then power-iteration polish."""
    size = P.shape[0]
    # drop one balance equation and pin pi[0] = 1; a dense normalisation row
    # would wreck the sparsity of the factors
    keep = np.ones(size)
    keep[0] = 0.0
    A = sp.diags(keep) @ (P.T - sp.identity(size, format="csr"))
    A = (A + sp.csr_matrix(([1.0], ([0], [0])), shape=(size, size))).tocsc()
    b = np.zeros(size)
    b[0] = 1.0
    pi = spla.splu(A, permc_spec="MMD_AT_PLUS_A").solve(b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    PT = P.T.tocsr()
    residual = np.abs(PT @ pi - pi).sum()
    it = 0
    while residual > tol and it < max_iter:
        pi = PT @ pi
        pi /= pi.sum()
        residual = np.abs(PT @ pi - pi).sum()
        it += 1
    return pi, float(residual)


def _stats_from_distribution(dist, params, global_malfunction) -> SimStats:
    n = dist.shape[0]
    k = np.arange(n)
    stats = SimStats()
    stats.mean_q1 = float(k @ dist.sum(axis=1))
    stats.mean_q2 = float(k @ dist.sum(axis=0))
    stats.p_empty1 = float(dist[0, :].sum())
    stats.p_empty2 = float(dist[:, 0].sum())
    stats.p_both_empty = float(dist[0, 0])
    stats.p_both_busy = float(dist[1:, 1:].sum())
    mass = {
        1: float(dist[1:, 0].sum()),
        2: float(dist[0, 1:].sum()),
        3: float(dist[1:, 1:].sum()),
    }
    rates = np.zeros(6)
    for c, w in mass.items():
        for o in _class_outcomes(c, params, global_malfunction):
            rates += w * o.prob * np.array(_EVENT_COUNTS[o.event])
    (stats.throughput1, stats.throughput2, stats.drop_rate1, stats.drop_rate2,
     stats.transfer_rate_1to2, stats.transfer_rate_2to1) = map(float, rates)
    return stats


def truncated_stationary(
    params: ModelParams,
    N: int = 64,
    *,
    tail_tol: float = 1e-8,
    max_N: int = 512,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    global_malfunction: bool = False,
) -> StationarySolution:
    """Stationary law of the chain restricted to ``{0..N}^2``.

    Increments that would leave the box are clamped to ``N``.  ``tail_mass``
    is the expected number of packets lost to clamping per slot; the box is
    doubled until it falls below ``tail_tol`` or ``max_N`` is reached.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    while True:
        P, clamp1, clamp2 = _transition_matrix(params, N, global_malfunction)
        pi, residual = _solve_stationary(P, tol, max_iter)
        c1, c2 = float(pi @ clamp1), float(pi @ clamp2)
        tail = c1 + c2
        log.debug("truncation N=%d tail_mass=%.3g residual=%.3g", N, tail, residual)
        if tail <= tail_tol or N >= max_N:
            break
        N = min(2 * N, max_N)
    if tail > tail_tol:
        raise TruncationError(
            f"truncation insufficient: tail_mass={tail:.3g} at N={N}"
        )
    dist = pi.reshape(N + 1, N + 1)
    stats = _stats_from_distribution(dist, params, global_malfunction)
    return StationarySolution(N, dist, tail, c1, c2, residual, stats)
