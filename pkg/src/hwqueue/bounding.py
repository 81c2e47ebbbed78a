"""Stochastic-comparison bounding systems and the grid upper bound.

The central object is the netput supremum over lookback windows,

    phi(x, y, z) = sup_{0 <= s <= y} ( A^x(y-s, y) - sum_{i<=z} N_i^x(y-s, y) ),

computed by one backward scan over the pooled event sequence.  A saturated
z-server system started at level z evolves by a Lindley recursion whose value
is exactly z + phi, and the grid bound on P(Q > x) is a Monte Carlo over the
event

    max( 1 + sup_{0<=s<=delta} (A(s) - sum_{i<=eta} N_i(s)),
         sup_{delta<=s<=T} (A(s) - sum_{i<=n} N_i(s)) + sum_{i>eta} N_i(delta) )
      + sum_{i>eta} 1{N_i(delta) = 0}   >   x - eta,

minimized over a (delta, eta) grid.  The steady-state form truncates the
outer supremum at a finite T; estimates carry a "truncated-horizon" label
because a finite-T Monte Carlo can only under-cover sup_{t >= delta}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import estimates
from .distributions import Distribution
from .estimates import BoundEstimate
from .queue_sim import HwConfig, QueueTrace, hw_rate, run_fcfs


@dataclass(frozen=True)
class PhiValue:
    """Nonnegative supremum of the netput over lookback windows."""

    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("phi is a supremum including the empty window, >= 0")

    def __int__(self):
        return self.value


@dataclass
class RenewalPathBundle:
    """One realization of the arrival stream and n service renewal streams.

    The shared substrate for every coupled construction: all bounding systems
    built from one bundle see identical randomness.
    """

    horizon: float
    arrival_times: np.ndarray
    service_times: list
    equilibrium: bool = True

    def __post_init__(self):
        self.arrival_times = np.asarray(self.arrival_times, dtype=float)
        self.service_times = [np.asarray(s, dtype=float) for s in self.service_times]
        for name, ev in [("arrival", self.arrival_times)] + [
            (f"service[{i}]", s) for i, s in enumerate(self.service_times)
        ]:
            if ev.size and ev[0] <= 0.0:
                raise ValueError(f"{name} events must be strictly positive")
            if ev.size > 1 and np.any(np.diff(ev) <= 0.0):
                raise ValueError(f"{name} events must be strictly increasing")

    @property
    def n_streams(self) -> int:
        return len(self.service_times)


def _stream(spec: Distribution, horizon: float, rng, equilibrium: bool) -> np.ndarray:
    mean = spec.moments().mean
    first = float(spec.residual_sample(rng) if equilibrium else spec.sample(rng))
    out = [first]
    t = first
    while t <= horizon:
        size = max(16, int((horizon - t) / mean * 1.2) + 8)
        gaps = np.atleast_1d(spec.sample(rng, size=size))
        ts = t + np.cumsum(gaps)
        out.append(ts)
        t = float(ts[-1])
    events = np.concatenate([np.atleast_1d(np.asarray(o, dtype=float)) for o in out])
    return events[events <= horizon]


def make_bundle(
    spec_A: Distribution,
    spec_S: Distribution,
    n_streams: int,
    horizon: float,
    rng,
    equilibrium: bool = True,
) -> RenewalPathBundle:
    """Sample a fresh bundle; spec_A should already carry any rate scaling."""
    for spec in (spec_A, spec_S):
        if spec.zero_atom > 0.0:
            raise ValueError(
                f"{spec.family} has an atom at zero: bundle streams would tie"
            )
    arr = _stream(spec_A, horizon, rng, equilibrium)
    svc = [_stream(spec_S, horizon, rng, equilibrium) for _ in range(n_streams)]
    return RenewalPathBundle(horizon, arr, svc, equilibrium)


def _window_events(bundle: RenewalPathBundle, x: float, y: float, z: int):
    """Pooled (time, +-1) events on (x, x+y], sorted by time."""
    hi = x + y
    parts_t = []
    parts_d = []
    a = bundle.arrival_times
    sel = a[(a > x) & (a <= hi)]
    parts_t.append(sel)
    parts_d.append(np.ones(sel.size, dtype=np.int64))
    for i in range(z):
        s = bundle.service_times[i]
        sel = s[(s > x) & (s <= hi)]
        parts_t.append(sel)
        parts_d.append(-np.ones(sel.size, dtype=np.int64))
    times = np.concatenate(parts_t)
    deltas = np.concatenate(parts_d)
    order = np.argsort(times, kind="stable")
    return times[order], deltas[order]


def phi(bundle: RenewalPathBundle, x: float, y: float, z: int) -> PhiValue:
    """Backward-scan netput supremum over lookback windows ending at x + y.

    Events sharing a timestamp enter the window together, so suffix sums are
    only evaluated at timestamp-group boundaries (relevant for deterministic
    streams; ties have probability zero for continuous families).
    """
    if x < 0 or y < 0:
        raise ValueError("need x, y >= 0")
    if not (0 <= z <= bundle.n_streams):
        raise ValueError(f"z must lie in [0, {bundle.n_streams}]")
    if x + y > bundle.horizon + 1e-9:
        raise ValueError(
            f"window end {x + y:.6g} beyond bundle horizon {bundle.horizon:.6g}"
        )
    if y == 0:
        return PhiValue(0)
    times, deltas = _window_events(bundle, x, y, z)
    if times.size == 0:
        return PhiValue(0)
    suffix = np.cumsum(deltas[::-1])[::-1]
    group_start = np.empty(times.size, dtype=bool)
    group_start[0] = True
    group_start[1:] = times[1:] > times[:-1]
    best = int(suffix[group_start].max())
    return PhiValue(max(0, best))


def busy_system_path(bundle: RenewalPathBundle, eta: int, horizon: float) -> QueueTrace:
    """Path of the saturated eta-server system started at level eta.

    Arrivals add a job; a pooled service event among streams 1..eta removes a
    job when the level exceeds eta and is absorbed by an artificial arrival
    otherwise.  Equivalent to Skorokhod reflection of the pooled netput walk,
    so the terminal value minus eta equals phi(0, horizon, eta) exactly.
    """
    if not (0 <= eta <= bundle.n_streams):
        raise ValueError(f"eta must lie in [0, {bundle.n_streams}]")
    if horizon > bundle.horizon + 1e-9:
        raise ValueError("horizon beyond bundle horizon")
    times, deltas = _window_events(bundle, 0.0, horizon, eta)
    walk = np.cumsum(deltas)
    runmin = np.minimum.accumulate(np.minimum(walk, 0))
    level = eta + walk - runmin
    artificial = int(-runmin[-1]) if runmin.size else 0
    keep = np.empty(level.size, dtype=bool)
    if level.size:
        keep[0] = level[0] != eta
        keep[1:] = level[1:] != level[:-1]
    t_out = np.concatenate(([0.0], times[keep]))
    v_out = np.concatenate(([eta], level[keep]))
    return QueueTrace(
        t_out, v_out, eta, horizon,
        artificial_arrivals=artificial,
        real_arrivals=int(np.sum(deltas == 1)),
    )


def _counts_at(events: np.ndarray, t: float) -> int:
    return int(np.searchsorted(events, t, side="right"))


def breakdown_bound_value(
    bundle: RenewalPathBundle, n: int, eta: int, gamma: float, t: float
) -> int:
    """Closed-form upper bound on the breakdown system's level at time t.

    eta + max(1 + phi(gamma, t-gamma, eta),
              phi(0, gamma, n) + A^gamma(t-gamma) - sum_{i<=eta} N_i^gamma(t-gamma))
        + sum_{i>eta} 1{N_i(gamma, t) = 0}.
    """
    if not (0 <= gamma <= t):
        raise ValueError("need 0 <= gamma <= t")
    if n > bundle.n_streams:
        raise ValueError("bundle has too few service streams")
    term1 = 1 + phi(bundle, gamma, t - gamma, eta).value
    netput = _counts_at(bundle.arrival_times, t) - _counts_at(bundle.arrival_times, gamma)
    for i in range(eta):
        s = bundle.service_times[i]
        netput -= _counts_at(s, t) - _counts_at(s, gamma)
    term2 = phi(bundle, 0.0, gamma, n).value + netput
    survivors = 0
    for i in range(eta, n):
        s = bundle.service_times[i]
        if _counts_at(s, t) - _counts_at(s, gamma) == 0:
            survivors += 1
    return eta + max(term1, term2) + survivors


@dataclass
class BoundQuery:
    """Query for the grid upper bound on P(Q > x).

    Either (n, B) or a raw lam may be given; x is the raw threshold.  mode is
    "steady" (outer supremum truncated at horizon_T, chosen adaptively when
    not supplied) or ("transient", t).  Grids default to the spacings that
    make the bound informative: delta on a service-mean ladder plus a
    horizon proxy for infinity, eta stepping down from n in units of
    B sqrt(n) / 2.
    """

    x: float
    n: int
    B: float = None
    lam: float = None
    mode: tuple = ("steady",)
    delta_grid: tuple = None
    eta_grid: tuple = None
    horizon_T: float = None
    replications: int = 400
    seed: int = 0

    def __post_init__(self):
        if (self.B is None) == (self.lam is None):
            raise ValueError("give exactly one of B or lam")
        if self.B is not None:
            self.lam = hw_rate(self.n, self.B)
        else:
            if not (0 < self.lam < self.n):
                raise ValueError("need 0 < lam < n")
            self.B = (self.n - self.lam) / math.sqrt(self.n)
        if self.mode[0] not in ("steady", "transient"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode[0] == "transient" and len(self.mode) != 2:
            raise ValueError("transient mode needs a time: ('transient', t)")
        if self.replications < 2:
            raise ValueError("need at least 2 replications")


def _default_grids(query: BoundQuery, mean_S: float, T: float):
    if query.delta_grid is not None:
        deltas = tuple(float(v) for v in query.delta_grid)
    else:
        deltas = (0.0, 0.5 * mean_S, mean_S, 2.0 * mean_S, T)
    if query.eta_grid is not None:
        etas = tuple(int(v) for v in query.eta_grid)
    else:
        root = query.B * math.sqrt(query.n)
        raw = [
            query.n,
            query.n - math.ceil(root / 2.0),
            query.n - math.ceil(root),
            query.n - math.ceil(2.0 * root),
        ]
        etas = tuple(sorted({e for e in raw if 0 <= e <= query.n}, reverse=True))
    for dl in deltas:
        if dl > T + 1e-9:
            raise ValueError(f"delta {dl} beyond horizon {T}")
    if not deltas or not etas:
        raise ValueError("empty (delta, eta) grid")
    return deltas, etas


def _adaptive_T(query: BoundQuery, mu: float, c4: float) -> float:
    """Truncation horizon for sup_{t >= delta}.

    Hard cap 50 B^-2 max(1, 1/mu); within the cap, extend until the pooled
    netput has dropped 10 sqrt(C4 T) / (B mu) below its running maximum
    (negative drift makes later records exponentially unlikely).  The cap
    almost always binds first at desk scale.
    """
    if query.horizon_T is not None:
        return query.horizon_T
    if query.mode[0] == "transient":
        return float(query.mode[1])
    cap = 50.0 * query.B ** -2 * max(1.0, 1.0 / mu)
    return cap


@dataclass
class BoundCell:
    delta: float
    eta: int
    estimate: BoundEstimate


@dataclass
class BoundGridResult:
    """Per-cell estimates plus the grid minimum.

    minimum uses the naive CI of the minimizing cell; minimum_adjusted
    replaces the upper confidence limit with a Bonferroni-corrected one to
    account for selecting the smallest of K noisy cells.
    """

    cells: list
    minimum: BoundEstimate
    minimum_adjusted: BoundEstimate
    horizon_T: float
    label: str = "truncated-horizon"

    def cell(self, delta, eta) -> BoundCell:
        for c in self.cells:
            if c.eta == eta and abs(c.delta - delta) <= 1e-12 * max(1.0, abs(delta)):
                return c
        raise KeyError((delta, eta))


def theorem4_bound(
    query: BoundQuery, spec_A: Distribution, spec_S: Distribution
) -> BoundGridResult:
    """Monte Carlo evaluation of the grid upper bound on P(Q(infty) > x).

    Arrivals are scaled to rate mu * lam; grid cells share each replication's
    bundle (common random numbers), which keeps the grid minimum comparable
    across cells.
    """
    mS = spec_S.moments()
    mA = spec_A.moments()
    mu = 1.0 / mS.mean
    c4 = mu * mA.scv + mu * mS.scv
    T = _adaptive_T(query, mu, c4)
    deltas, etas = _default_grids(query, mS.mean, T)
    scaled_A = spec_A.scaled(mA.mean * mu / query.lam)
    n = query.n
    hits = np.zeros((len(deltas), len(etas), query.replications), dtype=np.int8)
    drop_target = 10.0 * math.sqrt(c4 * T) / (query.B * mu)
    drop_ok = 0

    for rep in range(query.replications):
        rng = np.random.default_rng(np.random.SeedSequence([query.seed, rep]))
        bundle = make_bundle(scaled_A, spec_S, n, T, rng)
        ind, dropped = _theorem4_indicators(bundle, n, query.x, deltas, etas)
        hits[:, :, rep] = ind
        drop_ok += int(dropped >= drop_target)

    cells = []
    for di, dl in enumerate(deltas):
        for ei, eta in enumerate(etas):
            est = estimates.from_indicators(
                hits[di, ei], label=f"delta={dl:g},eta={eta}"
            )
            cells.append(BoundCell(dl, eta, est))
    best = min(cells, key=lambda c: c.estimate.point)
    k = len(cells)
    zadj = float(stats.norm.ppf(1.0 - 0.025 / k))
    adj_hi = min(1.0, best.estimate.point + zadj * best.estimate.stderr)
    adjusted = BoundEstimate(
        best.estimate.point,
        best.estimate.stderr,
        best.estimate.ci_low,
        max(adj_hi, best.estimate.point),
        best.estimate.replications,
        label=best.estimate.label + ",bonferroni",
    )
    label = "truncated-horizon" if query.mode[0] == "steady" else "transient"
    if query.mode[0] == "steady" and drop_ok < query.replications:
        label += ",drop-rule-unmet-on-some-paths"
    return BoundGridResult(cells, best.estimate, adjusted, T, label)


def _theorem4_indicators(bundle, n, x, deltas, etas):
    """Event indicators for every (delta, eta) cell on one bundle."""
    arr = bundle.arrival_times
    svc = bundle.service_times
    max_eta = max(etas)

    # forward netput over all n streams, for sup_{delta <= s <= T}
    t_all, d_all = _merged_walk(arr, svc, n)
    walk_all = np.cumsum(d_all)
    # suffix running max of the walk (value after each event)
    suffix_max = np.maximum.accumulate(walk_all[::-1])[::-1] if walk_all.size else walk_all
    dropped = float(walk_all.max() - walk_all[-1]) if walk_all.size else 0.0

    # per-stream counts at each delta
    counts = np.array(
        [[_counts_at(s, dl) for s in svc] for dl in deltas]
    )  # len(deltas) x n

    out = np.zeros((len(deltas), len(etas)), dtype=np.int8)
    for ei, eta in enumerate(etas):
        t_eta, d_eta = _merged_walk(arr, svc, eta)
        walk_eta = np.cumsum(d_eta)
        runmax_eta = np.maximum.accumulate(walk_eta) if walk_eta.size else walk_eta
        for di, dl in enumerate(deltas):
            j = np.searchsorted(t_eta, dl, side="right") - 1
            sup_head = int(runmax_eta[j]) if j >= 0 else 0
            sup_head = max(0, sup_head)

            k = np.searchsorted(t_all, dl, side="right") - 1
            at_delta = int(walk_all[k]) if k >= 0 else 0
            tail_from = int(suffix_max[k + 1]) if k + 1 < walk_all.size else -(10 ** 9)
            sup_tail = max(at_delta, tail_from)

            extra = int(counts[di, eta:].sum())
            idle = int(np.sum(counts[di, eta:] == 0))
            value = max(1 + sup_head, sup_tail + extra) + idle
            out[di, ei] = value > x - eta
    return out, dropped


def _merged_walk(arr, svc, z):
    times = np.concatenate([arr] + [svc[i] for i in range(z)])
    deltas = np.concatenate(
        [np.ones(arr.size, dtype=np.int64)]
        + [-np.ones(svc[i].size, dtype=np.int64) for i in range(z)]
    )
    order = np.argsort(times, kind="stable")
    return times[order], deltas[order]


def coupled_dominance_check(config: HwConfig, gamma: float, eta: int, rng) -> int:
    """Build the real queue and its bounding systems from one bundle and count
    dominance violations at event epochs (target zero).

    Checks, per the coupling construction:
      (a) Q(t) <= level of the saturated n-server system at every pooled epoch;
      (b) with time origin shifted to gamma, the n-server and eta-server
          systems started from the saturated state at gamma satisfy
          Q_n(u) <= Q_eta(u) + sum_{i>eta} 1{W_i > u}, where W_i is the
          remaining work on server i at gamma.
    """
    if not (0 <= eta <= config.n):
        raise ValueError("eta out of range")
    if not (0.0 <= gamma <= config.horizon):
        raise ValueError("gamma out of range")
    n = config.n
    pad = config.horizon * 3.0 + 50.0 * config.spec_S.moments().mean
    bundle = make_bundle(config.scaled_A, config.spec_S, n, pad, rng)
    violations = 0

    # --- (a) real queue vs saturated n-server system -----------------------
    # the saturated system dictates each real job's duration; the real queue
    # replays them so both systems share per-job processing times.  Both
    # traces are right-continuous, so comparing just after each epoch is
    # equivalent and immune to float drift in replayed departure chains.
    eps = 1e-9
    durations = _busy_system_durations(bundle, n, config.horizon)
    trace_q = _replay_queue(
        bundle, n, 0.0, config.horizon, n_jobs_queued=0, replay=durations
    )[0]
    trace_busy = busy_system_path(bundle, n, config.horizon)
    epochs, _ = _window_events(bundle, 0.0, config.horizon, n)
    epochs = epochs[epochs + eps <= config.horizon] + eps
    q_vals = trace_q.value_at(epochs)
    b_vals = trace_busy.value_at(epochs)
    violations += int(np.sum(q_vals > b_vals))

    # --- (b) n-server vs eta-server from the saturated state at gamma ------
    span = config.horizon - gamma
    if span > 0 and eta >= 1:
        queued = phi(bundle, 0.0, gamma, n).value
        trace_eta, durations = _replay_queue(
            bundle, eta, gamma, span, n_jobs_queued=queued, drain=True
        )
        trace_n, _ = _replay_queue(
            bundle, n, gamma, span, n_jobs_queued=queued, replay=durations
        )
        w_rem = np.array(
            [_next_event_after(bundle.service_times[i], gamma) - gamma for i in range(eta, n)]
        )
        ep = np.unique(np.concatenate((trace_eta.times, trace_n.times, w_rem)))
        ep = ep[(ep >= 0) & (ep + eps <= span)] + eps
        lhs = trace_n.value_at(ep)
        rhs = trace_eta.value_at(ep) + np.array([np.sum(w_rem > u) for u in ep])
        violations += int(np.sum(lhs > rhs))
    return violations


def _next_event_after(events: np.ndarray, t: float) -> float:
    i = np.searchsorted(events, t, side="right")
    if i >= events.size:
        raise ValueError("bundle exhausted; increase padding")
    return float(events[i])


def _busy_system_durations(bundle: RenewalPathBundle, z: int, horizon: float) -> dict:
    """Durations the saturated z-server system assigns to real arrivals.

    Real jobs wait FCFS; each service event of stream i frees server i, and
    the head waiting job (if any) starts there, departing at the stream's
    next event -- so its duration is that renewal interval.  Runs past the
    horizon until every real job that arrived by the horizon has started.
    """
    arrivals = bundle.arrival_times[bundle.arrival_times <= horizon]
    svc_times = []
    svc_stream = []
    for i in range(z):
        ev = bundle.service_times[i]
        svc_times.append(ev)
        svc_stream.append(np.full(ev.size, i, dtype=np.int64))
    times = np.concatenate(svc_times)
    streams = np.concatenate(svc_stream)
    order = np.argsort(times, kind="stable")
    times = times[order]
    streams = streams[order]
    # per-stream position of each pooled event
    positions = np.zeros(times.size, dtype=np.int64)
    counters = [0] * z
    for k in range(times.size):
        i = streams[k]
        positions[k] = counters[i]
        counters[i] += 1

    durations: dict[int, float] = {}
    job = 0
    k_arr = 0
    waiting: list[int] = []
    head = 0
    for k in range(times.size):
        tau = times[k]
        while k_arr < arrivals.size and arrivals[k_arr] < tau:
            waiting.append(k_arr)
            k_arr += 1
        if head < len(waiting):
            i = streams[k]
            pos = positions[k]
            ev = bundle.service_times[i]
            if pos + 1 >= ev.size:
                raise ValueError("bundle exhausted; increase padding")
            durations[waiting[head]] = float(ev[pos + 1] - ev[pos])
            head += 1
        if head >= arrivals.size and k_arr >= arrivals.size:
            break
    if len(durations) < arrivals.size:
        raise ValueError("bundle exhausted before all jobs started; increase padding")
    return durations


def _replay_queue(bundle, n_servers, origin, span, n_jobs_queued=0, replay=None, drain=False):
    """FCFS queue fed by the bundle's arrival stream after `origin`.

    Service times come from the bundle's renewal intervals: the j-th job
    started on server i consumes the (j+1)-th interval of stream i after the
    origin (the initial job consumes the residual first interval).  With
    `replay`, job durations are taken from the given map instead, matching
    assignments across coupled systems.
    """
    arr = bundle.arrival_times
    arrivals = arr[(arr > origin) & (arr <= origin + span)] - origin
    initial = np.array(
        [_next_event_after(bundle.service_times[i], origin) - origin for i in range(n_servers)]
    )
    intervals = []
    for i in range(n_servers):
        ev = bundle.service_times[i]
        j = np.searchsorted(ev, origin, side="right")
        tail = ev[j:]
        if tail.size < 2:
            raise ValueError("bundle exhausted; increase padding")
        intervals.append(np.diff(tail))

    if replay is None:
        def service(job, srv, assignment):
            iv = intervals[srv]
            if assignment - 1 >= iv.size:
                raise ValueError("bundle exhausted; increase padding")
            return float(iv[assignment - 1])
    else:
        def service(job, srv, assignment):
            return replay[job]

    times, values, durations = run_fcfs(
        n_servers, arrivals, service, initial, n_jobs_queued, span,
        record_assignments=(replay is None), drain=drain,
    )
    trace = QueueTrace(times, values, n_servers, span,
                       real_arrivals=int(arrivals.size))
    return trace, durations
