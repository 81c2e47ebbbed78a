"""FCFS GI/GI/n simulation under square-root staffing.

The simulator follows the coupling-friendly initial conditions used by the
bounding constructions: every server starts busy with a residual-law
remaining time, the queue starts empty, and the first inter-arrival time is
drawn from the residual law of the (rate-scaled) inter-arrival distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heapify, heappop, heappush

import numpy as np

from . import estimates
from .distributions import Distribution
from .estimates import BoundEstimate


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class FeasibilityError(ValueError):
    """Parameters leave the square-root staffing window (lambda <= 0)."""


class StabilityError(ValueError):
    """Offered load at or above capacity."""


def hw_rate(n: int, B: float) -> float:
    """Arrival rate n - B sqrt(n); errors if staffing is infeasible."""
    if n < 1:
        raise ConfigError(f"need n >= 1, got {n}")
    if B <= 0:
        raise ConfigError(f"need B > 0, got {B}")
    lam = n - B * math.sqrt(n)
    if lam <= 0.0:
        raise FeasibilityError(
            f"n - B sqrt(n) = {lam:.6g} <= 0: outside H-W feasibility"
        )
    return lam


@dataclass
class HwConfig:
    """Simulation configuration for one (n, B) system.

    Arrivals are drawn as A / lambda_{n,B}; time units are service means.
    warmup defaults to 50 * E[S] * max(1, B^-2).
    """

    n: int
    B: float
    spec_A: Distribution
    spec_S: Distribution
    horizon: float
    warmup: float = None
    replications: int = 8
    seed: int = 0
    allow_zero_service: bool = False

    def __post_init__(self):
        self.lam = hw_rate(self.n, self.B)
        mA = self.spec_A.moments()
        mS = self.spec_S.moments()
        mu_A, mu_S = 1.0 / mA.mean, 1.0 / mS.mean
        if abs(mu_A - mu_S) > 1e-9 * mu_S:
            raise ConfigError(
                f"square-root staffing needs mu_A = mu_S before scaling "
                f"(got {mu_A:.6g} vs {mu_S:.6g})"
            )
        if not (self.spec_S.supports_t0 or self.allow_zero_service):
            raise ConfigError(
                f"{self.spec_S.family} has P(S=0) > 0 and is reference-limit-only; "
                "pass allow_zero_service=True to simulate it anyway"
            )
        if mA.scv + mS.scv <= 0.0:
            raise ConfigError("need cA^2 + cS^2 > 0 (some nontrivial randomness)")
        for mom, name in ((mA, "A"), (mS, "S")):
            if not math.isfinite(mom.second_moment):
                raise ConfigError(f"E[{name}^2] must be finite")
        rho = self.lam * mS.mean * mu_A / self.n
        if rho >= 1.0:
            raise StabilityError(f"offered load rho = {rho:.6g} >= 1")
        if self.warmup is None:
            self.warmup = 50.0 * mS.mean * max(1.0, self.B ** -2)
        if self.warmup >= self.horizon:
            raise ConfigError(
                f"warmup {self.warmup:.6g} must be below horizon {self.horizon:.6g}"
            )
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        # arrival process sees A / lambda
        self.scaled_A = self.spec_A.scaled(1.0 / (self.lam / mu_A * mA.mean))

    def rep_rng(self, rep: int):
        return np.random.default_rng(np.random.SeedSequence([self.seed, rep]))


@dataclass
class QueueTrace:
    """Right-continuous step record of number-in-system.

    values[i] holds the count on [times[i], times[i+1}); jumps are +-1.
    """

    times: np.ndarray
    values: np.ndarray
    n: int
    horizon: float
    artificial_arrivals: int = 0
    real_arrivals: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.times.size != self.values.size:
            raise ValueError("times/values length mismatch")
        if self.values.size and self.values.min() < 0:
            raise ValueError("negative number-in-system")

    def value_at(self, t):
        """Number in system at time t (vectorized)."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    def busy_at(self, t):
        return np.minimum(self.value_at(t), self.n)

    def time_fraction(self, predicate, t0: float, t1: float) -> float:
        """Fraction of [t0, t1] the state predicate holds (exact integral)."""
        if not (0.0 <= t0 < t1 <= self.horizon + 1e-12):
            raise ValueError(f"bad window [{t0}, {t1}] within horizon {self.horizon}")
        cut = np.concatenate(([t0], self.times[(self.times > t0) & (self.times < t1)], [t1]))
        states = self.value_at(cut[:-1])
        hold = predicate(states).astype(float)
        return float(np.sum(hold * np.diff(cut)) / (t1 - t0))


def _service_sampler(spec_S: Distribution, rng, buffer_size=8192):
    """Vectorized i.i.d. service draws consumed one at a time."""
    buf = np.atleast_1d(spec_S.sample(rng, size=buffer_size))
    pos = 0

    def draw(job_id, server, assignment):
        nonlocal buf, pos
        if pos >= buf.size:
            buf = np.atleast_1d(spec_S.sample(rng, size=buffer_size))
            pos = 0
        v = buf[pos]
        pos += 1
        return v

    return draw


def run_fcfs(
    n: int,
    arrival_times,
    service_time,
    initial_remaining,
    initial_queue: int,
    horizon: float,
    record_assignments: bool = False,
    drain: bool = False,
    check_invariants: bool = False,
):
    """Event-driven FCFS core shared by the plain and coupled simulators.

    service_time(job_id, server, assignment) supplies the duration when a job
    enters service; assignment counts prior jobs started on that server, with
    the initial job counting as assignment 0.  Ties are resolved departures
    first.  Jobs are numbered: initial queue jobs 0..L-1, then arrivals in
    order.  With drain=True the loop continues past the horizon (ignoring
    arrivals beyond it) until every job has entered service, so that each
    job's duration is determined; the returned trace is still truncated at
    the horizon.

    Returns (trace_times, trace_values, durations) where durations maps
    job_id -> assigned service time (only if record_assignments).
    """
    arrival_times = np.asarray(arrival_times, dtype=float)
    dep_heap = [(float(r), i) for i, r in enumerate(initial_remaining)]
    heapify(dep_heap)
    free: list[int] = []
    waiting: list[int] = []  # FIFO of job ids; index 0 via pointer
    wait_head = 0
    assignments = [1] * n  # initial jobs consumed assignment 0
    durations: dict[int, float] = {}

    times = [0.0]
    values = [n + initial_queue]
    q = n + initial_queue
    next_job = initial_queue
    for j in range(initial_queue):
        waiting.append(j)
    k_arr = 0
    n_arr = arrival_times.size
    inf = math.inf

    while True:
        t_dep = dep_heap[0][0] if dep_heap else inf
        t_arr = arrival_times[k_arr] if k_arr < n_arr else inf
        t_next = min(t_dep, t_arr)
        if math.isinf(t_next):
            break
        if t_next > horizon and not (drain and wait_head < len(waiting)):
            break
        if t_dep <= t_arr:
            t, srv = heappop(dep_heap)
            if t > horizon and drain and wait_head >= len(waiting):
                break
            q -= 1
            if t <= horizon:
                times.append(t)
                values.append(q)
            if wait_head < len(waiting):
                job = waiting[wait_head]
                wait_head += 1
                dur = service_time(job, srv, assignments[srv])
                assignments[srv] += 1
                if record_assignments:
                    durations[job] = dur
                heappush(dep_heap, (t + dur, srv))
            else:
                heappush(free, srv)
            if check_invariants and wait_head < len(waiting) and free:
                raise AssertionError("server idles while queue is nonempty")
        else:
            t = t_arr
            k_arr += 1
            if t > horizon:
                continue
            q += 1
            times.append(t)
            values.append(q)
            job = next_job
            next_job += 1
            if free:
                srv = heappop(free)
                dur = service_time(job, srv, assignments[srv])
                assignments[srv] += 1
                if record_assignments:
                    durations[job] = dur
                heappush(dep_heap, (t + dur, srv))
            else:
                waiting.append(job)
    return np.array(times), np.array(values), durations


def simulate_queue(config: HwConfig, rng) -> QueueTrace:
    """One replication of the FCFS GI/GI/n queue."""
    arrivals = _arrival_times(config.scaled_A, config.horizon, rng)
    initial = np.atleast_1d(config.spec_S.residual_sample(rng, size=config.n))
    service = _service_sampler(config.spec_S, rng)
    times, values, _ = run_fcfs(
        config.n, arrivals, service, initial, 0, config.horizon
    )
    return QueueTrace(times, values, config.n, config.horizon,
                      real_arrivals=int(arrivals.size))


def _arrival_times(scaled_A: Distribution, horizon: float, rng) -> np.ndarray:
    """Equilibrium arrival stream on (0, horizon]: residual first interval."""
    mean = scaled_A.moments().mean
    first = float(scaled_A.residual_sample(rng))
    if first > horizon:
        return np.empty(0)
    chunks = [np.array([first])]
    t = first
    while t <= horizon:
        size = max(32, int((horizon - t) / mean * 1.2) + 16)
        gaps = np.atleast_1d(scaled_A.sample(rng, size=size))
        ts = t + np.cumsum(gaps)
        chunks.append(ts)
        t = float(ts[-1])
    out = np.concatenate(chunks)
    return out[out <= horizon]


def estimate_delay_prob(config: HwConfig) -> BoundEstimate:
    """Steady-state delay probability P(Q >= n) by time averaging after warmup."""
    means = []
    for rep in range(config.replications):
        trace = simulate_queue(config, config.rep_rng(rep))
        means.append(
            trace.time_fraction(lambda q: q >= config.n, config.warmup, config.horizon)
        )
    return estimates.from_rep_means(means, label="delay")


def estimate_idle_tail(config: HwConfig, x: float) -> BoundEstimate:
    """P(Q <= n - x sqrt(n)), the tail of the scaled idle-server count."""
    if x <= 0:
        raise ConfigError("need x > 0")
    threshold = config.n - x * math.sqrt(config.n)
    means = []
    for rep in range(config.replications):
        trace = simulate_queue(config, config.rep_rng(rep))
        if threshold < 0:
            means.append(0.0)
        else:
            means.append(
                trace.time_fraction(lambda q: q <= threshold, config.warmup, config.horizon)
            )
    return estimates.from_rep_means(means, label=f"idle_tail(x={x:g})")


def erlang_c(n: int, lam: float, mu: float = 1.0) -> float:
    """Exact M/M/n delay probability via the stable Erlang-B recursion."""
    if n < 1:
        raise ConfigError("need n >= 1")
    if lam <= 0 or mu <= 0:
        raise ConfigError("rates must be positive")
    a = lam / mu
    rho = a / n
    if rho >= 1.0:
        raise StabilityError(f"rho = {rho:.6g} >= 1")
    b = 1.0
    for k in range(1, n + 1):
        b = a * b / (k + a * b)
    return b / (1.0 - rho * (1.0 - b))
