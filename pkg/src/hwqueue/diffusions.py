"""Brownian motion, Ornstein-Uhlenbeck, and 3-D Bessel samplers with
first-passage utilities.

Sampling is exact in law at grid points: Gaussian increments for Brownian
motion, the autoregressive transition for the stationary OU process, and the
norm of a 3-D Brownian motion for the Bessel process.  Suprema over an
interval are sampled exactly by adding per-interval Brownian-bridge maxima
(conditionally on the endpoints, drift drops out of the bridge).  Hitting
times use plain grid crossing: detection is never early, so the bias
direction is known, and the step is chosen small enough to sit below the
resolution of the statistical tests that consume them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import _norm_sf


@dataclass
class DiffusionPath:
    """Values on a time grid; leading axis enumerates paths when size > 1."""

    grid: np.ndarray
    values: np.ndarray
    tag: str

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.grid.size:
            raise ValueError("values do not match the grid")

    def at(self, t: float):
        idx = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not on the grid")
        return self.values[..., idx]


def bm_sup_tail(t: float, x: float) -> float:
    """P(sup_{s <= t} B(s) > x) = 2 Phi^c(x / sqrt(t))."""
    if t <= 0:
        raise ValueError("need t > 0")
    return float(2.0 * _norm_sf(x / math.sqrt(t)))


def bm_two_barrier(c1: float, c2: float) -> float:
    """P(B hits +c1 before -c2) = c2 / (c1 + c2)."""
    if c1 <= 0 or c2 <= 0:
        raise ValueError("need positive barriers")
    return c2 / (c1 + c2)


def bm_drift_sup(c: float, x: float) -> float:
    """P(sup_t (B(t) - c t) > x) = exp(-2 c x)."""
    if c <= 0 or x <= 0:
        raise ValueError("need c, x > 0")
    return math.exp(-2.0 * c * x)


def bm_closed_forms(kind: str, **kwargs) -> float:
    forms = {
        "sup_tail": bm_sup_tail,
        "two_barrier": bm_two_barrier,
        "drift_sup": bm_drift_sup,
    }
    if kind not in forms:
        raise ValueError(f"unknown kind {kind!r}; choose from {sorted(forms)}")
    return forms[kind](**kwargs)


def sample_bm(start: float, drift: float, grid, rng, size=None) -> DiffusionPath:
    grid = np.asarray(grid, dtype=float)
    shape = (grid.size,) if size is None else (size, grid.size)
    vals = np.empty(shape)
    vals[..., 0] = start + drift * grid[0]
    dts = np.diff(grid)
    incr = rng.normal(
        drift * dts, np.sqrt(dts), size=shape[:-1] + (dts.size,)
    )
    vals[..., 1:] = vals[..., :1] + np.cumsum(incr, axis=-1)
    return DiffusionPath(grid, vals, f"BM(start={start}, drift={drift})")


def sample_ou(rho: float, grid, rng, size=None) -> DiffusionPath:
    """Stationary OU with correlation exp(-rho (t - s)); exact AR transition."""
    if rho <= 0:
        raise ValueError("need rho > 0")
    grid = np.asarray(grid, dtype=float)
    shape = (grid.size,) if size is None else (size, grid.size)
    vals = np.empty(shape)
    vals[..., 0] = rng.standard_normal(shape[:-1] or None)
    for k in range(1, grid.size):
        a = math.exp(-rho * (grid[k] - grid[k - 1]))
        noise = rng.standard_normal(shape[:-1] or None)
        vals[..., k] = a * vals[..., k - 1] + math.sqrt(1.0 - a * a) * noise
    return DiffusionPath(grid, vals, f"OU(rho={rho})")


def sample_bessel3(b: float, grid, rng, size=None) -> DiffusionPath:
    """Norm of a 3-D Brownian motion started at (b, 0, 0)."""
    if b < 0:
        raise ValueError("need b >= 0")
    grid = np.asarray(grid, dtype=float)
    n = 1 if size is None else size
    dts = np.diff(grid)
    comps = np.zeros((n, 3, grid.size))
    comps[:, 0, 0] = b
    incr = rng.normal(0.0, np.sqrt(dts), size=(n, 3, dts.size))
    comps[:, :, 1:] = comps[:, :, :1] + np.cumsum(incr, axis=-1)
    vals = np.sqrt(np.sum(comps ** 2, axis=1))
    if size is None:
        vals = vals[0]
    return DiffusionPath(grid, vals, f"Bessel3(start={b})")


def bm_sup_sample(t_end: float, drift: float, step: float, rng, size: int) -> np.ndarray:
    """Exact samples of sup_{0 <= s <= t_end} (B(s) + drift * s).

    Per-interval maxima are drawn from the Brownian-bridge law given the
    endpoints, M = (a + b + sqrt((b - a)^2 - 2 h ln U)) / 2, which is exact
    for drifted motion too since conditioning on endpoints removes drift.
    """
    n_steps = max(1, int(math.ceil(t_end / step)))
    h = t_end / n_steps
    sup = np.zeros(size)
    left = np.zeros(size)
    for _ in range(n_steps):
        right = left + rng.normal(drift * h, math.sqrt(h), size=size)
        u = rng.uniform(size=size)
        bridge_max = 0.5 * (
            left + right + np.sqrt((right - left) ** 2 - 2.0 * h * np.log(u))
        )
        np.maximum(sup, bridge_max, out=sup)
        left = right
    return sup


def first_passage_bm(
    start: float,
    drift: float,
    rng,
    size: int,
    upper: float = None,
    lower: float = None,
    step: float = 1e-3,
    horizon: float = 1e4,
):
    """Grid-crossing first passage of a drifted BM to one or two barriers.

    Returns (times, which): which is +1 for upper, -1 for lower, 0 when the
    horizon was exhausted (times then hold the horizon value).
    """
    if upper is None and lower is None:
        raise ValueError("need at least one barrier")
    times = np.full(size, horizon)
    which = np.zeros(size, dtype=np.int64)
    vals = np.full(size, float(start))
    active = np.arange(size)
    chunk = max(256, min(8192, int(4e7 // max(size, 1)) or 256))
    steps_done = 0
    max_steps = int(math.ceil(horizon / step))
    sd = math.sqrt(step)
    while active.size and steps_done < max_steps:
        ns = min(chunk, max_steps - steps_done)
        incr = rng.normal(drift * step, sd, size=(active.size, ns))
        paths = vals[active, None] + np.cumsum(incr, axis=1)
        hit_up = paths >= upper if upper is not None else np.zeros_like(paths, bool)
        hit_dn = paths <= lower if lower is not None else np.zeros_like(paths, bool)
        crossed = hit_up | hit_dn
        any_cross = crossed.any(axis=1)
        first = np.argmax(crossed, axis=1)
        rows = np.where(any_cross)[0]
        idx = active[rows]
        times[idx] = (steps_done + first[rows] + 1) * step
        which[idx] = np.where(hit_up[rows, first[rows]], 1, -1)
        vals[active] = paths[:, -1]
        active = active[~any_cross]
        steps_done += ns
    return times, which


def first_passage_bessel3(
    b: float, level: float, rng, size: int, step: float = 1e-3, horizon: float = 1e4
) -> np.ndarray:
    """Grid-crossing first passage of a 3-D Bessel process to an upper level."""
    if level <= b:
        raise ValueError("need level > start")
    times = np.full(size, horizon)
    comps = np.zeros((size, 3))
    comps[:, 0] = b
    active = np.arange(size)
    chunk = max(256, min(4096, int(2e7 // max(size, 1)) or 256))
    steps_done = 0
    max_steps = int(math.ceil(horizon / step))
    sd = math.sqrt(step)
    lvl2 = level * level
    while active.size and steps_done < max_steps:
        ns = min(chunk, max_steps - steps_done)
        incr = rng.normal(0.0, sd, size=(active.size, 3, ns))
        paths = comps[active, :, None] + np.cumsum(incr, axis=2)
        r2 = np.sum(paths ** 2, axis=1)
        crossed = r2 >= lvl2
        any_cross = crossed.any(axis=1)
        first = np.argmax(crossed, axis=1)
        rows = np.where(any_cross)[0]
        times[active[rows]] = (steps_done + first[rows] + 1) * step
        comps[active] = paths[:, :, -1]
        active = active[~any_cross]
        steps_done += ns
    return times


def hitting_time(
    process: str,
    start: float,
    level: float,
    rng,
    size: int = 1,
    drift: float = 0.0,
    step: float = None,
    horizon: float = None,
):
    """First grid crossing of a single level; np.inf marks 'not hit'.

    Default step 1e-4 * level^2 * max(1, 1/|level|); grid crossing can only
    detect late, so reported times are stochastically >= the true ones.
    """
    if level == start:
        raise ValueError("level must differ from the start")
    if step is None:
        step = 1e-4 * level ** 2 * max(1.0, 1.0 / abs(level))
    if horizon is None:
        horizon = 400.0 * max(1.0, (level - start) ** 2)
    if process == "bm":
        upper = level if level > start else None
        lower = level if level < start else None
        times, which = first_passage_bm(
            start, drift, rng, size, upper=upper, lower=lower,
            step=step, horizon=horizon,
        )
        out = np.where(which != 0, times, np.inf)
    elif process == "bessel3":
        times = first_passage_bessel3(start, level, rng, size, step=step, horizon=horizon)
        out = np.where(times < horizon, times, np.inf)
    else:
        raise ValueError(f"unknown process {process!r}")
    return float(out[0]) if size == 1 else out


def conditioned_bm_hit_sample(
    b: float,
    c: float,
    rng,
    size: int = 1,
    step: float = 1e-3,
    horizon_cap: float = 1e4,
):
    """Hitting times of level c by a BM from b, conditioned on reaching c
    before 0, via rejection: reject paths that hit 0 first.

    Returns (accepted_times, trials, accepted_total); the acceptance
    frequency accepted_total / trials estimates b / c.
    """
    if not (0.0 < b < c):
        raise ValueError("need 0 < b < c")
    accepted = []
    trials = 0
    total = 0
    batch = max(256, min(size, 8192))
    while total < size:
        times, which = first_passage_bm(
            b, 0.0, rng, batch, upper=c, lower=0.0, step=step, horizon=horizon_cap
        )
        good = which == 1
        accepted.append(times[good])
        total += int(np.sum(good))
        trials += batch
    out = np.concatenate(accepted)[:size]
    return out, trials, total


def williams_sample(
    b: float, grid, rng, size=None, seg2_cap: float = 256.0
) -> DiffusionPath:
    """Glued-segment construction of a 3-D Bessel path from b.

    Draw U ~ Uniform[0, b]; run a BM from b until it first reaches U; follow
    with a second BM from b run to its own first passage of U, traversed in
    reverse; then a 3-D Bessel process from 0, shifted up by b.  The law of
    the glued path is that of a Bessel(3) process started at b.

    The middle segment is simulated forward until it hits U and replayed
    backward; paths exceeding seg2_cap time units before hitting are redrawn
    (probability O(sqrt(1/cap)), a documented truncation).
    """
    if b <= 0:
        raise ValueError("need b > 0")
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must start at 0 and strictly increase")
    h = float(grid[1] - grid[0])
    if np.max(np.abs(np.diff(grid) - h)) > 1e-9 * h:
        raise ValueError("grid must be uniform")
    m = grid.size
    n = 1 if size is None else size

    u_level = rng.uniform(0.0, b, size=n)
    seg1 = sample_bm(b, 0.0, grid, rng, size=n).values
    vals = seg1.copy()
    below = seg1 <= u_level[:, None]
    crossed = below.any(axis=1)
    tau1_idx = np.where(crossed, np.argmax(below, axis=1), m)

    for i in np.where(crossed)[0]:
        k1 = int(tau1_idx[i])
        window = m - k1  # grid points still to fill, incl. the glue point
        tail_vals, n2 = _bm_down_tail(
            b, float(u_level[i]), h, window, int(seg2_cap / h), rng
        )
        # reversed second BM: X(t1 + j h) = B2(tau2 - j h); the hit value is
        # snapped to U (grid crossing overshoots the level by O(sqrt(h)))
        tail_vals[0] = u_level[i]
        take = min(window, tail_vals.size)
        vals[i, k1 : k1 + take] = tail_vals[:take]
        rest = window - take  # only when tau2 < remaining horizon
        if rest > 0:
            bes = sample_bessel3(
                0.0, np.arange(rest + 1) * h, rng
            ).values[1:]
            vals[i, k1 + take :] = bes + b
    tag = f"Williams(b={b})"
    return DiffusionPath(grid, vals if size is not None else vals[0], tag)


def _bm_down_tail(start: float, target: float, h: float, window: int, cap_steps: int, rng):
    """Simulate a BM from start to its first passage of target (< start) and
    return its last `window` values in reverse order (hit value first).

    Restarts if the cap is exceeded.
    """
    sd = math.sqrt(h)
    while True:
        chunks = []
        val = start
        steps = 0
        hit_at = None
        while steps < cap_steps:
            ns = min(4096, cap_steps - steps)
            path = val + np.cumsum(rng.normal(0.0, sd, size=ns))
            hit = path <= target
            if hit.any():
                k = int(np.argmax(hit))
                chunks.append(path[: k + 1])
                hit_at = steps + k + 1
                break
            chunks.append(path)
            val = float(path[-1])
            steps += ns
        if hit_at is None:
            continue  # cap exceeded: redraw the whole segment
        full = np.concatenate([[start]] + chunks)
        tail = full[max(0, full.size - window) :]
        return tail[::-1].copy(), hit_at
