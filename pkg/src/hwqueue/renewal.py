"""Renewal path generation, the renewal function, and equilibrium covariances.

The variance of equilibrium renewal counts decomposes as

    V[N^e(t)] = C1 * t + f(t),      C1 = mu * cS^2,

where f is bounded (|f| <= C2), Lipschitz (constant C3), f(0) = 0, and the
covariance at two times is

    V[N^e(s), N^e(t)] = C1 * s + (f(s) + f(t) - f(t - s)) / 2,   s <= t.

f is recovered from the ordinary renewal function m(t) = E[N^o(t)] via

    f(t) = 2 mu * integral_0^t ((m(s) + 1 - mu s) - (1 + cS^2) / 2) ds,

so the numeric pipeline is: solve the renewal equation for m, integrate, and
validate the a-priori bands.  Exponential, H2Star, and deterministic renewal
distributions have closed forms and skip the solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import Deterministic, Distribution, Exponential, H2Star

EPS0 = 1.0 / (2.0 * (math.e - 2.0))


class RenewalSolverError(RuntimeError):
    """Numeric renewal solution violated an a-priori band."""


@dataclass(frozen=True)
class RenewalConstants:
    """Comparison constants for the equilibrium-covariance machinery.

    C1 = mu cS^2, C2 = (4/3) mu^3 E[S^3] + (1/4) mu^4 (E[S^2])^2,
    C3 = mu^3 E[S^2], C4 = mu cA^2 + C1, eps0 = 1 / (2(e - 2)), and
    M = 8 (C2 + C3 + C4) / (C4 (1/2 - exp(-eps0))).
    """

    C1: float
    C2: float
    C3: float
    C4: float
    eps0: float
    M: float

    def __post_init__(self):
        for name in ("C2", "C3", "C4", "eps0", "M"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.C1 < 0.0:
            raise ValueError("C1 must be nonnegative")
        if not math.exp(-self.eps0) < 0.5:
            raise ValueError("exp(-eps0) must be below 1/2")


def renewal_constants(spec_A: Distribution, spec_S: Distribution) -> RenewalConstants:
    """Constants from the moments of A and S under the square-root staffing
    assumption mu_A = mu_S."""
    mA = spec_A.moments()
    mS = spec_S.moments()
    if not math.isfinite(mS.third_moment):
        raise ValueError("E[S^3] must be finite for the comparison constants")
    mu_A, mu_S = 1.0 / mA.mean, 1.0 / mS.mean
    if abs(mu_A - mu_S) > 1e-9 * mu_S:
        raise ValueError(
            f"rates must match after scaling (mu_A={mu_A}, mu_S={mu_S})"
        )
    mu = mu_S
    c1 = mu * mS.scv
    c2 = (4.0 / 3.0) * mu ** 3 * mS.third_moment + 0.25 * mu ** 4 * mS.second_moment ** 2
    c3 = mu ** 3 * mS.second_moment
    c4 = mu * mA.scv + c1
    m = 8.0 * (c2 + c3 + c4) / (c4 * (0.5 - math.exp(-EPS0)))
    return RenewalConstants(c1, c2, c3, c4, EPS0, m)


def simulate_renewal(spec: Distribution, mode: str, horizon: float, rng) -> np.ndarray:
    """Event times of a renewal process on (0, horizon].

    mode='equilibrium' draws the first interval from the residual law,
    mode='ordinary' from the renewal distribution itself.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if mode not in ("equilibrium", "ordinary"):
        raise ValueError(f"unknown mode {mode!r}")
    if spec.zero_atom > 0.0:
        raise ValueError(
            f"{spec.family} has an atom at zero; its renewal paths contain "
            "simultaneous events and are not supported"
        )
    first = (
        spec.residual_sample(rng) if mode == "equilibrium" else spec.sample(rng)
    )
    events = [np.array([first])] if first <= horizon else []
    t = float(first)
    mean = spec.moments().mean
    while t <= horizon:
        batch = max(16, int((horizon - t) / mean * 1.25) + 1)
        gaps = np.atleast_1d(spec.sample(rng, size=batch))
        times = t + np.cumsum(gaps)
        events.append(times)
        t = float(times[-1])
    if not events:
        return np.empty(0)
    all_times = np.concatenate(events)
    return all_times[all_times <= horizon]


@dataclass(frozen=True)
class RenewalGrid:
    """Uniform grid carrying m(t) = E[N^o(t)] and the offset f(t)."""

    spec: Distribution
    ts: np.ndarray
    m: np.ndarray
    f: np.ndarray

    @property
    def step(self) -> float:
        return float(self.ts[1] - self.ts[0])

    @property
    def t_max(self) -> float:
        return float(self.ts[-1])

    def m_at(self, t):
        return np.interp(t, self.ts, self.m)

    def f_at(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.t_max + 1e-9):
            raise ValueError(
                f"f requested at t={float(np.max(t)):.3f} beyond solved grid "
                f"t_max={self.t_max:.3f}"
            )
        return np.interp(t, self.ts, self.f)

    def variance_at(self, t):
        mu = 1.0 / self.spec.moments().mean
        c1 = mu * self.spec.moments().scv
        return c1 * np.asarray(t, dtype=float) + self.f_at(t)


def _solve_renewal_equation(spec: Distribution, t_max: float, step: float) -> np.ndarray:
    """Riemann-Stieltjes trapezoid for m(t) = F(t) + int_0^t m(t-s) dF(s):

        m_i = F_i + sum_{j=1}^{i} (m_{i-j+1} + m_{i-j}) / 2 * (F_j - F_{j-1}).

    The CDF increments are exact, so density jumps (e.g. uniform endpoints)
    do not degrade the O(h^2) convergence.
    """
    if spec.zero_atom > 0.0:
        raise RenewalSolverError(f"{spec.family} has an atom at zero")
    n = int(round(t_max / step))
    ts = np.arange(n + 1) * step
    F = np.asarray(spec.cdf(ts), dtype=float)
    dF = np.diff(F)
    denom = 1.0 - 0.5 * dF[0]
    if denom <= 0.0:
        raise RenewalSolverError("step too coarse: F jumps by >= 2 over one cell")
    m = np.zeros(n + 1)
    msum = np.zeros(n)  # msum[k] = m[k] + m[k+1]
    for i in range(1, n + 1):
        conv = 0.5 * np.dot(msum[i - 2:: -1], dF[1:i]) if i >= 2 else 0.0
        m[i] = (F[i] + 0.5 * m[i - 1] * dF[0] + conv) / denom
        msum[i - 1] = m[i - 1] + m[i]
    return m


def _closed_form_f(spec: Distribution):
    """Exact f(t) evaluators for the families that admit one.

    Exponential: Poisson counts, f == 0.  H2Star: compound-Poisson counts
    (independent increments), f == 0.  Deterministic(c): V[N^e(t)] is
    th(1-th) with th = frac(t/c), and C1 = 0.
    """
    if isinstance(spec, (Exponential, H2Star)):
        return lambda t: np.zeros_like(np.asarray(t, dtype=float))
    if isinstance(spec, Deterministic):
        c = spec.value

        def f_det(t):
            th = np.mod(np.asarray(t, dtype=float) / c, 1.0)
            return th * (1.0 - th)

        return f_det
    return None


def has_closed_form_offset(spec: Distribution) -> bool:
    return _closed_form_f(spec) is not None


def renewal_function(spec: Distribution, t_max: float, step: float = None) -> RenewalGrid:
    """Solve for m(t) on a uniform grid and integrate f(t) from it.

    Validates Lorden's band 0 <= m(t) + 1 - mu t <= mu^2 E[S^2] and the
    |f| <= C2, C3-Lipschitz bands up to discretization tolerance; a
    violation means the step is too coarse and raises.
    """
    mo = spec.moments()
    mu = 1.0 / mo.mean
    if step is None:
        step = 1e-3 * mo.mean
    if step > 1e-3 * mo.mean * (1.0 + 1e-12):
        raise ValueError(f"step {step} exceeds 1e-3 * mean = {1e-3 * mo.mean}")
    n = int(round(t_max / step))
    ts = np.arange(n + 1) * step

    exact_f = None
    if isinstance(spec, Deterministic):
        # step-function F: exact lattice values, no quadrature
        m = np.floor(ts / spec.value + 1e-12)
        exact_f = _closed_form_f(spec)
    elif isinstance(spec, H2Star):
        m = (1.0 - spec.p) / spec.p + mu * ts
        exact_f = _closed_form_f(spec)
    else:
        # trapezoid at h and h/2; the halved-step solution both checks the
        # discretization and feeds Richardson extrapolation of the h^2 term
        m_h = _solve_renewal_equation(spec, t_max, step)
        m_h2 = _solve_renewal_equation(spec, t_max, 0.5 * step)[::2]
        if np.max(np.abs(m_h2 - m_h) / (1.0 + m_h2)) > 0.01:
            raise RenewalSolverError(
                "halved-step check moved m(t) by over 1%; step too coarse"
            )
        m = (4.0 * m_h2 - m_h) / 3.0

    excess = m + 1.0 - mu * ts
    lorden_hi = mu ** 2 * mo.second_moment
    tol = 50.0 * step * mu + 1e-9
    if np.any(excess < -tol) or np.any(excess > lorden_hi + tol):
        worst = (float(np.min(excess)), float(np.max(excess)))
        raise RenewalSolverError(
            f"Lorden band violated (range {worst}, allowed [0, {lorden_hi:.6g}]); "
            "refine the solver step"
        )
    if np.any(np.diff(m) < -1e-9):
        raise RenewalSolverError("renewal function not monotone; refine the step")

    if exact_f is not None:
        f = exact_f(ts)
    else:
        integrand = excess - 0.5 * (1.0 + mo.scv)
        f = np.concatenate(
            ([0.0], 2.0 * mu * np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * step))
        )
    consts = _self_constants(spec)
    ftol = 1e-3 + 10.0 * step
    if np.max(np.abs(f)) > consts["C2"] + ftol:
        raise RenewalSolverError(
            f"|f| = {np.max(np.abs(f)):.6g} exceeds C2 = {consts['C2']:.6g}"
        )
    if np.max(np.abs(np.diff(f))) > (consts["C3"] + ftol) * step:
        raise RenewalSolverError("f violates its Lipschitz band; refine the step")
    return RenewalGrid(spec, ts, m, f)


def _self_constants(spec: Distribution) -> dict:
    mo = spec.moments()
    mu = 1.0 / mo.mean
    return {
        "C1": mu * mo.scv,
        "C2": (4.0 / 3.0) * mu ** 3 * mo.third_moment + 0.25 * mu ** 4 * mo.second_moment ** 2,
        "C3": mu ** 3 * mo.second_moment,
    }


@lru_cache(maxsize=32)
def _solved_grid(spec: Distribution, t_max: float) -> RenewalGrid:
    return renewal_function(spec, t_max)


def variance_offset(spec: Distribution, t_max: float = None):
    """Return a vectorized evaluator for f(t).

    Closed-form families evaluate anywhere; others are solved numerically on
    [0, t_max] (linear interpolation between grid points, which the
    C3-Lipschitz property justifies).
    """
    closed = _closed_form_f(spec)
    if closed is not None:
        return closed
    if t_max is None:
        raise ValueError(f"{spec.family} needs an explicit t_max for the solver")
    grid = _solved_grid(spec, _quantize_tmax(spec, t_max))
    return grid.f_at


def _quantize_tmax(spec, t_max):
    # round the solve range up to a multiple of 10 means so the lru cache is
    # reused across nearby requests
    mean = spec.moments().mean
    units = max(1.0, t_max / mean)
    return mean * 10.0 * math.ceil(units / 10.0)


def f_function(spec: Distribution, t_grid, t_max: float = None) -> np.ndarray:
    """f evaluated on the given times (solving first if necessary)."""
    t_grid = np.asarray(t_grid, dtype=float)
    top = float(np.max(t_grid)) if t_grid.size else 1.0
    f = variance_offset(spec, t_max if t_max is not None else top)
    return f(t_grid)


def equilibrium_cov(spec: Distribution, s, t, t_max: float = None):
    """V[N^e(s), N^e(t)] = C1 min(s,t) + (f(s) + f(t) - f(|t-s|)) / 2.

    Nonnegative by the positive-correlation property of equilibrium renewal
    counts; output below -1e-6 indicates a solver failure and raises.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    top = float(np.max(hi)) if hi.size else 1.0
    f = variance_offset(spec, t_max if t_max is not None else top)
    mo = spec.moments()
    c1 = (1.0 / mo.mean) * mo.scv
    cov = c1 * lo + 0.5 * (f(lo) + f(hi) - f(hi - lo))
    if np.any(cov < -1e-6):
        raise RenewalSolverError(
            f"equilibrium covariance {float(np.min(cov)):.3g} below -1e-6"
        )
    return cov if cov.shape else float(cov)


def dump_grid_csv(spec: Distribution, t_max: float, path, step: float = None):
    """Write t, m(t), f(t), V[N^e(t)] rows for external inspection."""
    grid = renewal_function(spec, t_max, step)
    var = grid.variance_at(grid.ts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "m", "f", "var_equilibrium"])
        for row in zip(grid.ts, grid.m, grid.f, var):
            w.writerow([f"{v:.10g}" for v in row])
