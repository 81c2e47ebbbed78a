"""The limiting Gaussian process Z(t) = A(t) - D(t) and its comparisons.

A is a driftless Brownian motion with variance rate mu cA^2; D is the
Gaussian limit of pooled equilibrium service renewals, with the renewal
covariance C1 s + (f(s) + f(t) - f(t-s)) / 2.  The limit upper bound on the
scaled steady-state tail is the probability of

    max( sup_{0<=t<=delta} (Z(t) + (eta - B) mu t),
         sup_{t>=delta} (Z(t) - B mu t) + eta mu delta )
      >= x + eta P(R(S) <= delta),

estimated here by sampling Z on a finite grid (a discrete supremum can only
under-cover the continuous one; the grid step is a parameter and refinement
diagnostics are the caller's tool).

The Slepian comparison process

    W(s) = C4^(1/2) (1 - M/s)^(1/2) B(s) + (M C4 + f(s))^(1/2) U^M(s)

matches Z's variance exactly on s >= M + 1 while its covariance is dominated
by Z's, which is what makes boundary-non-crossing probabilities comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimates, renewal
from .distributions import Distribution
from .estimates import BoundEstimate
from .renewal import RenewalConstants


class CovarianceError(RuntimeError):
    """Covariance matrix not positive semidefinite within jitter budget."""


@dataclass
class CovarianceGrid:
    """Times, covariance matrix, and mean vector for a Gaussian process."""

    grid: np.ndarray
    cov: np.ndarray
    mean: np.ndarray
    mu: float
    jitter: float = 0.0
    _chol: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        m = self.grid.size
        if self.cov.shape != (m, m):
            raise ValueError("covariance shape mismatch")
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-10 * max(1.0, np.max(np.abs(self.cov))):
            raise ValueError("covariance not symmetric")

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def cholesky(self) -> np.ndarray:
        """Lower factor of the t > 0 submatrix (the t = 0 row is zero)."""
        if self._chol is None:
            sub = self.cov[1:, 1:] if self.grid[0] == 0.0 else self.cov
            if sub.size == 0:
                self._chol = np.zeros((0, 0))
                return self._chol
            maxdiag = float(np.max(np.diag(sub)))
            jitter = 0.0
            for expo in range(-16, -7):
                try:
                    eps = 0.0 if jitter == 0.0 else jitter
                    self._chol = np.linalg.cholesky(sub + eps * np.eye(sub.shape[0]))
                    self.jitter = eps
                    break
                except np.linalg.LinAlgError:
                    jitter = 10.0 ** expo * maxdiag
            else:
                raise CovarianceError(
                    "cholesky failed even with 1e-8 * maxdiag jitter; "
                    "the renewal solution is suspect"
                )
        return self._chol

    def sample(self, reps: int, rng) -> np.ndarray:
        """reps x len(grid) zero-mean Gaussian paths."""
        L = self.cholesky()
        z = rng.standard_normal((reps, L.shape[0]))
        paths = z @ L.T
        if self.grid[0] == 0.0:
            paths = np.concatenate([np.zeros((reps, 1)), paths], axis=1)
        return paths + self.mean


def default_grid(spec_S: Distribution, horizon: float, points_per_mean: int = 20) -> np.ndarray:
    step = spec_S.moments().mean / points_per_mean
    n = int(math.ceil(horizon / step))
    return np.arange(n + 1) * step


def build_Z_cov(spec_A: Distribution, spec_S: Distribution, grid) -> CovarianceGrid:
    """Covariance of Z on the grid: mu cA^2 min(s,t) plus the service-renewal
    equilibrium covariance."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must start at 0 and strictly increase")
    mA = spec_A.moments()
    mS = spec_S.moments()
    mu_A, mu_S = 1.0 / mA.mean, 1.0 / mS.mean
    if abs(mu_A - mu_S) > 1e-9 * mu_S:
        raise ValueError("Z is defined under matched rates (mu_A = mu_S)")
    mu = mu_S
    t_max = float(grid[-1])
    f = renewal.variance_offset(spec_S, t_max)
    c1 = mu * mS.scv
    s = grid[:, None]
    t = grid[None, :]
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    cov_D = c1 * lo + 0.5 * (f(lo) + f(hi) - f(hi - lo))
    if np.min(cov_D) < -1e-6:
        raise CovarianceError(
            f"service covariance dipped to {np.min(cov_D):.3g} < -1e-6"
        )
    cov = mu * mA.scv * lo + cov_D
    return CovarianceGrid(grid, cov, np.zeros(grid.size), mu)


def sample_Z(covgrid: CovarianceGrid, reps: int, rng) -> np.ndarray:
    return covgrid.sample(reps, rng)


@dataclass
class LimitEventQuery:
    B: float
    x: float
    delta: float
    eta: float
    replications: int = 4000
    seed: int = 0

    def __post_init__(self):
        if self.B <= 0 or self.delta < 0 or self.eta < 0:
            raise ValueError("need B > 0 and delta, eta >= 0")


def estimate_limit_event(
    query: LimitEventQuery, covgrid: CovarianceGrid, spec_S: Distribution
) -> BoundEstimate:
    """Monte Carlo probability of the limit exceedance event on the grid.

    delta must lie on the grid; the grid horizon stands in for the unbounded
    supremum, so the estimate carries the discrete-sup caveat in its label.
    """
    grid = covgrid.grid
    mu = covgrid.mu
    di = int(np.argmin(np.abs(grid - query.delta)))
    if abs(grid[di] - query.delta) > 1e-9 * max(1.0, query.delta):
        raise ValueError(f"delta {query.delta} not on the grid")
    threshold = query.x + query.eta * float(spec_S.residual_cdf(query.delta))
    rng = np.random.default_rng(np.random.SeedSequence([query.seed]))
    hits = []
    chunk = max(1, min(query.replications, _chunk_rows(grid.size)))
    left_drift = (query.eta - query.B) * mu * grid[: di + 1]
    right_drift = -query.B * mu * grid[di:]
    done = 0
    while done < query.replications:
        m = min(chunk, query.replications - done)
        Z = covgrid.sample(m, rng)
        head = np.max(Z[:, : di + 1] + left_drift, axis=1)
        tail = np.max(Z[:, di:] + right_drift, axis=1) + query.eta * mu * query.delta
        value = np.maximum(head, tail)
        hits.append(value >= threshold)
        done += m
    return estimates.from_indicators(
        np.concatenate(hits), label="discrete-sup,truncated-horizon"
    )


def corollary_bound(
    B: float, x: float, covgrid: CovarianceGrid, replications: int = 4000, seed: int = 0
) -> BoundEstimate:
    """P(sup_t (Z(t) - (B/2) mu t) >= x + B/2) on the grid horizon."""
    mu = covgrid.mu
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    drift = -0.5 * B * mu * covgrid.grid
    threshold = x + 0.5 * B
    hits = []
    chunk = max(1, min(replications, _chunk_rows(covgrid.grid.size)))
    done = 0
    while done < replications:
        m = min(chunk, replications - done)
        Z = covgrid.sample(m, rng)
        sup = np.max(Z + drift, axis=1)
        hits.append(sup >= threshold)
        done += m
    return estimates.from_indicators(
        np.concatenate(hits), label="discrete-sup,truncated-horizon"
    )


def _chunk_rows(cols: int, budget: int = 40_000_000) -> int:
    return max(64, budget // max(1, cols))


def w_cov(constants: RenewalConstants, f, s, t):
    """Covariance of the comparison process W at s <= t, both >= M + 1.

    C4 (1 - M/s)^(1/2) (1 - M/t)^(1/2) s
      + (M C4 + f(s))^(1/2) (M C4 + f(t))^(1/2) exp(-M (t - s)).
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < constants.M + 1.0 - 1e-9):
        raise ValueError(f"W is defined on s >= M + 1 = {constants.M + 1.0:.6g}")
    if np.any(t < s):
        raise ValueError("need t >= s")
    c4, M = constants.C4, constants.M
    fs = np.asarray(f(s), dtype=float)
    ft = np.asarray(f(t), dtype=float)
    if np.any(M * c4 + fs <= 0.0):
        raise ValueError("M C4 + f(s) must be positive (violated: bad f)")
    bm_part = c4 * np.sqrt(1.0 - M / s) * np.sqrt(1.0 - M / t) * s
    with np.errstate(under="ignore"):
        ou_part = np.sqrt(M * c4 + fs) * np.sqrt(M * c4 + ft) * np.exp(-M * (t - s))
    out = bm_part + ou_part
    return out if out.shape else float(out)


@dataclass
class SlepianReport:
    constants: RenewalConstants
    max_rel_variance_gap: float
    min_domination_margin: float
    worst_pair: tuple
    passed: bool

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"slepian {status}: var gap {self.max_rel_variance_gap:.3g}, "
            f"min margin {self.min_domination_margin:.3g} at {self.worst_pair}"
        )


def verify_slepian_domination(
    spec_A: Distribution,
    spec_S: Distribution,
    s_points: int = 50,
    t_points: int = 50,
    s_range: float = 20.0,
    t_range: float = 20.0,
    var_rtol: float = 1e-6,
    margin_floor: float = -1e-6,
) -> SlepianReport:
    """Scan s in [M+1, M+1+s_range], t in [s, s+t_range] and verify that
    V[W(s)] matches V[Z(s)] and V[Z(s), Z(t)] dominates V[W(s), W(t)].

    M is huge unless f has a closed form, so this check is practical exactly
    for the families where it matters (exponential, deterministic, and the
    zero-atom mixture); others would need an enormous solved grid and raise.
    """
    c = renewal.renewal_constants(spec_A, spec_S)
    if not renewal.has_closed_form_offset(spec_S):
        raise ValueError(
            f"{spec_S.family}: no closed-form f; solving to t = M + {s_range + t_range}"
            " is impractical"
        )
    f = renewal.variance_offset(spec_S)
    mS = spec_S.moments()
    mA = spec_A.moments()
    mu = 1.0 / mS.mean
    c4 = mu * mA.scv + mu * mS.scv

    s_grid = np.linspace(c.M + 1.0, c.M + 1.0 + s_range, s_points)
    worst_margin = math.inf
    worst_pair = None
    max_gap = 0.0
    for s in s_grid:
        t = s + np.linspace(0.0, t_range, t_points)
        z_cov = c4 * s + 0.5 * (f(np.full_like(t, s)) + f(t) - f(t - s))
        w = w_cov(c, f, np.full_like(t, s), t)
        margin = z_cov - w
        k = int(np.argmin(margin))
        if margin[k] < worst_margin:
            worst_margin = float(margin[k])
            worst_pair = (float(s), float(t[k]))
        vz = c4 * s + float(f(s))
        vw = float(w_cov(c, f, s, s))
        max_gap = max(max_gap, abs(vz - vw) / vz)
    passed = (max_gap <= var_rtol) and (worst_margin >= margin_floor)
    return SlepianReport(c, max_gap, worst_margin, worst_pair, passed)
