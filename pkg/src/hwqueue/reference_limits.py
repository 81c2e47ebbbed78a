"""Closed-form limiting quantities used as oracles.

The standard-normal CDF is computed via the C library's erfc, itself a
rational (continued-fraction style) approximation accurate to a few ulps;
the test suite cross-checks it against high-precision quadrature at twenty
reference points, since every oracle here routes through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import estimates
from .estimates import BoundEstimate


def std_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.vectorize(math.erfc)(-x / math.sqrt(2.0))
    return float(out) if out.shape == () else out


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x ** 2) / math.sqrt(2.0 * math.pi)
    return float(out) if out.shape == () else out


def alpha(x: float) -> float:
    """Limit delay probability for exponential service at excess x:
    (1 + x Phi(x) / phi(x))^-1, decreasing from 1 at x = 0."""
    if x < 0:
        raise ValueError("need x >= 0")
    if x == 0.0:
        return 1.0
    return 1.0 / (1.0 + x * std_normal_cdf(x) / std_normal_pdf(x))


def h2star_limits(B: float, x: float, p: float, cA2: float, cS2: float):
    """Limit tails for service = exponential thinned by an atom at zero.

    With z = p (cA2 + cS2) / 2:
      upper = alpha(B z^-1/2) exp(-B p x / z)          for P((Q-n)/sqrt(n) >= x)
      lower = (1 - alpha(B z^-1/2)) Phi((B-x) z^-1/2) / Phi(B z^-1/2)
                                                        for P((Q-n)/sqrt(n) <= -x)
    At x = 0 the two sum to one.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError("need p in (0, 1]")
    if B <= 0 or x < 0:
        raise ValueError("need B > 0 and x >= 0")
    z = 0.5 * p * (cA2 + cS2)
    a = alpha(B / math.sqrt(z))
    upper = a * math.exp(-B * p * x / z)
    lower = (1.0 - a) * std_normal_cdf((B - x) / math.sqrt(z)) / std_normal_cdf(
        B / math.sqrt(z)
    )
    return upper, lower


def gid_limit_mc(
    B: float,
    cA2: float,
    x: float,
    reps: int = 20000,
    max_steps: int = None,
    rng=None,
    seed: int = 0,
) -> BoundEstimate:
    """P(sup_{i >= 1} S_i >= x) for the Gaussian walk with step mean -B and
    variance cA2 (the deterministic-service limit law).

    A path stops once its value has dropped 12 sqrt(cA2) / B below the
    running maximum: by the drifted-supremum law the probability of a later
    record is then below exp(-2 * 12) < 1e-10.
    """
    if B <= 0 or cA2 <= 0:
        raise ValueError("need B > 0 and cA2 > 0")
    if x < 0:
        raise ValueError("x >= 0 only: for x < 0 the event includes the ambiguous "
                         "empty-supremum convention")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
    drop = 12.0 * math.sqrt(cA2) / B
    if max_steps is None:
        max_steps = 40 * (1 + int(drop / B))
    sd = math.sqrt(cA2)
    hits = np.zeros(reps, dtype=bool)
    chunk_paths = max(128, min(reps, 4000))
    done = 0
    while done < reps:
        m = min(chunk_paths, reps - done)
        val = np.zeros(m)
        best = np.full(m, -np.inf)
        active = np.arange(m)
        block = np.zeros(m, dtype=bool)
        steps = 0
        while active.size and steps < max_steps:
            ns = min(512, max_steps - steps)
            incr = rng.normal(-B, sd, size=(active.size, ns))
            path = val[active, None] + np.cumsum(incr, axis=1)
            runmax = np.maximum.accumulate(path, axis=1)
            best_new = np.maximum(best[active], runmax[:, -1])
            reached = best_new >= x
            block[active] |= reached
            val[active] = path[:, -1]
            best[active] = best_new
            stopped = reached | (path[:, -1] < np.maximum(best_new, x) - drop)
            active = active[~stopped]
            steps += ns
        hits[done : done + m] = block
        done += m
    return estimates.from_indicators(hits, label=f"gid(B={B:g},x={x:g})")


def mginf_bound(B: float, x: float) -> float:
    """Infinite-server comparison value Phi(B - x) for Poisson arrivals."""
    if B <= 0 or x < 0:
        raise ValueError("need B > 0 and x >= 0")
    return float(std_normal_cdf(B - x))


@dataclass(frozen=True)
class ScalingConstants:
    """Asymptotic rates: B^-2 log of the delay tail, B^-1 scale of the
    no-delay probability, x^-2 log of the idle tail."""

    large_B_rate: float
    small_B_rate: float
    idle_tail_rate: float

    def __post_init__(self):
        if not self.large_B_rate < 0:
            raise ValueError("large_B_rate must be negative")
        if not self.small_B_rate > 0:
            raise ValueError("small_B_rate must be positive")
        if not self.idle_tail_rate < 0:
            raise ValueError("idle_tail_rate must be negative")


def scaling_constants(model: str, **params) -> ScalingConstants:
    """Closed-form rate constants for the two solvable service families.

    h2star(p, cA2, cS2): (-(p(cA2+cS2))^-1, sqrt(pi) (p(cA2+cS2))^-1/2,
                          -(p(cA2+cS2))^-1)
    deterministic(cA2):  (-(2 cA2)^-1, sqrt(2)/sqrt(cA2), -(2 cA2)^-1)
    """
    if model == "h2star":
        p, cA2, cS2 = params["p"], params["cA2"], params["cS2"]
        if not (0 < p <= 1):
            raise ValueError("need p in (0, 1]")
        v = p * (cA2 + cS2)
        if v <= 0:
            raise ValueError("need p (cA2 + cS2) > 0")
        return ScalingConstants(-1.0 / v, math.sqrt(math.pi) / math.sqrt(v), -1.0 / v)
    if model == "deterministic":
        cA2 = params["cA2"]
        if cA2 <= 0:
            raise ValueError("need cA2 > 0")
        return ScalingConstants(
            -1.0 / (2.0 * cA2), math.sqrt(2.0) / math.sqrt(cA2), -1.0 / (2.0 * cA2)
        )
    raise ValueError(f"unknown model {model!r} (h2star or deterministic)")
