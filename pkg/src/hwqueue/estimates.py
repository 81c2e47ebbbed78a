"""Probability estimates with replication-based confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class BoundEstimate:
    """A Monte Carlo probability estimate with a two-sided 95% CI.

    Invariant: 0 <= ci_low <= point <= ci_high <= 1.
    """

    point: float
    stderr: float
    ci_low: float
    ci_high: float
    replications: int
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not (0.0 <= self.point <= 1.0):
            raise ValueError(f"point {self.point} outside [0, 1]")
        if not (0.0 <= self.ci_low <= self.point <= self.ci_high <= 1.0):
            raise ValueError(
                f"CI not well ordered: [{self.ci_low}, {self.point}, {self.ci_high}]"
            )
        if self.stderr < 0.0:
            raise ValueError("stderr must be nonnegative")

    def __str__(self):
        tag = f" ({self.label})" if self.label else ""
        return (
            f"{self.point:.6f} +- {self.stderr:.6f} "
            f"[{self.ci_low:.6f}, {self.ci_high:.6f}] n={self.replications}{tag}"
        )


def from_rep_means(means, label="", level=0.95) -> BoundEstimate:
    """Build an estimate from per-replication means via a t-interval.

    With fewer than 2 replications the CI degenerates to [0, 1].
    """
    means = np.asarray(means, dtype=float)
    r = means.size
    point = float(np.mean(means))
    point = min(1.0, max(0.0, point))
    if r < 2:
        return BoundEstimate(point, 0.0, 0.0, 1.0, r, label)
    stderr = float(np.std(means, ddof=1) / math.sqrt(r))
    tcrit = float(stats.t.ppf(0.5 + level / 2.0, df=r - 1))
    lo = max(0.0, min(point, point - tcrit * stderr))
    hi = min(1.0, max(point, point + tcrit * stderr))
    return BoundEstimate(point, stderr, lo, hi, r, label)


def from_indicators(indicators, label="", level=0.95) -> BoundEstimate:
    """Build an estimate from Bernoulli indicators (one per replication)."""
    x = np.asarray(indicators, dtype=float)
    r = x.size
    p = float(np.mean(x)) if r else 0.0
    p = min(1.0, max(0.0, p))
    stderr = math.sqrt(p * (1.0 - p) / r) if r else 0.0
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    lo = max(0.0, min(p, p - z * stderr))
    hi = min(1.0, max(p, p + z * stderr))
    return BoundEstimate(p, stderr, lo, hi, r, label)
