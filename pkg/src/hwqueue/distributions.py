"""Parametric inter-arrival and service time distributions.

Each family carries closed-form moments, an i.i.d. sampler, and the
stationary-excess (residual life) distribution

    P(R(X) > z) = E[X]^-1 * integral_z^inf P(X > y) dy,

with family-specific closed forms where available and inverse-CDF
bisection on the integrated tail otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class DistributionError(ValueError):
    """Invalid distribution parameters."""


@dataclass(frozen=True)
class Moments:
    """First three moments plus derived variance and squared c.v."""

    mean: float
    second_moment: float
    third_moment: float  # math.inf for families lacking it

    def __post_init__(self):
        if not (self.mean > 0.0 and math.isfinite(self.mean)):
            raise DistributionError("mean must be finite and strictly positive")
        if self.second_moment < self.mean ** 2:
            raise DistributionError("second moment below mean^2")

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean ** 2

    @property
    def scv(self) -> float:
        return self.variance / self.mean ** 2


class Distribution:
    """Base class; subclasses are frozen dataclasses, safe to share."""

    family = "base"

    # -- contract -------------------------------------------------------
    def moments(self) -> Moments:
        raise NotImplementedError

    def sample(self, rng, size=None):
        raise NotImplementedError

    def tail(self, x):
        """P(X > x), vectorized."""
        raise NotImplementedError

    def residual_tail(self, z):
        raise NotImplementedError

    def residual_sample(self, rng, size=None):
        return _residual_sample_bisect(self, rng, size)

    def scaled(self, factor: float) -> "Distribution":
        """Distribution of factor * X."""
        raise NotImplementedError

    def quantile(self, q: float) -> float:
        raise NotImplementedError

    # -- shared ---------------------------------------------------------
    #: probability mass at zero (nonzero only for H2Star)
    zero_atom = 0.0

    @property
    def rate(self) -> float:
        return 1.0 / self.moments().mean

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def residual_cdf(self, z):
        return 1.0 - self.residual_tail(z)

    @property
    def supports_t0(self) -> bool:
        """Whether P(X = 0) = 0, as the steady-state theory requires."""
        return self.zero_atom == 0.0

    def to_config(self) -> dict:
        return to_config(self)

    def __str__(self):
        params = ", ".join(
            f"{k}={getattr(self, k)}" for k in self.__dataclass_fields__
        )
        return f"{self.family}({params})"


def _positive(name, value):
    if not (value > 0.0 and math.isfinite(value)):
        raise DistributionError(f"{name} must be a positive finite real, got {value}")


@dataclass(frozen=True)
class Exponential(Distribution):
    rate_: float

    family = "exponential"

    def __post_init__(self):
        _positive("rate", self.rate_)

    def moments(self):
        r = self.rate_
        return Moments(1.0 / r, 2.0 / r ** 2, 6.0 / r ** 3)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate_, size=size)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, np.exp(-self.rate_ * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, self.rate_ * np.exp(-self.rate_ * np.maximum(x, 0.0)))

    def residual_tail(self, z):
        # memoryless: R(X) has the same law
        return self.tail(z)

    def residual_sample(self, rng, size=None):
        return self.sample(rng, size)

    def scaled(self, factor):
        return Exponential(self.rate_ / factor)

    def quantile(self, q):
        return -math.log1p(-q) / self.rate_


@dataclass(frozen=True)
class Deterministic(Distribution):
    value: float

    family = "deterministic"

    def __post_init__(self):
        _positive("value", self.value)

    def moments(self):
        c = self.value
        return Moments(c, c ** 2, c ** 3)

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.value, 1.0, 0.0)

    def residual_tail(self, z):
        # R(X) ~ Uniform[0, c]
        z = np.asarray(z, dtype=float)
        return np.clip((self.value - z) / self.value, 0.0, 1.0)

    def residual_sample(self, rng, size=None):
        return rng.uniform(0.0, self.value, size=size)

    def scaled(self, factor):
        return Deterministic(self.value * factor)

    def quantile(self, q):
        return self.value


@dataclass(frozen=True)
class H2Star(Distribution):
    """Mixture of Exponential(p * rate) w.p. p and a point mass at 0 w.p. 1-p.

    E[X] = 1/rate regardless of p.  Violates the P(X = 0) = 0 assumption of
    the steady-state theory, so it is flagged reference-limit-only; the queue
    simulator rejects it unless explicitly overridden.
    """

    p: float
    rate_: float

    family = "h2star"

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise DistributionError(f"p must lie in (0, 1], got {self.p}")
        _positive("rate", self.rate_)

    @property
    def zero_atom(self):
        return 1.0 - self.p

    @property
    def branch_rate(self):
        return self.p * self.rate_

    def moments(self):
        r, p = self.rate_, self.p
        return Moments(1.0 / r, 2.0 / (p * r ** 2), 6.0 / (p ** 2 * r ** 3))

    def sample(self, rng, size=None):
        exp = rng.exponential(1.0 / self.branch_rate, size=size)
        keep = rng.uniform(size=size) < self.p
        return np.where(keep, exp, 0.0) if size is not None else (exp if keep else 0.0)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, self.p * np.exp(-self.branch_rate * np.maximum(x, 0.0)))

    def residual_tail(self, z):
        # integrated tail of the mixture: R(X) ~ Exponential(p * rate)
        z = np.asarray(z, dtype=float)
        return np.where(z < 0, 1.0, np.exp(-self.branch_rate * np.maximum(z, 0.0)))

    def residual_sample(self, rng, size=None):
        return rng.exponential(1.0 / self.branch_rate, size=size)

    def scaled(self, factor):
        return H2Star(self.p, self.rate_ / factor)

    def quantile(self, q):
        if q <= self.zero_atom:
            return 0.0
        return -math.log((1.0 - q) / self.p) / self.branch_rate


@dataclass(frozen=True)
class HyperExponential(Distribution):
    weights: tuple
    rates: tuple

    family = "hyperexponential"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.weights) != len(self.rates) or not self.weights:
            raise DistributionError("weights and rates must be nonempty, equal length")
        for w in self.weights:
            _positive("weight", w)
        for r in self.rates:
            _positive("rate", r)
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise DistributionError("weights must sum to 1")

    def moments(self):
        w = np.array(self.weights)
        r = np.array(self.rates)
        return Moments(
            float(np.sum(w / r)),
            float(np.sum(2.0 * w / r ** 2)),
            float(np.sum(6.0 * w / r ** 3)),
        )

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        comp = rng.choice(len(self.rates), size=n, p=self.weights)
        out = rng.exponential(1.0, size=n) / np.array(self.rates)[comp]
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def tail(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        w = np.array(self.weights)
        r = np.array(self.rates)
        t = np.sum(w * np.exp(-r * np.maximum(x, 0.0)), axis=-1)
        return np.where(np.asarray(x)[..., 0] < 0, 1.0, t)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        w = np.array(self.weights)
        r = np.array(self.rates)
        d = np.sum(w * r * np.exp(-r * np.maximum(x, 0.0)), axis=-1)
        return np.where(np.asarray(x)[..., 0] < 0, 0.0, d)

    def _residual_weights(self):
        w = np.array(self.weights)
        r = np.array(self.rates)
        q = w / r
        return q / q.sum()

    def residual_tail(self, z):
        z = np.asarray(z, dtype=float)[..., None]
        q = self._residual_weights()
        r = np.array(self.rates)
        t = np.sum(q * np.exp(-r * np.maximum(z, 0.0)), axis=-1)
        return np.where(np.asarray(z)[..., 0] < 0, 1.0, t)

    def residual_sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        comp = rng.choice(len(self.rates), size=n, p=self._residual_weights())
        out = rng.exponential(1.0, size=n) / np.array(self.rates)[comp]
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def scaled(self, factor):
        return HyperExponential(self.weights, tuple(r / factor for r in self.rates))

    def quantile(self, q):
        lo, hi = 0.0, 1.0
        while self.tail(hi) > 1.0 - q:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < q:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Erlang(Distribution):
    shape: int
    rate_: float

    family = "erlang"

    def __post_init__(self):
        if not (isinstance(self.shape, (int, np.integer)) and self.shape >= 1):
            raise DistributionError(f"shape must be a positive integer, got {self.shape}")
        _positive("rate", self.rate_)

    def moments(self):
        k, r = self.shape, self.rate_
        return Moments(k / r, k * (k + 1) / r ** 2, k * (k + 1) * (k + 2) / r ** 3)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate_, size=size)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, special.gammaincc(self.shape, self.rate_ * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xm = np.maximum(x, 0.0)
        k, r = self.shape, self.rate_
        d = r ** k * xm ** (k - 1) * np.exp(-r * xm) / math.factorial(k - 1)
        return np.where(x < 0, 0.0, d)

    def residual_tail(self, z):
        # equilibrium law is an equal mixture of Erlang(j, rate), j = 1..k
        z = np.asarray(z, dtype=float)
        zm = self.rate_ * np.maximum(z, 0.0)
        t = np.mean([special.gammaincc(j, zm) for j in range(1, self.shape + 1)], axis=0)
        return np.where(z < 0, 1.0, t)

    def residual_sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        j = rng.integers(1, self.shape + 1, size=n)
        out = rng.gamma(j, 1.0 / self.rate_)
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def scaled(self, factor):
        return Erlang(self.shape, self.rate_ / factor)

    def quantile(self, q):
        return float(special.gammaincinv(self.shape, q) / self.rate_)


@dataclass(frozen=True)
class LogNormal(Distribution):
    log_mean: float
    log_sd: float

    family = "lognormal"

    def __post_init__(self):
        if not math.isfinite(self.log_mean):
            raise DistributionError("log_mean must be finite")
        _positive("log_sd", self.log_sd)

    def moments(self):
        m, s = self.log_mean, self.log_sd
        return Moments(
            math.exp(m + 0.5 * s ** 2),
            math.exp(2 * m + 2 * s ** 2),
            math.exp(3 * m + 4.5 * s ** 2),
        )

    def sample(self, rng, size=None):
        return rng.lognormal(self.log_mean, self.log_sd, size=size)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.log_mean) / self.log_sd
        return np.where(x <= 0, 1.0, _norm_sf(z))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xm = np.maximum(x, 1e-300)
        z = (np.log(xm) - self.log_mean) / self.log_sd
        d = np.exp(-0.5 * z ** 2) / (xm * self.log_sd * math.sqrt(2 * math.pi))
        return np.where(x <= 0, 0.0, d)

    def residual_tail(self, z):
        # E[(X - z)^+] / E[X] via the lognormal partial expectation
        z = np.asarray(z, dtype=float)
        m, s = self.log_mean, self.log_sd
        mean = math.exp(m + 0.5 * s ** 2)
        lz = np.log(np.maximum(z, 1e-300))
        d1 = (m + s ** 2 - lz) / s
        d2 = (m - lz) / s
        t = _norm_cdf(d1) - np.asarray(z) / mean * _norm_cdf(d2)
        return np.where(z <= 0, 1.0, np.clip(t, 0.0, 1.0))

    def scaled(self, factor):
        return LogNormal(self.log_mean + math.log(factor), self.log_sd)

    def quantile(self, q):
        z = math.sqrt(2.0) * special.erfinv(2.0 * q - 1.0)
        return math.exp(self.log_mean + self.log_sd * z)


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float

    family = "uniform"

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise DistributionError(f"need 0 <= lo < hi, got [{self.lo}, {self.hi}]")

    def moments(self):
        a, b = self.lo, self.hi
        mk = lambda k: (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))
        return Moments(mk(1), mk(2), mk(3))

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size=size)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((self.hi - x) / (self.hi - self.lo), 0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    def residual_tail(self, z):
        a, b = self.lo, self.hi
        mean = 0.5 * (a + b)
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, 0.0, b)
        # integral of the tail from z to infinity, piecewise in z
        integ = np.where(
            zc <= a,
            (a - zc) + 0.5 * (b - a),
            (b - zc) ** 2 / (2.0 * (b - a)),
        )
        return np.where(z < 0, 1.0, np.clip(integ / mean, 0.0, 1.0))

    def scaled(self, factor):
        return Uniform(self.lo * factor, self.hi * factor)

    def quantile(self, q):
        return self.lo + q * (self.hi - self.lo)


def _norm_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def _norm_sf(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _residual_sample_bisect(dist, rng, size=None, tol=1e-9):
    """Inverse-CDF sampling of the residual law by bisection.

    The integrated tail is monotone, so bisection on residual_cdf is
    unconditionally safe.  Bracket starts at the 1 - 1e-6 quantile of X and
    doubles until it covers the requested uniforms.
    """
    scalar = size is None
    u = rng.uniform(size=1 if scalar else size)
    u = np.atleast_1d(u)
    hi0 = max(dist.quantile(0.999999), dist.moments().mean)
    while dist.residual_cdf(hi0) < u.max():
        hi0 *= 2.0
    lo = np.zeros_like(u)
    hi = np.full_like(u, hi0)
    while (hi - lo).max() > tol:
        mid = 0.5 * (lo + hi)
        below = dist.residual_cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return float(out[0]) if scalar else out.reshape(size)


_FAMILIES = {
    "exponential": Exponential,
    "deterministic": Deterministic,
    "h2star": H2Star,
    "hyperexponential": HyperExponential,
    "erlang": Erlang,
    "lognormal": LogNormal,
    "uniform": Uniform,
}

#: config key -> constructor argument, per family
_CONFIG_KEYS = {
    "exponential": {"rate": "rate_"},
    "deterministic": {"value": "value"},
    "h2star": {"p": "p", "rate": "rate_"},
    "hyperexponential": {"weights": "weights", "rates": "rates"},
    "erlang": {"shape": "shape", "rate": "rate_"},
    "lognormal": {"log_mean": "log_mean", "log_sd": "log_sd"},
    "uniform": {"lo": "lo", "hi": "hi"},
}


def from_config(config: dict) -> Distribution:
    """Build a distribution from a JSON-style dict, e.g.

    {"family": "h2star", "p": 0.5, "rate": 1.0}
    """
    if not isinstance(config, dict) or "family" not in config:
        raise DistributionError(f"config must be a dict with a 'family' key: {config!r}")
    family = config["family"]
    if family not in _FAMILIES:
        raise DistributionError(
            f"unknown family {family!r}; known: {sorted(_FAMILIES)}"
        )
    keymap = _CONFIG_KEYS[family]
    extra = set(config) - set(keymap) - {"family"}
    if extra:
        raise DistributionError(f"unknown keys for {family}: {sorted(extra)}")
    missing = set(keymap) - set(config)
    if missing:
        raise DistributionError(f"missing keys for {family}: {sorted(missing)}")
    kwargs = {}
    for key, arg in keymap.items():
        v = config[key]
        if isinstance(v, list):
            v = tuple(v)
        if arg == "shape":
            v = int(v)
        kwargs[arg] = v
    return _FAMILIES[family](**kwargs)


def to_config(dist: Distribution) -> dict:
    keymap = _CONFIG_KEYS[dist.family]
    out = {"family": dist.family}
    for key, arg in keymap.items():
        v = getattr(dist, arg)
        if isinstance(v, tuple):
            v = list(v)
        out[key] = v
    return out


# thin functional surface mirroring the operation names
def moments(spec: Distribution) -> Moments:
    return spec.moments()


def sample(spec: Distribution, rng, size=None):
    return spec.sample(rng, size)


def residual_sample(spec: Distribution, rng, size=None):
    return spec.residual_sample(rng, size)


def residual_cdf(spec: Distribution, z):
    return spec.residual_cdf(z)
