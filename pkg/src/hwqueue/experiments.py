"""Config-driven experiment runner producing deterministic CSV artifacts.

Every artifact starts with '#'-prefixed metadata lines (toolkit version,
config hash, seed) followed by an RFC-4180 body.  Runs are deterministic
given (config, seed): each cell owns an rng stream derived from the seed and
its index, so thread scheduling cannot change results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, bounding, diffusions, gaussian_limit, queue_sim, reference_limits
from . import distributions as dists
from . import renewal
from .queue_sim import ConfigError, FeasibilityError, StabilityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_INVARIANT = 4

KINDS = (
    "validate",
    "simulate",
    "bound",
    "gaussian",
    "scaling_large_B",
    "scaling_small_B",
    "idle_tail",
    "compare",
)


class InvariantViolation(RuntimeError):
    """A validate-mode check failed."""


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    params: dict
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
        if "seed" not in data:
            raise ConfigError("seed is mandatory")
        try:
            seed = int(data["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {data['seed']!r}")
        params = {k: v for k, v in data.items() if k not in ("kind", "seed")}
        return cls(kind, seed, params, data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        return cls.from_dict(data)

    def sha256(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _spec(params, key) -> dists.Distribution:
    if key not in params:
        raise ConfigError(f"missing distribution config {key!r}")
    try:
        return dists.from_config(params[key])
    except dists.DistributionError as exc:
        raise ConfigError(f"{key}: {exc}")


def _hw_config(params, seed, **overrides) -> queue_sim.HwConfig:
    eff = dict(params)
    eff.update(overrides)
    for key in ("spec_A", "spec_S"):
        if not isinstance(eff.get(key), dists.Distribution):
            eff[key] = _spec(eff, key)
    try:
        return queue_sim.HwConfig(
            n=int(eff["n"]),
            B=float(eff["B"]),
            spec_A=eff["spec_A"],
            spec_S=eff["spec_S"],
            horizon=float(eff["horizon"]),
            warmup=eff.get("warmup"),
            replications=int(eff.get("replications", 8)),
            seed=seed,
            allow_zero_service=bool(eff.get("allow_zero_service", False)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing field {exc}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _write_csv(path_or_buf, header_meta, columns, rows):
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        for k, v in header_meta:
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def run(config: ExperimentConfig, out_path=None, threads: int = 1) -> int:
    """Execute one experiment; returns the exit status."""
    runner = _RUNNERS[config.kind]
    columns, rows, violations = runner(config, threads)
    meta = [
        ("hwqueue_version", __version__),
        ("config_sha256", config.sha256()),
        ("seed", config.seed),
        ("kind", config.kind),
    ]
    if out_path is not None:
        _write_csv(out_path, meta, columns, rows)
    else:
        buf = io.StringIO()
        _write_csv(buf, meta, columns, rows)
        print(buf.getvalue(), end="")
    return EXIT_INVARIANT if violations else EXIT_OK


# --- validate ---------------------------------------------------------------

def _run_validate(config: ExperimentConfig, threads: int):
    """Fast oracle suite; any failed check flips the exit status."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed]))
    checks = []

    def check(name, value, expect, tol):
        checks.append((name, value, expect, tol, abs(value - expect) <= tol))

    check("erlang_c(2,1,1)", queue_sim.erlang_c(2, 1.0, 1.0), 1.0 / 3.0, 1e-12)
    check("alpha(0)", reference_limits.alpha(0.0), 1.0, 1e-15)
    check("alpha(1)", reference_limits.alpha(1.0), 0.2233612748, 1e-9)
    up, low = reference_limits.h2star_limits(1.5, 0.0, 0.7, 1.0, 1.0)
    check("h2star complement at x=0", up + low, 1.0, 1e-12)

    grid = renewal.renewal_function(dists.Exponential(1.0), 10.0)
    check("renewal f==0 (exponential)", float(np.max(np.abs(grid.f))), 0.0, 1e-3)
    check(
        "equilibrium cov det(1) (0.5,1.5)",
        float(renewal.equilibrium_cov(dists.Deterministic(1.0), 0.5, 1.5)),
        0.25,
        1e-9,
    )

    sup = diffusions.bm_sup_sample(1.0, 0.0, 0.05, rng, 20000)
    p = float(np.mean(sup > 1.0))
    check("bm sup tail MC", p, diffusions.bm_sup_tail(1.0, 1.0), 4 * 0.0033)

    rep = gaussian_limit.verify_slepian_domination(
        dists.Exponential(1.0), dists.Exponential(1.0)
    )
    check("slepian margin (M/M)", min(rep.min_domination_margin, 0.0), 0.0, 1e-6)

    cfg = queue_sim.HwConfig(
        n=5, B=1.0, spec_A=dists.Exponential(1.0), spec_S=dists.Exponential(1.0),
        horizon=820.0, warmup=20.0, replications=8, seed=config.seed,
    )
    est = queue_sim.estimate_delay_prob(cfg)
    check(
        "M/M/5 delay vs erlang_c",
        est.point,
        queue_sim.erlang_c(5, cfg.lam),
        max(0.04, 5 * est.stderr),
    )

    columns = ["check", "value", "expect", "tol", "status"]
    rows = [
        (name, value, expect, tol, "pass" if ok else "FAIL")
        for name, value, expect, tol, ok in checks
    ]
    violations = sum(0 if ok else 1 for *_, ok in checks)
    return columns, rows, violations


# --- simulate ----------------------------------------------------------------

def _run_simulate(config: ExperimentConfig, threads: int):
    cfg = _hw_config(config.params, config.seed)
    trace = queue_sim.simulate_queue(cfg, cfg.rep_rng(0))
    columns = ["time", "q", "busy"]
    rows = [
        (t, int(q), int(min(q, cfg.n)))
        for t, q in zip(trace.times, trace.values)
    ]
    return columns, rows, 0


# --- bound -------------------------------------------------------------------

def _run_bound(config: ExperimentConfig, threads: int):
    p = config.params
    query = bounding.BoundQuery(
        x=float(p["x"]),
        n=int(p["n"]),
        B=float(p["B"]) if "B" in p else None,
        lam=float(p["lam"]) if "lam" in p else None,
        delta_grid=p.get("delta_grid"),
        eta_grid=p.get("eta_grid"),
        horizon_T=p.get("horizon_T"),
        replications=int(p.get("replications", 400)),
        seed=config.seed,
    )
    res = bounding.theorem4_bound(query, _spec(p, "spec_A"), _spec(p, "spec_S"))
    columns = ["delta", "eta", "estimate", "stderr", "ci_high"]
    rows = [
        (c.delta, c.eta, c.estimate.point, c.estimate.stderr, c.estimate.ci_high)
        for c in res.cells
    ]
    rows.append(("min", res.minimum.label.split(",")[1],
                 res.minimum.point, res.minimum.stderr,
                 res.minimum_adjusted.ci_high))
    return columns, rows, 0


# --- gaussian ----------------------------------------------------------------

def _run_gaussian(config: ExperimentConfig, threads: int):
    p = config.params
    spec_A = _spec(p, "spec_A")
    spec_S = _spec(p, "spec_S")
    horizon = float(p.get("horizon", 20.0))
    ppm = int(p.get("points_per_mean", 20))
    grid = gaussian_limit.default_grid(spec_S, horizon, ppm)
    covgrid = gaussian_limit.build_Z_cov(spec_A, spec_S, grid)
    reps = int(p.get("replications", 4000))
    B = float(p["B"])
    x = float(p["x"])
    rows = []
    if "delta" in p or "eta" in p:
        delta = float(p.get("delta", 0.0))
        snapped = float(grid[int(np.argmin(np.abs(grid - delta)))])
        q = gaussian_limit.LimitEventQuery(
            B=B, x=x, delta=snapped, eta=float(p.get("eta", 0.0)),
            replications=reps, seed=config.seed,
        )
        est = gaussian_limit.estimate_limit_event(q, covgrid, spec_S)
        rows.append(("limit_event", snapped, q.eta, est.point, est.stderr, est.ci_high))
    est = gaussian_limit.corollary_bound(B, x, covgrid, reps, config.seed)
    rows.append(("corollary", "", 0.5 * B, est.point, est.stderr, est.ci_high))
    if p.get("dump_cov"):
        _write_csv(
            p["dump_cov"],
            [("hwqueue_version", __version__), ("jitter", covgrid.jitter)],
            ["t"] + [f"{t:.10g}" for t in covgrid.grid],
            [(t, *row) for t, row in zip(covgrid.grid, covgrid.cov)],
        )
    columns = ["bound", "delta", "eta", "estimate", "stderr", "ci_high"]
    return columns, rows, 0


# --- scaling studies ----------------------------------------------------------

def _delay_probability(p, seed, n, B, threads) -> tuple:
    """(estimate, stderr) for the s.s.p.d., exact for the Markovian model."""
    method = p.get("method", "auto")
    spec_A = _spec(p, "spec_A")
    spec_S = _spec(p, "spec_S")
    markovian = spec_A.family == "exponential" and spec_S.family == "exponential"
    if method == "auto":
        method = "erlang_c" if markovian else "simulate"
    if method == "erlang_c":
        if not markovian:
            raise ConfigError("erlang_c method needs exponential A and S")
        lam = queue_sim.hw_rate(n, B)
        return queue_sim.erlang_c(n, lam), 0.0
    cfg = _hw_config(p, seed, n=n, B=B)
    est = queue_sim.estimate_delay_prob(cfg)
    return est.point, est.stderr


def _bootstrap_slope(xs, ys, rng, reps=1000):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope = np.polyfit(xs, ys, 1)[0]
    n = xs.size
    boot = np.empty(reps)
    for k in range(reps):
        idx = rng.integers(0, n, size=n)
        if np.unique(xs[idx]).size < 2:
            boot[k] = slope
            continue
        boot[k] = np.polyfit(xs[idx], ys[idx], 1)[0]
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return float(slope), float(lo), float(hi)


def _run_scaling_large_B(config: ExperimentConfig, threads: int):
    p = config.params
    n = int(p["n"])
    b_grid = [float(b) for b in p.get("B_grid", (1.0, 1.5, 2.0, 2.5))]
    rows = []
    log_ps = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futs = [
            pool.submit(_delay_probability, p, config.seed + i, n, b, threads)
            for i, b in enumerate(b_grid)
        ]
        for b, fut in zip(b_grid, futs):
            est, se = fut.result()
            if est <= 0:
                raise InvariantViolation(f"nonpositive delay estimate at B={b}")
            rows.append(("cell", b, b * b, est, math.log(est), "", "", ""))
            log_ps.append(math.log(est))
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 999]))
    slope, lo, hi = _bootstrap_slope([b * b for b in b_grid], log_ps, rng)
    rows.append(("fit", "", "", "", "", slope, lo, hi))
    columns = ["row", "B", "B2", "estimate", "log_estimate", "slope", "slope_lo", "slope_hi"]
    return columns, rows, 0


def _run_scaling_small_B(config: ExperimentConfig, threads: int):
    p = config.params
    n = int(p["n"])
    b_grid = [float(b) for b in p.get("B_grid", (0.05, 0.1, 0.2))]
    rows = []
    ratios = []
    for i, b in enumerate(b_grid):
        est, se = _delay_probability(p, config.seed + i, n, b, threads)
        no_delay = 1.0 - est
        ratios.append(no_delay / b)
        rows.append(("cell", b, no_delay, no_delay / b))
    spread = (max(ratios) - min(ratios)) / max(ratios)
    rows.append(("spread", "", "", spread))
    columns = ["row", "B", "no_delay", "ratio"]
    return columns, rows, 0


def _run_idle_tail(config: ExperimentConfig, threads: int):
    p = config.params
    cfg = _hw_config(p, config.seed)
    xs = [float(x) for x in p.get("x_grid", (1.0, 2.0))]
    rows = []
    for x in xs:
        est = queue_sim.estimate_idle_tail(cfg, x)
        bound = reference_limits.mginf_bound(cfg.B, x)
        rows.append((x, est.point, est.stderr, est.ci_high, bound))
    columns = ["x", "estimate", "stderr", "ci_high", "phi_bound"]
    return columns, rows, 0


# --- compare ------------------------------------------------------------------

_COMPARE_MODELS = ("mm", "h2star", "gid", "mginf")


def _closed_form_column(model, p, B, x, seed):
    if model == "mm":
        up, _ = reference_limits.h2star_limits(B, x, 1.0, 1.0, 1.0)
        return up
    if model == "h2star":
        spec_S = _spec(p, "spec_S")
        spec_A = _spec(p, "spec_A")
        return reference_limits.h2star_limits(
            B, x, spec_S.p, spec_A.moments().scv, spec_S.moments().scv
        )[0]
    if model == "gid":
        spec_A = _spec(p, "spec_A")
        return reference_limits.gid_limit_mc(
            B, spec_A.moments().scv, x, reps=int(p.get("gid_reps", 20000)), seed=seed
        ).point
    if model == "mginf":
        # infinite-server CLT comparator: a lower bound on the tail
        return float(reference_limits.std_normal_cdf(-(x + B)))
    raise ConfigError(f"model must be one of {_COMPARE_MODELS}")


def _run_compare(config: ExperimentConfig, threads: int):
    p = config.params
    model = p.get("model")
    if model not in _COMPARE_MODELS:
        raise ConfigError(f"model must be one of {_COMPARE_MODELS}, got {model!r}")
    n = int(p["n"])
    cells = [(float(b), float(x)) for b, x in p.get("grid", ((1.0, 0.0),))]
    spec_A = _spec(p, "spec_A")
    spec_S = _spec(p, "spec_S")
    horizon = float(p.get("gaussian_horizon", 20.0))
    rows = []
    for i, (B, x) in enumerate(cells):
        cfg = _hw_config(p, config.seed + i, B=B)
        threshold = cfg.n + x * math.sqrt(cfg.n)
        sim = queue_sim.estimate_delay_prob(cfg) if x == 0.0 else None
        if sim is None:
            means = []
            for rep in range(cfg.replications):
                tr = queue_sim.simulate_queue(cfg, cfg.rep_rng(rep))
                means.append(
                    tr.time_fraction(lambda q: q >= threshold, cfg.warmup, cfg.horizon)
                )
            from . import estimates as est_mod

            sim = est_mod.from_rep_means(means)
        query = bounding.BoundQuery(
            x=threshold, n=n, B=B,
            replications=int(p.get("bound_replications", 300)),
            seed=config.seed + 100 + i,
        )
        t4 = bounding.theorem4_bound(query, spec_A, spec_S).minimum
        grid = gaussian_limit.default_grid(spec_S, min(horizon, 50.0 / B ** 2))
        covgrid = gaussian_limit.build_Z_cov(spec_A, spec_S, grid)
        gb = gaussian_limit.corollary_bound(
            B, x, covgrid, int(p.get("gaussian_replications", 4000)), config.seed + i
        )
        closed = _closed_form_column(model, p, B, x, config.seed + i)
        rows.append(
            (B, x, sim.point, sim.stderr, t4.point, gb.point, closed)
        )
    columns = ["B", "x", "simulated", "sim_stderr", "theorem4_bound",
               "gaussian_bound", "closed_form"]
    return columns, rows, 0


def compare_table(config: ExperimentConfig):
    """Side-by-side columns (simulated, grid bound, limit bound, closed form)
    per (B, x) cell; returns (columns, rows)."""
    if config.kind != "compare":
        raise ConfigError("compare_table needs a config of kind 'compare'")
    columns, rows, _ = _run_compare(config, threads=1)
    return columns, rows


_RUNNERS = {
    "validate": _run_validate,
    "simulate": _run_simulate,
    "bound": _run_bound,
    "gaussian": _run_gaussian,
    "scaling_large_B": _run_scaling_large_B,
    "scaling_small_B": _run_scaling_small_B,
    "idle_tail": _run_idle_tail,
    "compare": _run_compare,
}
