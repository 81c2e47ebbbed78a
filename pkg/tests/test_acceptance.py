"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Tolerances are pinned here exactly as stated; nothing is calibrated at run
time.  Statistical criteria use fixed seeds so the suite is reproducible.
"""

import math

import numpy as np
import pytest
from scipy import stats

from hwqueue import bounding as bd
from hwqueue import diffusions as df
from hwqueue import distributions as d
from hwqueue import gaussian_limit as gl
from hwqueue import queue_sim as qs
from hwqueue import reference_limits as rl
from hwqueue import renewal as rn

import oracles

EXP1 = d.Exponential(1.0)
DET1 = d.Deterministic(1.0)


@pytest.fixture
def report(capsys):
    def _report(line):
        with capsys.disabled():
            print(line)

    return _report


def _verdict(ok):
    return "PASS" if ok else "FAIL"


# -- 1 ------------------------------------------------------------------------

def test_acceptance_01_erlang_c_oracle(report):
    exact = qs.erlang_c(2, 1.0, 1.0)
    ok_exact = abs(exact - 1.0 / 3.0) <= 1e-12

    lam = 200.0 - math.sqrt(200.0)
    ec = qs.erlang_c(200, lam, 1.0)
    ok_alpha = abs(ec - rl.alpha(1.0)) < 0.02

    cfg = qs.HwConfig(n=200, B=1.0, spec_A=EXP1, spec_S=EXP1,
                      horizon=500.0, warmup=100.0, replications=12, seed=101)
    est = qs.estimate_delay_prob(cfg)
    band = max(0.01, 3.0 * est.stderr)
    ok_sim = abs(est.point - ec) <= band

    ok = ok_exact and ok_alpha and ok_sim
    report(
        f"ACCEPTANCE 01 erlang-c oracle: {_verdict(ok)} — "
        f"erlang_c(2,1,1)={exact:.12f}; sim {est.point:.4f} vs erlang {ec:.4f} "
        f"(band {band:.4f}); |erlang - alpha(1)|={abs(ec - rl.alpha(1.0)):.4f}"
    )
    assert ok_exact and ok_alpha and ok_sim


# -- 2 ------------------------------------------------------------------------

def test_acceptance_02_pathwise_dominance(report):
    horizon = 6.0
    total = 0
    paths = 0
    for spec_A in (EXP1, DET1):
        cfg = qs.HwConfig(n=20, B=1.0, spec_A=spec_A, spec_S=EXP1,
                          horizon=horizon, warmup=1.0, replications=1, seed=0)
        for combo, (gamma, eta) in enumerate([(0.0, 20), (horizon / 2.0, 15)]):
            for k in range(1000):
                total += bd.coupled_dominance_check(
                    cfg, gamma, eta,
                    np.random.default_rng([202, combo, k, spec_A.family == "exponential"]),
                )
                paths += 1
    ok = total == 0
    report(
        f"ACCEPTANCE 02 pathwise dominance: {_verdict(ok)} — "
        f"{total} violation epochs over {paths} coupled paths (M/M/20, D/M/20)"
    )
    assert ok


# -- 3 ------------------------------------------------------------------------

def test_acceptance_03_lindley_equals_phi(report):
    families = [EXP1, DET1, d.Erlang(2, 2.0),
                d.HyperExponential((0.3, 0.7), (0.5, 2.0)),
                d.LogNormal(-0.5, 1.0), d.Uniform(0.5, 1.5)]
    mism = 0
    for fi, spec_S in enumerate(families):
        rng = np.random.default_rng([303, fi])
        for _ in range(1000):
            bundle = bd.make_bundle(d.Exponential(2.0), spec_S, 3, 6.0, rng)
            eta = int(rng.integers(0, 4))
            tr = bd.busy_system_path(bundle, eta, 6.0)
            if tr.values[-1] - eta != bd.phi(bundle, 0.0, 6.0, eta).value:
                mism += 1
    ok = mism == 0
    report(
        f"ACCEPTANCE 03 lindley == phi: {_verdict(ok)} — "
        f"{mism} mismatches over 6000 paths (1000 per family)"
    )
    assert ok


# -- 4 ------------------------------------------------------------------------

def test_acceptance_04_phi_equals_bruteforce(report):
    rng = np.random.default_rng(404)
    mism = 0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        bundle = bd.make_bundle(d.Exponential(2.0), EXP1, n, 6.0, rng)
        x = float(rng.uniform(0.0, 3.0))
        y = float(rng.uniform(0.0, 3.0))
        z = int(rng.integers(0, n + 1))
        if bd.phi(bundle, x, y, z).value != oracles.phi_bruteforce(bundle, x, y, z):
            mism += 1
    ok = mism == 0
    report(
        f"ACCEPTANCE 04 phi == brute force: {_verdict(ok)} — "
        f"{mism} mismatches over 1000 random bundles"
    )
    assert ok


# -- 5 ------------------------------------------------------------------------

def test_acceptance_05_renewal_covariance(report):
    grid = rn.renewal_function(EXP1, 20.0)
    f_max = float(np.max(np.abs(grid.f)))
    ok_exp = f_max < 1e-3

    rng = np.random.default_rng(505)
    det_grid = rn.renewal_function(DET1, 3.0)
    ok_det = True
    det_details = []
    for t in (0.5, 1.0, 2.5):
        u = rng.uniform(0.0, 1.0, size=10 ** 6)
        counts = np.where(u <= t, 1.0 + np.floor(t - u), 0.0)
        mc = float(np.var(counts))
        m4 = float(np.mean((counts - counts.mean()) ** 4))
        se = math.sqrt(max(m4 - mc ** 2, 1e-30) / 10 ** 6)
        model = float(det_grid.variance_at(t))
        ok_here = abs(model - mc) <= max(3.0 * se, 1e-6)
        det_details.append(f"t={t}: |{model:.5f}-{mc:.5f}|<={3 * se:.5f}")
        ok_det = ok_det and ok_here

    families = [EXP1, DET1, d.H2Star(0.5, 1.0), d.Erlang(2, 2.0),
                d.HyperExponential((0.3, 0.7), (0.5, 2.0)),
                d.LogNormal(-0.5, 1.0), d.Uniform(0.5, 1.5)]
    min_cov = math.inf
    for spec in families:
        mean = spec.moments().mean
        ts = np.linspace(0.0, 5.0 * mean, 50)
        s, t = np.meshgrid(ts, ts)
        cov = rn.equilibrium_cov(spec, s, t, t_max=5.0 * mean)
        min_cov = min(min_cov, float(np.min(cov)))
    ok_pos = min_cov >= -1e-6

    ok = ok_exp and ok_det and ok_pos
    report(
        f"ACCEPTANCE 05 renewal covariance: {_verdict(ok)} — "
        f"max|f_exp|={f_max:.2e} (<1e-3); det MC {'; '.join(det_details)}; "
        f"min cov {min_cov:.2e} (>=-1e-6) over 7 families"
    )
    assert ok


# -- 6 ------------------------------------------------------------------------

def test_acceptance_06_slepian_comparison(report):
    reports = {}
    for name, spec_S in (("M/M", EXP1), ("M/D", DET1)):
        reports[name] = gl.verify_slepian_domination(
            EXP1, spec_S, s_points=50, t_points=50,
            s_range=20.0, t_range=20.0, var_rtol=1e-6, margin_floor=-1e-6,
        )
    ok = all(r.passed for r in reports.values())
    detail = "; ".join(
        f"{k}: var gap {r.max_rel_variance_gap:.1e}, margin {r.min_domination_margin:.1e}"
        for k, r in reports.items()
    )
    report(f"ACCEPTANCE 06 slepian comparison: {_verdict(ok)} — {detail}")
    assert ok


# -- 7 ------------------------------------------------------------------------

def test_acceptance_07_theorem4_dominance(report):
    ok = True
    details = []
    for B in (1.0, 2.0):
        n = 100
        cfg = qs.HwConfig(n=n, B=B, spec_A=EXP1, spec_S=EXP1,
                          horizon=400.0, warmup=60.0, replications=8, seed=707)
        sim = qs.estimate_delay_prob(cfg)
        query = bd.BoundQuery(x=float(n), n=n, B=B, replications=400, seed=708)
        res = bd.theorem4_bound(query, EXP1, EXP1)
        combined = math.hypot(sim.stderr, res.minimum.stderr)
        ok_here = res.minimum.point >= sim.point - 3.0 * combined
        ok = ok and ok_here
        details.append(
            f"B={B:g}: bound {res.minimum.point:.3f} vs sim {sim.point:.3f} "
            f"(3se {3 * combined:.3f})"
        )
    report(f"ACCEPTANCE 07 theorem-4 dominance: {_verdict(ok)} — {'; '.join(details)}")
    assert ok


# -- 8 ------------------------------------------------------------------------

def test_acceptance_08_large_B_trend(report):
    b_grid = (1.0, 1.5, 2.0, 2.5)
    logs = []
    indicator_sets = []
    for B in b_grid:
        grid = gl.default_grid(EXP1, 50.0 / B ** 2, points_per_mean=20)
        cg = gl.build_Z_cov(EXP1, EXP1, grid)
        rng = np.random.default_rng(np.random.SeedSequence([808, int(B * 10)]))
        drift = -0.5 * B * cg.mu * cg.grid
        Z = cg.sample(4000, rng)
        hits = (np.max(Z + drift, axis=1) >= 0.5 * B).astype(float)
        indicator_sets.append(hits)
        logs.append(math.log(max(float(np.mean(hits)), 1e-12)))
    xs = np.array([b * b for b in b_grid])
    slope = float(np.polyfit(xs, np.array(logs), 1)[0])

    boot_rng = np.random.default_rng(809)
    slopes = np.empty(1000)
    for k in range(1000):
        ys = []
        for hits in indicator_sets:
            idx = boot_rng.integers(0, hits.size, size=hits.size)
            ys.append(math.log(max(float(np.mean(hits[idx])), 1e-12)))
        slopes[k] = np.polyfit(xs, np.array(ys), 1)[0]
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    ok = slope < 0.0 and hi < 0.0
    report(
        f"ACCEPTANCE 08 large-B trend: {_verdict(ok)} — slope {slope:.4f}, "
        f"bootstrap 95% CI [{lo:.4f}, {hi:.4f}] excludes 0"
    )
    assert ok


# -- 9 ------------------------------------------------------------------------

def test_acceptance_09_small_B_constant(report):
    ratios = {}
    for B, reps in ((0.05, 8000), (0.1, 30000), (0.2, 8000)):
        est = rl.gid_limit_mc(B, 1.0, 0.0, reps=reps, seed=909)
        ratios[B] = (1.0 - est.point) / B
    rel = abs(ratios[0.1] - math.sqrt(2.0)) / math.sqrt(2.0)
    ok = rel < 0.15
    report(
        f"ACCEPTANCE 09 small-B constant: {_verdict(ok)} — "
        f"B^-1 P(sup<0) ladder {ratios[0.05]:.3f}/{ratios[0.1]:.3f}/{ratios[0.2]:.3f}, "
        f"at B=0.1 within {rel:.1%} of sqrt(2) (need <15%)"
    )
    assert ok


# -- 10 -----------------------------------------------------------------------

def test_acceptance_10_idle_tail_bound(report):
    cfg = qs.HwConfig(n=100, B=1.0, spec_A=EXP1, spec_S=EXP1,
                      horizon=400.0, warmup=60.0, replications=8, seed=1010)
    ok = True
    details = []
    for x in (1.0, 2.0):
        est = qs.estimate_idle_tail(cfg, x)
        bound = rl.mginf_bound(cfg.B, x)
        ok_here = est.point <= bound + 3.0 * est.stderr
        ok = ok and ok_here
        details.append(f"x={x:g}: {est.point:.4f} <= {bound:.4f}+{3 * est.stderr:.4f}")
    report(f"ACCEPTANCE 10 idle-tail bound: {_verdict(ok)} — {'; '.join(details)}")
    assert ok


# -- 11 -----------------------------------------------------------------------

def test_acceptance_11_diffusion_laws(report):
    rng = np.random.default_rng(1111)
    reps = 10 ** 5
    ok = True
    details = []

    sup = df.bm_sup_sample(1.0, 0.0, 0.05, rng, reps)
    p = float(np.mean(sup > 1.0))
    want = df.bm_sup_tail(1.0, 1.0)
    se = math.sqrt(want * (1.0 - want) / reps)
    ok_here = abs(p - want) <= 4.0 * se
    ok = ok and ok_here
    details.append(f"sup_tail {p:.4f} vs {want:.4f} (4se {4 * se:.4f})")

    sup = df.bm_sup_sample(14.0, -1.0, 0.05, rng, reps)
    p = float(np.mean(sup > 1.0))
    want = df.bm_drift_sup(1.0, 1.0)
    se = math.sqrt(want * (1.0 - want) / reps)
    ok_here = abs(p - want) <= 4.0 * se
    ok = ok and ok_here
    details.append(f"drift_sup {p:.4f} vs {want:.4f} (4se {4 * se:.4f})")

    _, which = df.first_passage_bm(0.0, 0.0, rng, reps, upper=1.0, lower=-2.0,
                                   step=5e-4, horizon=400.0)
    p = float(np.mean(which == 1))
    want = df.bm_two_barrier(1.0, 2.0)
    se = math.sqrt(want * (1.0 - want) / reps)
    ok_here = abs(p - want) <= 4.0 * se
    ok = ok and ok_here
    details.append(f"two_barrier {p:.4f} vs {want:.4f} (4se {4 * se:.4f})")

    report(f"ACCEPTANCE 11 diffusion laws: {_verdict(ok)} — {'; '.join(details)}")
    assert ok


# -- 12 -----------------------------------------------------------------------

def test_acceptance_12_pitman_williams(report):
    rng = np.random.default_rng(1212)
    accepted, _, _ = df.conditioned_bm_hit_sample(1.0, 4.0, rng, size=10 ** 4, step=1e-3)
    bes_tau = df.first_passage_bessel3(1.0, 4.0, rng, 10 ** 4, step=1e-3, horizon=4000.0)
    ks_pitman = stats.ks_2samp(accepted, bes_tau).statistic
    ok_pitman = ks_pitman < 0.05

    grid = np.arange(0.0, 1.0 + 1e-12, 1e-3)
    w = df.williams_sample(1.0, grid, rng, size=10 ** 4)
    bz = df.sample_bessel3(1.0, grid, rng, size=10 ** 4)
    ks_williams = stats.ks_2samp(w.values[:, -1], bz.values[:, -1]).statistic
    ok_williams = ks_williams < 0.03

    ok = ok_pitman and ok_williams
    report(
        f"ACCEPTANCE 12 pitman/williams: {_verdict(ok)} — "
        f"hitting-time KS {ks_pitman:.4f} (<0.05); marginal KS {ks_williams:.4f} (<0.03)"
    )
    assert ok
