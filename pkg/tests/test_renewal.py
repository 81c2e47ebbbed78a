import math

import numpy as np
import pytest
from scipy import stats

from hwqueue import distributions as d
from hwqueue import renewal as rn


EXP1 = d.Exponential(1.0)
DET1 = d.Deterministic(1.0)

COV_FAMILIES = [
    EXP1,
    DET1,
    d.H2Star(0.5, 1.0),
    d.Erlang(2, 2.0),
    d.HyperExponential((0.3, 0.7), (0.5, 2.0)),
    d.LogNormal(-0.5, 1.0),
    d.Uniform(0.5, 1.5),
]


# --- constants ---------------------------------------------------------------

def test_constants_exponential_exponential():
    # oracle: plug E[S^2] = 2, E[S^3] = 6 into the defining formulas
    c = rn.renewal_constants(EXP1, EXP1)
    assert c.C1 == pytest.approx(1.0)
    assert c.C2 == pytest.approx((4.0 / 3.0) * 6.0 + 0.25 * 4.0)  # = 9
    assert c.C3 == pytest.approx(2.0)
    assert c.C4 == pytest.approx(2.0)


def test_eps0_value_and_half_bound():
    c = rn.renewal_constants(EXP1, EXP1)
    assert c.eps0 == pytest.approx(1.0 / (2.0 * (math.e - 2.0)))
    assert c.eps0 == pytest.approx(0.69611, abs=5e-6)
    assert math.exp(-c.eps0) == pytest.approx(0.4985, abs=5e-4)
    assert math.exp(-c.eps0) < 0.5


@pytest.mark.parametrize(
    "spec_A,spec_S",
    [(EXP1, EXP1), (EXP1, DET1), (d.Erlang(2, 2.0), d.Uniform(0.5, 1.5))],
)
def test_constants_identity(spec_A, spec_S):
    c = rn.renewal_constants(spec_A, spec_S)
    assert c.M > 0
    assert c.M * c.C4 * (0.5 - math.exp(-c.eps0)) == pytest.approx(
        8.0 * (c.C2 + c.C3 + c.C4), rel=1e-12
    )


def test_constants_reject_rate_mismatch():
    with pytest.raises(ValueError):
        rn.renewal_constants(d.Exponential(2.0), EXP1)


# --- path simulation ---------------------------------------------------------

def test_ordinary_deterministic_events():
    rng = np.random.default_rng(0)
    ev = rn.simulate_renewal(DET1, "ordinary", 3.5, rng)
    assert np.allclose(ev, [1.0, 2.0, 3.0])


def test_equilibrium_deterministic_first_event_uniform():
    rng = np.random.default_rng(1)
    firsts = []
    for _ in range(4000):
        ev = rn.simulate_renewal(DET1, "equilibrium", 2.5, rng)
        firsts.append(ev[0])
        assert np.allclose(np.diff(ev), 1.0)
    ks = stats.kstest(firsts, stats.uniform(0, 1).cdf)
    assert ks.pvalue > 1e-3


def test_equilibrium_exponential_count_mean():
    # Poisson process: count on [0, 10] has mean 10 within 4 sigma
    rng = np.random.default_rng(2)
    reps = 10 ** 5
    gaps = rng.exponential(1.0, size=(reps, 24))
    counts = np.sum(np.cumsum(gaps, axis=1) <= 10.0, axis=1)
    assert np.max(np.cumsum(gaps, axis=1)[:, -1]) > 10.0
    assert abs(float(np.mean(counts)) - 10.0) <= 0.04
    # and the library path generator agrees on a smaller sample
    lib_counts = [
        rn.simulate_renewal(EXP1, "equilibrium", 10.0, rng).size for _ in range(3000)
    ]
    assert abs(float(np.mean(lib_counts)) - 10.0) <= 4.0 * math.sqrt(10.0 / 3000)


def test_simulate_renewal_rejects_h2star():
    with pytest.raises(ValueError):
        rn.simulate_renewal(d.H2Star(0.5, 1.0), "equilibrium", 1.0, np.random.default_rng(0))


# --- renewal function ---------------------------------------------------------

def test_renewal_function_exponential_exact():
    grid = rn.renewal_function(EXP1, 20.0)
    assert float(np.max(np.abs(grid.m - grid.ts))) <= 1e-6


def test_renewal_function_deterministic_floor():
    grid = rn.renewal_function(DET1, 6.0)
    assert np.allclose(grid.m, np.floor(grid.ts + 1e-12))


def test_renewal_function_erlang_versus_mc():
    grid = rn.renewal_function(d.Erlang(2, 2.0), 2.0)
    rng = np.random.default_rng(3)
    reps = 10 ** 6
    gaps = rng.gamma(2.0, 0.5, size=(reps, 10))
    cum = np.cumsum(gaps, axis=1)
    assert np.min(cum[:, -1]) > 1.0
    counts = np.sum(cum <= 1.0, axis=1)
    mc = float(np.mean(counts))
    se = float(np.std(counts) / math.sqrt(reps))
    assert abs(grid.m_at(1.0) - mc) <= 3.0 * se


def test_lorden_band_holds():
    for spec in (EXP1, d.Erlang(2, 2.0), d.Uniform(0.5, 1.5)):
        grid = rn.renewal_function(spec, 5.0 * spec.moments().mean)
        mo = spec.moments()
        mu = 1.0 / mo.mean
        excess = grid.m + 1.0 - mu * grid.ts
        assert np.all(excess >= -1e-6)
        assert np.all(excess <= mu ** 2 * mo.second_moment + 1e-3)


def test_step_precondition_enforced():
    with pytest.raises(ValueError):
        rn.renewal_function(EXP1, 5.0, step=0.01)


# --- f and the variance of equilibrium counts ---------------------------------

def test_f_exponential_vanishes():
    grid = rn.renewal_function(EXP1, 20.0)
    assert float(np.max(np.abs(grid.f))) < 1e-3


def test_f_zero_at_origin():
    for spec in (EXP1, DET1, d.Erlang(2, 2.0)):
        grid = rn.renewal_function(spec, 3.0)
        assert grid.f[0] == 0.0


def _det_equilibrium_counts(t, n, rng):
    """Exact equilibrium counts for unit deterministic renewals."""
    u = rng.uniform(0.0, 1.0, size=n)
    return np.where(u <= t, 1.0 + np.floor(t - u), 0.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.5])
def test_deterministic_variance_matches_mc(t):
    rng = np.random.default_rng(4)
    reps = 10 ** 6
    counts = _det_equilibrium_counts(t, reps, rng)
    mc_var = float(np.var(counts))
    # standard error of a variance estimate: sqrt((m4 - var^2) / n)
    m4 = float(np.mean((counts - counts.mean()) ** 4))
    se = math.sqrt(max(m4 - mc_var ** 2, 1e-30) / reps)
    grid = rn.renewal_function(DET1, 3.0)
    model = float(grid.variance_at(t))
    assert abs(model - mc_var) <= max(3.0 * se, 1e-6)


def test_f_lipschitz_and_bounded():
    for spec in COV_FAMILIES:
        if rn.has_closed_form_offset(spec):
            f = rn.variance_offset(spec)
            ts = np.linspace(0.0, 30.0, 4001)
            vals = f(ts)
        else:
            grid = rn.renewal_function(spec, 5.0 * spec.moments().mean)
            ts, vals = grid.ts, grid.f
        mo = spec.moments()
        mu = 1.0 / mo.mean
        c2 = (4.0 / 3.0) * mu ** 3 * mo.third_moment + 0.25 * mu ** 4 * mo.second_moment ** 2
        c3 = mu ** 3 * mo.second_moment
        step = float(ts[1] - ts[0])
        assert float(np.max(np.abs(vals))) <= c2 + 1e-3
        assert float(np.max(np.abs(np.diff(vals)))) <= (c3 + 0.02) * step


# --- equilibrium covariance ----------------------------------------------------

def test_cov_diagonal_is_variance():
    for spec in (EXP1, DET1, d.Erlang(2, 2.0)):
        t = 1.7
        var = rn.equilibrium_cov(spec, t, t, t_max=4.0)
        grid = rn.renewal_function(spec, 4.0)
        assert var == pytest.approx(float(grid.variance_at(t)), abs=1e-6)


def test_cov_exponential_is_poisson():
    assert rn.equilibrium_cov(EXP1, 2.0, 5.0) == pytest.approx(2.0, abs=1e-6)


def test_cov_deterministic_matches_mc():
    rng = np.random.default_rng(6)
    reps = 10 ** 6
    u = rng.uniform(0.0, 1.0, size=reps)
    n_s = np.where(u <= 0.5, 1.0 + np.floor(0.5 - u), 0.0)
    n_t = np.where(u <= 1.5, 1.0 + np.floor(1.5 - u), 0.0)
    prod = (n_s - n_s.mean()) * (n_t - n_t.mean())
    mc = float(np.mean(prod))
    se = float(np.std(prod) / math.sqrt(reps))
    model = rn.equilibrium_cov(DET1, 0.5, 1.5)
    assert model == pytest.approx(0.25, abs=1e-9)
    assert abs(model - mc) <= 3.0 * se


@pytest.mark.parametrize("spec", COV_FAMILIES, ids=str)
def test_cov_nonnegative_on_grid(spec):
    mean = spec.moments().mean
    ts = np.linspace(0.0, 5.0 * mean, 50)
    s, t = np.meshgrid(ts, ts)
    cov = rn.equilibrium_cov(spec, s, t, t_max=5.0 * mean)
    assert float(np.min(cov)) >= -1e-6


def test_stationary_increments_erlang():
    # N^e(s, t) must match N^e(0, t-s) in law
    rng = np.random.default_rng(8)
    spec = d.Erlang(2, 2.0)
    reps = 10 ** 5
    s, t = 0.8, 2.3

    def counts(lo, hi):
        first = np.atleast_1d(spec.residual_sample(rng, size=reps))
        gaps = rng.gamma(2.0, 0.5, size=(reps, 16))
        times = np.concatenate([first[:, None], first[:, None] + np.cumsum(gaps, axis=1)], axis=1)
        assert np.min(times[:, -1]) > hi
        return np.sum((times > lo) & (times <= hi), axis=1)

    window = counts(s, t)
    fresh = counts(0.0, t - s)
    ks = stats.ks_2samp(window, fresh)
    assert ks.pvalue > 1e-3


def test_csv_dump(tmp_path):
    path = tmp_path / "grid.csv"
    rn.dump_grid_csv(DET1, 2.0, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,m,f,var_equilibrium"
    assert len(lines) == 2002
