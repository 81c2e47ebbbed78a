import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwqueue import bounding as bd
from hwqueue import distributions as d
from hwqueue import queue_sim as qs

import oracles

EXP1 = d.Exponential(1.0)
EXP2 = d.Exponential(2.0)

BUNDLE_FAMILIES = [
    EXP1,
    d.Deterministic(1.0),
    d.Erlang(2, 2.0),
    d.HyperExponential((0.3, 0.7), (0.5, 2.0)),
    d.LogNormal(-0.5, 1.0),
    d.Uniform(0.5, 1.5),
]


# --- phi -----------------------------------------------------------------------

def test_phi_empty_window():
    rng = np.random.default_rng(0)
    bundle = bd.make_bundle(EXP2, EXP1, 3, 5.0, rng)
    assert bd.phi(bundle, 1.0, 0.0, 2).value == 0


def test_phi_no_service_counts_arrivals():
    rng = np.random.default_rng(1)
    bundle = bd.make_bundle(EXP2, EXP1, 2, 6.0, rng)
    x, y = 1.0, 4.0
    a = bundle.arrival_times
    k = int(np.sum((a > x) & (a <= x + y)))
    assert bd.phi(bundle, x, y, 0).value == k


def test_phi_matches_bruteforce_bulk():
    rng = np.random.default_rng(2)
    for trial in range(400):
        n = int(rng.integers(1, 5))
        bundle = bd.make_bundle(EXP2, EXP1, n, 8.0, rng)
        x = float(rng.uniform(0.0, 4.0))
        y = float(rng.uniform(0.0, 4.0))
        z = int(rng.integers(0, n + 1))
        assert bd.phi(bundle, x, y, z).value == oracles.phi_bruteforce(bundle, x, y, z)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10 ** 6),
    n=st.integers(1, 4),
    x=st.floats(0.0, 3.0),
    y=st.floats(0.0, 3.0),
)
def test_phi_matches_bruteforce_property(seed, n, x, y):
    rng = np.random.default_rng(seed)
    bundle = bd.make_bundle(EXP2, EXP1, n, x + y + 0.5, rng)
    for z in range(n + 1):
        assert bd.phi(bundle, x, y, z).value == oracles.phi_bruteforce(bundle, x, y, z)


def test_phi_validates_window():
    rng = np.random.default_rng(3)
    bundle = bd.make_bundle(EXP2, EXP1, 2, 2.0, rng)
    with pytest.raises(ValueError):
        bd.phi(bundle, 1.5, 1.0, 1)
    with pytest.raises(ValueError):
        bd.phi(bundle, 0.0, 1.0, 5)


def test_phivalue_rejects_negative():
    with pytest.raises(ValueError):
        bd.PhiValue(-1)


# --- saturated system ------------------------------------------------------------

def test_busy_path_eta_zero_is_pure_growth():
    rng = np.random.default_rng(4)
    bundle = bd.make_bundle(EXP2, EXP1, 2, 6.0, rng)
    tr = bd.busy_system_path(bundle, 0, 6.0)
    assert tr.values[-1] == np.sum(bundle.arrival_times <= 6.0)
    assert np.all(np.diff(tr.values) == 1)


@pytest.mark.parametrize("spec_S", BUNDLE_FAMILIES, ids=str)
def test_busy_path_terminal_equals_phi(spec_S):
    rng = np.random.default_rng(5)
    for _ in range(150):
        bundle = bd.make_bundle(EXP2, spec_S, 3, 7.0, rng)
        eta = int(rng.integers(0, 4))
        tr = bd.busy_system_path(bundle, eta, 7.0)
        assert tr.values[-1] - eta == bd.phi(bundle, 0.0, 7.0, eta).value


def test_busy_path_matches_direct_lindley_fold():
    rng = np.random.default_rng(6)
    for _ in range(300):
        bundle = bd.make_bundle(EXP2, EXP1, 3, 6.0, rng)
        eta = int(rng.integers(1, 4))
        tr = bd.busy_system_path(bundle, eta, 6.0)
        assert tr.values[-1] - eta == oracles.lindley_fold(bundle, eta, 6.0)


def test_busy_path_no_arrivals_stays_flat():
    bundle = bd.RenewalPathBundle(
        5.0, np.empty(0), [np.array([0.5, 1.5, 2.5]), np.array([0.7, 1.9])]
    )
    tr = bd.busy_system_path(bundle, 2, 5.0)
    assert np.all(tr.values == 2)
    assert tr.artificial_arrivals == 5


# --- breakdown bound ---------------------------------------------------------------

def test_breakdown_formula_dominates_des():
    rng = np.random.default_rng(7)
    for trial in range(1000):
        n = int(rng.integers(2, 6))
        bundle = bd.make_bundle(EXP2, EXP1, n, 8.0, rng)
        t = float(rng.uniform(1.0, 7.5))
        gamma = float(rng.uniform(0.0, t))
        eta = int(rng.integers(1, n + 1))
        formula = bd.breakdown_bound_value(bundle, n, eta, gamma, t)
        des = oracles.breakdown_system_des(bundle, n, eta, gamma, t)
        assert des <= formula


def test_breakdown_gamma_equals_t_degenerates():
    rng = np.random.default_rng(8)
    bundle = bd.make_bundle(EXP2, EXP1, 3, 5.0, rng)
    t = 4.0
    eta = 2
    got = bd.breakdown_bound_value(bundle, 3, eta, t, t)
    # window (gamma, t] empty: phi term 1, netput 0, all eta+1..n survive
    want = eta + max(1, bd.phi(bundle, 0.0, t, 3).value) + 1
    assert got == want


def test_breakdown_eta_n_special_case():
    # with eta = n the survivor sum vanishes and the formula is the
    # saturated-system recursion bound
    rng = np.random.default_rng(9)
    for _ in range(200):
        bundle = bd.make_bundle(EXP2, EXP1, 3, 6.0, rng)
        t = 5.0
        gamma = float(rng.uniform(0.0, t))
        got = bd.breakdown_bound_value(bundle, 3, 3, gamma, t)
        netput = int(np.sum((bundle.arrival_times > gamma) & (bundle.arrival_times <= t)))
        for i in range(3):
            s = bundle.service_times[i]
            netput -= int(np.sum((s > gamma) & (s <= t)))
        want = 3 + max(
            1 + bd.phi(bundle, gamma, t - gamma, 3).value,
            bd.phi(bundle, 0.0, gamma, 3).value + netput,
        )
        assert got == want


# --- theorem-4 grid bound -------------------------------------------------------------

def test_theorem4_threshold_below_floor_gives_one():
    q = bd.BoundQuery(x=3.0, n=8, B=1.0, replications=50, seed=0,
                      delta_grid=(0.0, 1.0), eta_grid=(8, 5))
    res = bd.theorem4_bound(q, EXP1, EXP1)
    for cell in res.cells:
        if cell.eta >= q.x:
            assert cell.estimate.point == 1.0


def test_theorem4_monotone_in_x():
    points = []
    for x in (100.0, 104.0, 108.0):
        q = bd.BoundQuery(x=x, n=100, B=1.0, replications=120, seed=3)
        res = bd.theorem4_bound(q, EXP1, EXP1)
        points.append([c.estimate.point for c in res.cells])
    arr = np.array(points)
    assert np.all(np.diff(arr, axis=0) <= 1e-12)


def test_theorem4_delta0_eta_n_single_term():
    # with delta = 0 and eta = n the event reduces to
    # max(1, sup_t netput(t)) > x - n; compare to an independent evaluation
    n, B, x, reps, seed = 12, 1.0, 16.0, 80, 11
    q = bd.BoundQuery(x=x, n=n, B=B, replications=reps, seed=seed,
                      delta_grid=(0.0,), eta_grid=(n,))
    res = bd.theorem4_bound(q, EXP1, EXP1)
    lam = qs.hw_rate(n, B)
    hits = []
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([seed, rep]))
        bundle = bd.make_bundle(EXP1.scaled(1.0 / lam), EXP1, n, res.horizon_T, rng)
        evs = [(float(t), 1) for t in bundle.arrival_times]
        for i in range(n):
            evs += [(float(t), -1) for t in bundle.service_times[i]]
        evs.sort()
        walk = np.cumsum([dd for _, dd in evs]) if evs else np.array([0])
        sup = max(1, int(walk.max()) if walk.size else 0)
        hits.append(sup > x - n)
    assert res.cells[0].estimate.point == pytest.approx(float(np.mean(hits)), abs=1e-12)


def test_theorem4_transient_mode():
    # transient at time t computes the same event as steady mode truncated
    # at horizon_T = t; with a shared seed the estimates agree exactly
    t = 5.0
    q_tr = bd.BoundQuery(x=105.0, n=100, B=1.0, mode=("transient", t),
                         delta_grid=(0.0, 0.5), eta_grid=(95,),
                         replications=80, seed=13)
    res_tr = bd.theorem4_bound(q_tr, EXP1, EXP1)
    q_st = bd.BoundQuery(x=105.0, n=100, B=1.0, horizon_T=t,
                         delta_grid=(0.0, 0.5), eta_grid=(95,),
                         replications=80, seed=13)
    res_st = bd.theorem4_bound(q_st, EXP1, EXP1)
    assert res_tr.horizon_T == t
    assert res_tr.label == "transient"
    assert res_tr.minimum.point == res_st.minimum.point


def test_theorem4_rejects_bad_queries():
    with pytest.raises(ValueError):
        bd.BoundQuery(x=1.0, n=10)
    with pytest.raises(ValueError):
        bd.BoundQuery(x=1.0, n=10, B=1.0, lam=5.0)
    with pytest.raises(ValueError):
        bd.BoundQuery(x=1.0, n=10, B=1.0, replications=1)
    q = bd.BoundQuery(x=1.0, n=10, B=1.0, delta_grid=(999.0,), replications=5)
    with pytest.raises(ValueError):
        bd.theorem4_bound(q, EXP1, EXP1)


def test_theorem4_bound_exceeds_erlang_delay():
    # the minimized bound at x = n must sit above the exact M/M/n
    # delay probability (strict dominance plus Monte Carlo slack)
    n, B = 25, 1.0
    q = bd.BoundQuery(x=float(n), n=n, B=B, replications=250, seed=21)
    res = bd.theorem4_bound(q, EXP1, EXP1)
    exact = qs.erlang_c(n, qs.hw_rate(n, B))
    assert res.minimum.point >= exact - 3.0 * res.minimum.stderr
    assert res.minimum.point < 1.0


# --- coupling ---------------------------------------------------------------------

def test_coupled_dominance_identity_case():
    cfg = qs.HwConfig(n=8, B=1.0, spec_A=EXP1, spec_S=EXP1,
                      horizon=6.0, warmup=1.0, replications=1, seed=0)
    total = sum(
        bd.coupled_dominance_check(cfg, 0.0, 8, np.random.default_rng([1, k]))
        for k in range(150)
    )
    assert total == 0


def test_coupled_dominance_breakdown_case():
    cfg = qs.HwConfig(n=8, B=1.0, spec_A=EXP1, spec_S=EXP1,
                      horizon=6.0, warmup=1.0, replications=1, seed=0)
    total = sum(
        bd.coupled_dominance_check(cfg, 3.0, 4, np.random.default_rng([2, k]))
        for k in range(150)
    )
    assert total == 0


def test_coupled_dominance_deterministic_arrivals():
    cfg = qs.HwConfig(n=6, B=1.0, spec_A=d.Deterministic(1.0), spec_S=EXP1,
                      horizon=6.0, warmup=1.0, replications=1, seed=0)
    total = sum(
        bd.coupled_dominance_check(cfg, 2.0, 3, np.random.default_rng([3, k]))
        for k in range(100)
    )
    assert total == 0


def test_coupled_dominance_validates_arguments():
    cfg = qs.HwConfig(n=4, B=1.0, spec_A=EXP1, spec_S=EXP1,
                      horizon=5.0, warmup=1.0, replications=1, seed=0)
    with pytest.raises(ValueError):
        bd.coupled_dominance_check(cfg, -1.0, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        bd.coupled_dominance_check(cfg, 1.0, 9, np.random.default_rng(0))


# --- bundles ------------------------------------------------------------------------

def test_bundle_rejects_zero_atom_families():
    with pytest.raises(ValueError):
        bd.make_bundle(EXP1, d.H2Star(0.5, 1.0), 2, 5.0, np.random.default_rng(0))


def test_bundle_validates_event_order():
    with pytest.raises(ValueError):
        bd.RenewalPathBundle(2.0, np.array([1.0, 0.5]), [np.array([0.3])])
    with pytest.raises(ValueError):
        bd.RenewalPathBundle(2.0, np.array([0.5]), [np.array([0.0, 1.0])])
