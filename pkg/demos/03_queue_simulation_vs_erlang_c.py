"""FCFS many-server simulation against the exact Markovian oracle.

Under square-root staffing (arrival rate n - B sqrt(n)) the delay
probability of the M/M/n queue converges to the classical limit alpha(B) as
n grows; the simulator is checked against the exact Erlang-C value at each
n.  Runtime about half a minute.
Run:  python demos/03_queue_simulation_vs_erlang_c.py
"""

import math

from hwqueue import distributions as d
from hwqueue import queue_sim as qs
from hwqueue import reference_limits as rl

B = 1.0
exp = d.Exponential(1.0)

print(f"square-root staffing at B={B}: limit alpha({B:g}) = {rl.alpha(B):.5f}\n")
print(f"{'n':>5}{'lambda':>10}{'erlang_c':>10}{'simulated':>11}{'stderr':>9}")
for n in (10, 25, 50, 100, 200):
    lam = qs.hw_rate(n, B)
    exact = qs.erlang_c(n, lam)
    cfg = qs.HwConfig(n=n, B=B, spec_A=exp, spec_S=exp,
                      horizon=300.0, warmup=50.0, replications=6, seed=n)
    est = qs.estimate_delay_prob(cfg)
    print(f"{n:>5}{lam:>10.3f}{exact:>10.5f}{est.point:>11.5f}{est.stderr:>9.5f}")

print("\nidle-server tails versus the infinite-server comparator Phi(B - x)")
cfg = qs.HwConfig(n=100, B=B, spec_A=exp, spec_S=exp,
                  horizon=300.0, warmup=50.0, replications=6, seed=7)
for x in (0.5, 1.0, 2.0):
    est = qs.estimate_idle_tail(cfg, x)
    print(f"  x={x:3.1f}: P(Q <= n - x sqrt(n)) = {est.point:.4f} "
          f"<= {rl.mginf_bound(B, x):.4f} (+MC noise)")

print("\nnon-exponential services still honor the staffing feasibility rules:")
try:
    qs.HwConfig(n=4, B=2.0, spec_A=exp, spec_S=exp, horizon=10.0, warmup=1.0)
except qs.FeasibilityError as exc:
    print(f"  n=4, B=2 rejected: {exc}")
