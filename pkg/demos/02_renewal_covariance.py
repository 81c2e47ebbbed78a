"""The renewal function, the variance offset f(t), and equilibrium count
covariances.

For an equilibrium renewal process the count variance is C1 t + f(t) with
C1 = mu cS^2 and f bounded and Lipschitz; the covariance at two times needs
only f.  Poisson counts make f vanish; deterministic renewals give the
periodic sawtooth th(1-th).  The numeric pipeline solves the renewal
equation by a Stieltjes trapezoid with Richardson extrapolation and checks
Lorden's band.  Run:  python demos/02_renewal_covariance.py
"""

import numpy as np

from hwqueue import distributions as d
from hwqueue import renewal as rn

print("ordinary renewal function m(t), exponential(1): exact is mu t")
grid = rn.renewal_function(d.Exponential(1.0), 10.0)
print(f"  max |m(t) - t| on [0, 10]: {np.max(np.abs(grid.m - grid.ts)):.2e}")
print(f"  max |f(t)| on [0, 10]:     {np.max(np.abs(grid.f)):.2e}  (Poisson: 0)")

print("\ndeterministic(1): m(t) = floor(t), f(t) = frac(t)(1 - frac(t))")
gd = rn.renewal_function(d.Deterministic(1.0), 4.0)
for t in (0.5, 1.0, 2.5):
    print(f"  t={t}: m={gd.m_at(t):.4f}  V[N^e(t)]={gd.variance_at(t):.4f}")

print("\nequilibrium covariance vs Monte Carlo, deterministic(1), (s,t)=(0.5,1.5)")
rng = np.random.default_rng(2)
u = rng.uniform(0.0, 1.0, size=10 ** 6)
n_s = np.where(u <= 0.5, 1.0 + np.floor(0.5 - u), 0.0)
n_t = 1.0 + np.floor(1.5 - u)
mc = float(np.mean((n_s - n_s.mean()) * (n_t - n_t.mean())))
model = rn.equilibrium_cov(d.Deterministic(1.0), 0.5, 1.5)
print(f"  model {model:.4f}   MC {mc:.4f}   (exact value 1/4)")

print("\nLorden band for a solved family, Erlang(2, rate 2)")
ge = rn.renewal_function(d.Erlang(2, 2.0), 6.0)
mo = d.Erlang(2, 2.0).moments()
mu = 1.0 / mo.mean
excess = ge.m + 1.0 - mu * ge.ts
print(f"  m(t) + 1 - mu t in [{excess.min():.4f}, {excess.max():.4f}], "
      f"allowed [0, {mu ** 2 * mo.second_moment:.4f}]")

print("\ncomparison constants for exponential arrivals and services")
c = rn.renewal_constants(d.Exponential(1.0), d.Exponential(1.0))
print(f"  C1={c.C1:g} C2={c.C2:g} C3={c.C3:g} C4={c.C4:g}")
print(f"  eps0={c.eps0:.6f}, exp(-eps0)={np.exp(-c.eps0):.6f} < 1/2")
print(f"  M={c.M:.1f}  (the comparison process lives on [M+1, inf))")
