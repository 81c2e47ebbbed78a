"""Service and inter-arrival distributions with exact moments and their
stationary-excess (residual-life) laws.

The residual law P(R(X) > z) = E[X]^-1 * int_z^inf P(X > y) dy is what a
renewal process "in equilibrium" shows an outside observer: an exponential
is memoryless (residual = itself), a deterministic service looks uniform,
and the zero-atom exponential mixture stays exponential but at the thinned
rate.  Run:  python demos/01_distributions_and_residual_life.py
"""

import numpy as np

from hwqueue import distributions as d

rng = np.random.default_rng(1)

families = [
    d.Exponential(1.0),
    d.Deterministic(1.0),
    d.H2Star(0.5, 1.0),
    d.Erlang(2, 2.0),
    d.HyperExponential((0.3, 0.7), (0.5, 2.0)),
    d.LogNormal(-0.5, 1.0),
    d.Uniform(0.5, 1.5),
]

print(f"{'family':<42}{'mean':>8}{'scv':>8}{'E[X^3]':>9}  P(S=0)")
for dist in families:
    mo = dist.moments()
    print(
        f"{str(dist):<42}{mo.mean:>8.4f}{mo.scv:>8.4f}{mo.third_moment:>9.4f}"
        f"  {dist.zero_atom:.2f}"
    )

print("\nresidual-life sanity checks (10^5 draws each)")
n = 10 ** 5

exp = d.Exponential(1.0)
r = exp.residual_sample(rng, size=n)
print(f"exponential: residual mean {np.mean(r):.4f} (memoryless, expect 1.0)")

det = d.Deterministic(2.0)
r = det.residual_sample(rng, size=n)
print(f"deterministic(2): residual range [{r.min():.4f}, {r.max():.4f}] "
      f"(uniform on [0, 2]); P(R <= 1) = {np.mean(r <= 1.0):.4f} vs cdf {det.residual_cdf(1.0):.4f}")

h2 = d.H2Star(0.5, 1.0)
x = h2.sample(rng, size=n)
print(f"h2star(p=0.5): fraction of zero-length services {np.mean(x == 0):.4f} "
      f"(atom mass 1 - p = 0.5); scv = {h2.moments().scv:.1f}")

print("\nempirical residual CDF versus the closed form, lognormal case")
ln = d.LogNormal(-0.5, 1.0)
r = ln.residual_sample(rng, size=n)
for z in (0.25, 1.0, 3.0):
    print(f"  z={z:4.2f}: empirical {np.mean(r <= z):.4f}  model {float(ln.residual_cdf(z)):.4f}")
