"""Weak coupling on the unit circle.

A delta interaction of strength alpha on the circle |x| = 1 always binds.
Here the bound-state energy from the discretised operator is compared
with the exponential weak-coupling law as alpha shrinks.
"""
import math

from bslab.measure import circle
from bslab.specfun import EULER_GAMMA
from bslab.spectral import c_mu, lambda_asymptotic, predict_ln_k, solve_bound_state

m = circle(1.0, 512)

# The prefactor of the law. For a circle of radius r it has the closed
# form (4 / r^2) exp(-2 C_E); the discretisation is first-order accurate.
print(f"C_mu numeric     {c_mu(m):.8f}")
print(f"C_mu closed form {4 * math.exp(-2 * EULER_GAMMA):.8f}\n")

print(f"{'alpha':>6} {'k':>14} {'lambda':>14} {'ratio':>12} {'ln k gap':>10}")
for alpha in (0.5, 0.4, 0.3, 0.2, 0.15, 0.1):
    bs = solve_bound_state(m, alpha)
    ratio = bs.lam / lambda_asymptotic(m, alpha)
    gap = math.log(bs.k_alpha) - predict_ln_k(m, alpha)
    print(f"{alpha:6.2f} {bs.k_alpha:14.6e} {bs.lam:14.6e} {ratio:12.8f} {gap:10.2e}")

# The ratio tends to 1 and the ln k gap to 0. Both shrink roughly like
# k^2 |ln k|, so halving alpha squares the agreement.
