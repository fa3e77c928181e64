"""Shape and size of the bound state for a bent wire.

For an L-shaped wire the eigenvector is not constant along the wire, but
as the coupling weakens it flattens out. Its planar L^2 norm then
approaches mu_T / (2 sqrt(pi)), which depends on the total length alone.
"""
import math

import numpy as np

from bslab.field import eigenfunction_grid, l2_norm_via_k1, l2mu_density
from bslab.measure import polyline
from bslab.spectral import solve_bound_state

m = polyline([(0, 0), (2, 0), (2, 1)], 64)
limit = m.total_mass / (2 * math.sqrt(math.pi))
print(f"wire length {m.total_mass:.4f}, limiting norm {limit:.6f}\n")

for alpha in (0.6, 0.4, 0.25):
    bs = solve_bound_state(m, alpha)
    phi = l2mu_density(m, bs.eigvec)
    nrm = l2_norm_via_k1(m, bs.k_alpha, phi)
    print(f"alpha {alpha:4.2f}: k = {bs.k_alpha:.4e}, phi in [{phi.min():.4f}, {phi.max():.4f}], "
          f"norm {nrm:.6f} ({abs(nrm - limit) / limit:.1e} from the limit)")

# The grid is only a check on the closed-form norm; write it out for plotting.
bs = solve_bound_state(m, 0.6)
grid = eigenfunction_grid(m, bs, nx=200, ny=200)
print(f"\ngrid norm {grid.l2_norm_grid:.6f} vs kernel norm {grid.l2_norm_kernel:.6f}")
iy, ix = np.unravel_index(np.argmax(grid.values), grid.values.shape)
print(f"peak {grid.values[iy, ix]:.5f} at ({grid.xs[ix]:.3f}, {grid.ys[iy]:.3f})")
grid.to_csv("l_wire_eigenfunction.csv")
print("samples written to l_wire_eigenfunction.csv")
