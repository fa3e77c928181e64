"""Which measures are admissible.

The logarithmic singularity of the planar Green function must average out
over small discs. Curves and bounded densities pass; a point mass does
not, and shrinking its panel makes the local log integral grow without
bound.
"""
from bslab.measure import (circle, grid_density, kato_diagnostic, kato_flag, point_atom,
                           radial_density, segment)

EPS = [1e-1, 1e-2, 1e-3, 1e-4]

measures = {
    "circle": circle(1.0, 2048),
    "segment": segment((-1, 0), (1, 0), 2048),
    "gaussian density": grid_density({"name": "gaussian"}, (-3, 3, -3, 3), 48, 48),
    "radial |x|^-2 ln^-3": radial_density(3.0, 32, 16),
    "point mass, panel 1e-12": point_atom(scale=1e-12),
}

print(f"{'measure':26}" + "".join(f"{e:>11.0e}" for e in EPS) + "   admissible")
for name, m in measures.items():
    table = kato_diagnostic(m, EPS)
    row = "".join(f"{v:11.3e}" for _, v in table)
    print(f"{name:26}{row}   {kato_flag(table)}")

# The radial density is unbounded at the origin yet still admissible: the
# extra ln^-3 factor is enough to tame the log singularity.
