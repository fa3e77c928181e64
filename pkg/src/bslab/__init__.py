"""Weak-coupling bound states of -Delta - alpha mu in the plane.

Modules: specfun (Bessel functions), measure (atomic measures and the
Kato diagnostic), bskernel (Birman-Schwinger matrices), spectral (top
eigenvalue, bound state, weak-coupling laws), field (eigenfunction and
its norms) and cli.
"""

__version__ = "0.1.0"
