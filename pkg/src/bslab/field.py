"""Bound-state eigenfunction in the plane and its Fourier-side norm limits.

For phi in L^2(mu) the Birman-Schwinger eigenvector is lifted to

    f(x) = k (R_{mu dx}(-k^2) phi)(x) = (k / 2 pi) int K0(k|x - y|) phi(y) dmu(y).

Its L^2(R^2) norm needs no grid: the squared free resolvent has the
closed-form kernel

    int G(x - a) G(x - b) dx = rho K1(k rho) / (4 pi k),  rho = |a - b|,

with value 1 / (4 pi k^2) at rho = 0.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bskernel import TWO_PI, _self_values
from .measure import AtomicMeasure
from .spectral import BoundState, solve_bound_state
from .specfun import k0, k1

# terms with k|x - y| beyond this are below e^-20 of the near field
FAR_FIELD_KR = 20.0
_CHUNK = 4096


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


def _threads():
    try:
        return max(1, int(os.environ.get("BSLAB_THREADS", "1")))
    except ValueError:
        return 1


def l2mu_density(m: AtomicMeasure, eigvec) -> np.ndarray:
    """Convert a unit weighted-coordinate eigenvector to L^2(mu) values,
    scaled so ||phi||_{L^2(mu)} = sqrt(mu_T) = ||1|| and (phi, 1) > 0."""
    v = np.asarray(eigvec, dtype=float)
    sw = np.sqrt(m.weights)
    if v @ sw < 0:
        v = -v
    return math.sqrt(m.total_mass) * v / np.linalg.norm(v) / sw


def eval_eigenfunction(m: AtomicMeasure, k: float, phi, x, *, return_flag=False):
    """f(x) = (k / 2 pi) sum_j w_j phi_j K0(k|x - x_j|) at one point or an (N, 2) array.

    Inside the panel of atom j (distance below h/2 for a curve panel of
    length h, below s for an area panel of radius s) that term uses the
    panel-averaged kernel, the same value as the matrix diagonal. The
    optional flag marks far-field points (every term below e^-20 of the
    near field, possibly underflowed to 0).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (m.n,):
        raise ValueError("phi needs one value per atom")
    if not m.has_scales:
        raise ValueError("every atom needs a panel scale")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    wphi = m.weights * phi
    self_val, _ = _self_values(k, m.scales, m.is_area)
    reach = np.where(m.is_area, m.scales, 0.5 * m.scales)

    def block(lo):
        p = pts[lo:lo + _CHUNK]
        d = np.hypot(p[:, None, 0] - m.positions[None, :, 0],
                     p[:, None, 1] - m.positions[None, :, 1])
        near = d < reach[None, :]
        kd = k * np.where(near, 1.0, d)
        ker = np.where(near, self_val[None, :], k0(kd))
        return ker @ wphi, np.min(k * d, axis=1) >= FAR_FIELD_KR

    starts = range(0, pts.shape[0], _CHUNK)
    nthreads = _threads()
    if nthreads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(lo) for lo in starts]
    vals = np.concatenate([p[0] for p in parts]) * (k / TWO_PI)
    far = np.concatenate([p[1] for p in parts])
    if single:
        vals, far = float(vals[0]), bool(far[0])
    return (vals, far) if return_flag else vals


def k1_gram(m: AtomicMeasure, k: float) -> np.ndarray:
    """G2(rho_ij) = rho K1(k rho) / (4 pi k), the kernel of R(-k^2)^2."""
    d = m.distances
    out = np.empty_like(d)
    pos = d > 0
    out[~pos] = 1.0 / (4.0 * math.pi * k * k)
    out[pos] = d[pos] * k1(k * d[pos]) / (4.0 * math.pi * k)
    return out


def l2_norm_via_k1(m: AtomicMeasure, k: float, phi) -> float:
    """||k R_{mu dx}(-k^2) phi||_{L^2(R^2)}, exactly from the K1 double sum."""
    g = m.weights * np.asarray(phi, dtype=float)
    G = k1_gram(m, k)
    quad = float(g @ G @ g)
    if quad < -1e-12 * float(np.abs(g) @ G @ np.abs(g)):
        raise NumericalConsistencyError(f"negative squared norm {quad:.3e}")
    return k * math.sqrt(max(quad, 0.0))


def fourier_hat(m: AtomicMeasure, phi, p):
    """(1 / 2 pi) sum_j w_j phi_j exp(-i p . x_j), at one p or an (N, 2) array."""
    phi = np.asarray(phi, dtype=float)
    q = np.asarray(p, dtype=float)
    single = q.ndim == 1
    q = q.reshape(-1, 2)
    phase = q @ m.positions.T
    out = np.exp(-1j * phase) @ (m.weights * phi) / TWO_PI
    return complex(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Eigenfunction samples on an nx-by-ny grid over ``box`` = (x0, x1, y0, y1).

    ``values[iy, ix]`` is the sample at (xs[ix], ys[iy]).
    """

    box: tuple[float, float, float, float]
    nx: int
    ny: int
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    k: float
    l2_norm_kernel: float
    l2_norm_grid: float
    comparable: bool

    def csv_lines(self):
        """Header "# x y f" then rows "x,y,value", y outer and x inner."""
        yield "# x y f\n"
        for iy, y in enumerate(self.ys):
            for ix, x in enumerate(self.xs):
                yield f"{x:.17g},{y:.17g},{self.values[iy, ix]:.17g}\n"

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.writelines(self.csv_lines())


def default_box(m: AtomicMeasure, k: float, factor: float = 8.0):
    """Square box of half-width factor / k + support radius, centred at 0."""
    half = factor / k + m.radius
    return (-half, half, -half, half)


def eigenfunction_grid(m: AtomicMeasure, bs: BoundState, box=None, nx=256, ny=256) -> FieldGrid:
    """Sample f_alpha on a grid and compute its norm two ways."""
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be at least 2")
    k = bs.k_alpha
    if box is None:
        box = default_box(m, k)
    x0, x1, y0, y1 = map(float, box)
    phi = l2mu_density(m, bs.eigvec)
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vals = eval_eigenfunction(m, k, phi, np.column_stack([xx.ravel(), yy.ravel()]))
    vals = vals.reshape(ny, nx)
    inside = ((m.positions[:, 0] >= x0) & (m.positions[:, 0] <= x1)
              & (m.positions[:, 1] >= y0) & (m.positions[:, 1] <= y1)).all()
    if not inside:
        warnings.warn("grid box does not contain the support; norm comparison disabled",
                      RuntimeWarning, stacklevel=2)
    grid_norm = math.sqrt(np.trapezoid(np.trapezoid(vals ** 2, xs, axis=1), ys))
    return FieldGrid((x0, x1, y0, y1), nx, ny, xs, ys, vals, k,
                     l2_norm_via_k1(m, k, phi), grid_norm, bool(inside))


@dataclass(frozen=True)
class NormLimitRow:
    alpha: float
    k: float
    norm: float           # ||f_alpha|| with the computed eigenvector
    norm_leading: float   # ||k R 1||, the leading term alone
    limit: float          # mu_T / (2 sqrt(pi))
    deviation: float      # |norm - limit| / limit


def norm_limit_report(m: AtomicMeasure, alpha_list) -> list[NormLimitRow]:
    """||f_alpha|| against its alpha -> 0 limit mu_T / (2 sqrt(pi))."""
    alphas = [float(a) for a in alpha_list]
    if any(a <= 0 for a in alphas) or any(a <= b for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha_list must be positive and strictly decreasing")
    limit = m.total_mass / (2.0 * math.sqrt(math.pi))
    ones = np.ones(m.n)
    rows = []
    for a in alphas:
        bs = solve_bound_state(m, a)
        phi = l2mu_density(m, bs.eigvec)
        nrm = l2_norm_via_k1(m, bs.k_alpha, phi)
        lead = l2_norm_via_k1(m, bs.k_alpha, ones)
        rows.append(NormLimitRow(a, bs.k_alpha, nrm, lead, limit, abs(nrm - limit) / limit))
    return rows
