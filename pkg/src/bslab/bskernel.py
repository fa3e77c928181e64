"""Discrete Birman-Schwinger operators on L^2(mu).

An integral operator (Af)(x) = int a(x, y) f(y) dmu(y) is represented
over the atoms of a measure by the symmetric matrix

    M = D^{1/2} A D^{1/2},   A_ij = a(x_i, x_j),   D = diag(weights),

which has the spectrum of the Nystrom matrix A D. An eigenvector v of M
is the L^2(mu) function with values v_i / sqrt(w_i).

The log-singular self interaction A_ii is replaced by the average of the
small-argument kernel over the panel the atom stands for:

    curve panel of length h:   <-ln|s|> = 1 - ln(h/2)
    area cell, disc radius s:  <-ln|r|> = 1/2 - ln(s)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .measure import AtomicMeasure, MeasureError, PanelKind
from .specfun import EULER_GAMMA, LN2, k0, k0_remainder

K_MIN = 1e-8
K_MAX = 1e3
MAX_ATOMS = 4096
# self-panel small-argument replacement is trusted up to k * scale = 0.1
SELF_PANEL_KH_MAX = 0.1

TWO_PI = 2.0 * math.pi

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


class AssemblyError(MeasureError):
    """The measure cannot be assembled (missing panel scales, too many atoms)."""


class KRangeError(ValueError):
    """Wavenumber outside the supported range [K_MIN, K_MAX]."""


class AccuracyWarning(UserWarning):
    """Self-panel small-argument replacement used outside its accuracy range."""


@dataclass(frozen=True, eq=False)
class BSMatrix:
    """Weighted symmetric realisation of an operator in L^2(mu)."""

    entries: np.ndarray
    weights: np.ndarray
    k: float
    kind: str  # "Q", "P", "R" or "residual"

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def sqrt_w(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def to_function(self, v):
        """Weighted coordinates -> values of the L^2(mu) function."""
        return np.asarray(v) / self.sqrt_w

    def to_weighted(self, f):
        """Values of an L^2(mu) function -> weighted coordinates."""
        return np.asarray(f) * self.sqrt_w

    def apply(self, f):
        """(A f) at the atoms, for f given by its values at the atoms."""
        return self.to_function(self.entries @ self.to_weighted(f))

    def quadratic_form(self, f=None) -> float:
        """(A f, f) in L^2(mu); f defaults to the constant function 1."""
        g = self.sqrt_w if f is None else self.to_weighted(f)
        return float(g @ self.entries @ g)

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.entries)

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.max(np.abs(self.eigvalsh())))


def _check_k(k):
    if not (K_MIN <= k <= K_MAX):
        raise KRangeError(f"k = {k!r} outside [{K_MIN:g}, {K_MAX:g}]")


def _check_measure(m: AtomicMeasure):
    if not m.has_scales:
        raise AssemblyError("every atom needs a panel scale; bare point masses "
                            "are not in the Kato class")
    if m.n > MAX_ATOMS:
        raise AssemblyError(f"{m.n} atoms exceeds the dense cap of {MAX_ATOMS}")


def _log_average(scale, is_area):
    """Panel average of -ln|x - y| over the atom's own panel."""
    scale = np.asarray(scale, dtype=float)
    return np.where(is_area, 0.5 - np.log(scale), 1.0 - np.log(0.5 * scale))


def _remainder_average(k, scale, is_area):
    """Panel average of s(k|x - y|), s = K0 + ln(./2) + gamma, by 16-point
    Gauss-Legendre in the distance variable."""
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    is_area = np.broadcast_to(is_area, scale.shape)
    out = np.empty_like(scale)
    for i, (h, area) in enumerate(zip(scale, is_area)):
        half = h if area else 0.5 * h
        t = 0.5 * half * (_GL_X + 1.0)
        wq = 0.5 * half * _GL_W
        if area:
            out[i] = 2.0 / (h * h) * np.sum(wq * t * k0_remainder(k * t))
        else:
            out[i] = np.sum(wq * k0_remainder(k * t)) / half
    return out


def _self_values(k, scale, is_area, *, warn=True):
    """Self-panel kernel values (times 2 pi) and the remainder part included."""
    scale = np.asarray(scale, dtype=float)
    val = -math.log(0.5 * k) - EULER_GAMMA + _log_average(scale, is_area)
    rem = np.zeros_like(val)
    wide = k * scale > SELF_PANEL_KH_MAX
    if np.any(wide):
        if warn:
            warnings.warn(
                f"k * panel_scale up to {float(np.max(k * scale)):.3g} > "
                f"{SELF_PANEL_KH_MAX}: self-panel value from local quadrature",
                AccuracyWarning, stacklevel=3)
        rem[wide] = _remainder_average(k, scale[wide], np.asarray(is_area)[wide])
    return val + rem, rem


def green_kernel(k: float, rho: float, panel_scale: float,
                 panel_kind: PanelKind | str = PanelKind.CURVE) -> float:
    """Free resolvent kernel K0(k rho) / 2 pi at energy -k^2.

    Inside the panel (rho < panel_scale) the panel average of the kernel is
    returned instead of the point value.
    """
    if not k > 0:
        raise KRangeError("k must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho >= panel_scale:
        return k0(k * rho) / TWO_PI
    area = PanelKind(panel_kind) is PanelKind.AREA
    val, _ = _self_values(k, np.array([panel_scale]), np.array([area]))
    return float(val[0]) / TWO_PI


def _symmetric(m: AtomicMeasure, offdiag, diag):
    """D^{1/2} K D^{1/2} with K_ij = offdiag(rho_ij) above the diagonal,
    mirrored so the result is exactly symmetric."""
    n = m.n
    sw = np.sqrt(m.weights)
    out = np.zeros((n, n))
    iu, ju = np.triu_indices(n, 1)
    if iu.size:
        rho = m.distances[iu, ju]
        vals = np.empty_like(rho)
        pos = rho > 0
        vals[pos] = offdiag(rho[pos])
        if not pos.all():
            # coincident distinct atoms: mean of the two self-panel values
            vals[~pos] = 0.5 * (diag[iu[~pos]] + diag[ju[~pos]])
        vals = sw[iu] * vals * sw[ju]
        out[iu, ju] = vals
        out[ju, iu] = vals
    out[np.diag_indices(n)] = sw * diag * sw
    return out


def assemble_Q(m: AtomicMeasure, k: float) -> BSMatrix:
    """Birman-Schwinger matrix for Q(-k^2), kernel K0(k|x - y|) / 2 pi."""
    _check_k(k)
    _check_measure(m)
    diag, _ = _self_values(k, m.scales, m.is_area)
    diag = diag / TWO_PI
    entries = _symmetric(m, lambda rho: k0(k * rho) / TWO_PI, diag)
    return BSMatrix(entries, m.weights, float(k), "Q")


def assemble_P(m: AtomicMeasure) -> BSMatrix:
    """Rank-one part (1/2 pi) 1 (., 1)."""
    sw = np.sqrt(m.weights)
    return BSMatrix(np.outer(sw, sw) / TWO_PI, m.weights, 0.0, "P")


def r_self_values(m: AtomicMeasure) -> np.ndarray:
    """Diagonal of the R kernel (times 2 pi): ln 2 - gamma + panel log average."""
    return LN2 - EULER_GAMMA + _log_average(m.scales, m.is_area)


def assemble_R(m: AtomicMeasure) -> BSMatrix:
    """k-independent part, kernel (1/2 pi)(-ln|x - y| + ln 2 - gamma)."""
    _check_measure(m)
    diag = r_self_values(m) / TWO_PI
    entries = _symmetric(m, lambda rho: (LN2 - EULER_GAMMA - np.log(rho)) / TWO_PI, diag)
    return BSMatrix(entries, m.weights, 0.0, "R")


def r_form(m: AtomicMeasure) -> float:
    """(R 1, 1) in L^2(mu) = sum_ij w_i w_j R_ij, compensated summation."""
    R = assemble_R(m)
    sw = np.sqrt(m.weights)
    return math.fsum((sw[:, None] * R.entries * sw[None, :]).ravel().tolist())


def decomposition_residual(m: AtomicMeasure, k: float) -> tuple[BSMatrix, float]:
    """S(k) = M_Q(k) + ln(k) M_P - M_R and its spectral norm.

    Built directly from the Macdonald remainder s(k rho) / 2 pi, which is
    what the difference equals entry by entry; forming the difference
    would cancel ~log10(1/k^2) digits. Self-panel entries cancel exactly
    (to zero) unless the local-quadrature fallback is active.
    """
    if not (0 < k <= 0.5):
        raise KRangeError("decomposition residual needs 0 < k <= 0.5")
    _check_k(k)
    _check_measure(m)
    _, rem = _self_values(k, m.scales, m.is_area)
    entries = _symmetric(m, lambda rho: k0_remainder(k * rho) / TWO_PI, rem / TWO_PI)
    S = BSMatrix(entries, m.weights, float(k), "residual")
    return S, S.norm()
