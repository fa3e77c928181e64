"""Principal Birman-Schwinger eigenvalue, bound state and weak-coupling laws.

gamma(k) is the top eigenvalue of Q(-k^2). By the Birman-Schwinger
principle, -k^2 is an eigenvalue of -Delta - alpha mu exactly when
alpha gamma(k) = 1; gamma is strictly decreasing in k, so the root is
unique. As k -> 0, gamma(k) ~ -ln(k) mu_T / 2 pi, which gives

    ln k(alpha) = -2 pi / (alpha mu_T) + 2 pi (R1, 1) / mu_T^2 + o(1),
    lambda(alpha) ~ -C_mu exp(-4 pi / (alpha mu_T)),
    C_mu = exp(4 pi (R1, 1) / mu_T^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bskernel import K_MAX, K_MIN, KRangeError, assemble_Q, r_form
from .measure import AtomicMeasure

POWER_TOL = 1e-13
POWER_MAX_ITER = 20000
ROOT_REL_WIDTH = 1e-12
MAX_EXPANSIONS = 200


class SpectralError(RuntimeError):
    """Eigen-solve failed on both the power-iteration and dense paths."""

    def __init__(self, msg, residual=float("nan")):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


class OutOfRangeError(KRangeError):
    """Root bracket left the supported wavenumber range."""


class CMuOverflowError(ArithmeticError):
    def __init__(self, exponent):
        super().__init__(f"C_mu = exp({exponent:.6g}) overflows")
        self.exponent = exponent


@dataclass(frozen=True, eq=False)
class SpectralPoint:
    k: float
    gamma: float
    eigvec: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True, eq=False)
class BoundState:
    """Solution of alpha gamma(k) = 1; ``lam`` is the eigenvalue -k_alpha^2."""

    alpha: float
    k_alpha: float
    lam: float
    eigvec: np.ndarray
    bracket: tuple[float, float]
    gamma_at_solution: float


def power_iteration(M: np.ndarray, v0: np.ndarray, tol=POWER_TOL,
                    max_iter=POWER_MAX_ITER):
    """Top eigenpair of a symmetric PSD matrix; returns (gamma, v, iters, residual).

    Stops when ||M v - gamma v|| <= tol * gamma; returns ``None`` for
    gamma if that does not happen within ``max_iter`` steps.
    """
    v = v0 / np.linalg.norm(v0)
    Mv = M @ v
    res = np.inf
    for it in range(1, max_iter + 1):
        gamma = float(v @ Mv)
        res = float(np.linalg.norm(Mv - gamma * v))
        if gamma > 0 and res <= tol * gamma:
            return gamma, v, it, res
        v = Mv / np.linalg.norm(Mv)
        Mv = M @ v
    return None, v, max_iter, res


def _top_eigenpair(M: np.ndarray, v0: np.ndarray, max_iter=POWER_MAX_ITER):
    gamma, v, it, res = power_iteration(M, v0, max_iter=max_iter)
    if gamma is None:
        w, V = np.linalg.eigh(M)
        gamma, v = float(w[-1]), V[:, -1]
        res = float(np.linalg.norm(M @ v - gamma * v))
        if not (gamma > 0 and res <= 1e-12 * gamma):
            raise SpectralError("top eigenpair did not converge", res)
    # positive orientation: the principal eigenvector has positive overlap with sqrt(w)
    if v @ v0 < 0:
        v = -v
    return gamma, v, it, res


def gamma_top(m: AtomicMeasure, k: float, *, max_iter=POWER_MAX_ITER) -> SpectralPoint:
    """Largest eigenvalue of the Q(-k^2) matrix and its unit eigenvector."""
    M = assemble_Q(m, k).entries
    v0 = np.sqrt(m.weights)
    gamma, v, it, res = _top_eigenpair(M, v0, max_iter)
    return SpectralPoint(float(k), gamma, v, it, res)


def solve_bound_state(m: AtomicMeasure, alpha: float, *, secant_steps=3) -> BoundState:
    """Solve alpha gamma(k) = 1 for k; bisection and secant in ln k.

    Uniqueness of the returned state is only guaranteed for small alpha;
    for larger coupling this still returns the principal (lowest) one.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    def f(lnk):
        p = gamma_top(m, math.exp(lnk))
        return alpha * p.gamma - 1.0, p

    lo = hi = 0.0  # ln k, starting from k = 1
    f0, p0 = f(0.0)
    step = math.log(4.0)
    # gamma decreases in k: f > 0 means the root lies at larger k
    direction = 1.0 if f0 > 0 else -1.0
    f_lo = f_hi = f0
    pts = {0.0: p0}
    for _ in range(MAX_EXPANSIONS):
        nxt = (hi if direction > 0 else lo) + direction * step
        if not (math.log(K_MIN) <= nxt <= math.log(K_MAX)):
            raise OutOfRangeError(
                f"alpha = {alpha:g}: bound-state bracket left [{K_MIN:g}, {K_MAX:g}]")
        fn, pn = f(nxt)
        pts[nxt] = pn
        if direction > 0:
            lo, f_lo, hi, f_hi = hi, f_hi, nxt, fn
        else:
            hi, f_hi, lo, f_lo = lo, f_lo, nxt, fn
        if f_lo >= 0 >= f_hi:
            break
    else:
        raise OutOfRangeError(f"alpha = {alpha:g}: no sign change found")
    bracket = (math.exp(lo), math.exp(hi))

    while hi - lo > ROOT_REL_WIDTH:
        mid = 0.5 * (lo + hi)
        fm, pm = f(mid)
        pts[mid] = pm
        if fm == 0.0:
            lo = hi = mid
            f_lo = f_hi = 0.0
            break
        if fm > 0:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
    # secant polish from the final bracket, kept inside it
    x0, y0, x1, y1 = lo, f_lo, hi, f_hi
    for _ in range(secant_steps):
        if y1 == y0:
            break
        x2 = x1 - y1 * (x1 - x0) / (y1 - y0)
        if not (lo <= x2 <= hi):
            break
        y2, p2 = f(x2)
        pts[x2] = p2
        x0, y0, x1, y1 = x1, y1, x2, y2
        if y2 == 0.0:
            break
    best = min(pts, key=lambda x: abs(alpha * pts[x].gamma - 1.0))
    p = pts[best]
    k = p.k
    return BoundState(float(alpha), k, -(k * k), p.eigvec, bracket, p.gamma)


def c_mu(m: AtomicMeasure) -> float:
    """C_mu = exp(4 pi (R1, 1) / mu_T^2)."""
    exponent = 4.0 * math.pi * r_form(m) / m.total_mass ** 2
    if exponent > 709.0:
        raise CMuOverflowError(exponent)
    return math.exp(exponent)


def lambda_asymptotic(m: AtomicMeasure, alpha: float, *, return_flag=False):
    """Weak-coupling prediction -C_mu exp(-4 pi / (alpha mu_T)).

    Returns -0.0 when the exponential underflows; ``return_flag=True``
    also returns the underflow flag.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    exponent = 4.0 * math.pi * r_form(m) / m.total_mass ** 2 \
        - 4.0 * math.pi / (alpha * m.total_mass)
    underflow = exponent < -745.0
    val = -0.0 if underflow else -math.exp(exponent)
    if val == 0.0:
        underflow = True
        val = -0.0
    return (val, underflow) if return_flag else val


def predict_ln_k(m: AtomicMeasure, alpha: float) -> float:
    """Two-term prediction of ln k(alpha)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    mu = m.total_mass
    return -2.0 * math.pi / (alpha * mu) + 2.0 * math.pi * r_form(m) / mu ** 2


@dataclass(frozen=True)
class PerturbationRow:
    k: float
    gamma: float
    omega: float          # -2 pi gamma / (mu_T ln k), top eigenvalue of T(k)
    second: float         # second eigenvalue of T(k)
    gap: float            # omega - second
    diam_sigma0: float    # spread of the rest of the spectrum of T(k)
    dev: float            # ||phi_k - phi||, phi = sqrt(w)/||sqrt(w)||
    omega_scaled: float   # (omega - 1) ln k  ->  (T1 phi, phi)
    dev_scaled: float     # dev |ln k|, bounded


def perturbation_report(m: AtomicMeasure, k_list) -> list[PerturbationRow]:
    """Track the eigenvalue and eigenvector of T(k) = -2 pi Q / (mu_T ln k)."""
    ks = [float(k) for k in k_list]
    if any(k >= 1 or k <= 0 for k in ks):
        raise ValueError("perturbation_report needs 0 < k < 1")
    if any(a <= b for a, b in zip(ks, ks[1:])):
        raise ValueError("k_list must be strictly decreasing")
    mu = m.total_mass
    phi = np.sqrt(m.weights) / math.sqrt(np.sum(m.weights))
    rows = []
    for k in ks:
        p = gamma_top(m, k)
        lnk = math.log(k)
        scale = -2.0 * math.pi / (mu * lnk)
        ev = np.linalg.eigvalsh(assemble_Q(m, k).entries) * scale
        omega = p.gamma * scale
        second = float(ev[-2]) if len(ev) > 1 else 0.0
        diam = float(ev[-2] - ev[0]) if len(ev) > 1 else 0.0
        dev = float(np.linalg.norm(p.eigvec - phi))
        rows.append(PerturbationRow(k, p.gamma, omega, second, omega - second, diam,
                                    dev, (omega - 1.0) * lnk, dev * abs(lnk)))
    return rows
