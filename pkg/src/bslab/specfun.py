"""Bessel-type special functions on the real axis.

K0, K1, I0 and J0 come from ``scipy.special``; this module adds domain
checks, an explicit underflow flag for the Macdonald functions, and the
Macdonald remainder

    s(x) = K0(x) + ln(x/2) + gamma,

which for small x is summed from the ascending series so that the
logarithm is never subtracted numerically. All functions accept scalars
or arrays and return the same shape.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

EULER_GAMMA = 0.57721566490153286061
LN2 = math.log(2.0)

# K0(x) ~ sqrt(pi/2x) e^-x drops below the smallest normal double here.
_UNDERFLOW_X = 705.0
_SERIES_MAX = 2.0


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _as_array(x, name, strict):
    x = np.asarray(x, dtype=float)
    bad = (x <= 0) if strict else (x < 0)
    if np.any(bad | np.isnan(x)):
        rel = "> 0" if strict else ">= 0"
        raise DomainError(f"{name} requires x {rel}")
    return x


def _ret(out, scalar):
    return float(out) if scalar else out


def _macdonald(x, fn, name, return_flag):
    scalar = np.ndim(x) == 0
    x = _as_array(x, name, strict=True)
    flag = x >= _UNDERFLOW_X
    out = np.where(flag, 0.0, fn(np.where(flag, 1.0, x)))
    if return_flag:
        return _ret(out, scalar), (bool(flag) if scalar else flag)
    return _ret(out, scalar)


def k0(x, *, return_flag=False):
    """Macdonald function K0(x) for x > 0.

    Arguments past ~705 underflow; the result is then exactly 0.0. With
    ``return_flag=True`` a boolean underflow flag (array) is returned too.
    """
    return _macdonald(x, special.k0, "k0", return_flag)


def k1(x, *, return_flag=False):
    """Macdonald function K1(x) for x > 0 (same conventions as :func:`k0`)."""
    return _macdonald(x, special.k1, "k1", return_flag)


def _k0_remainder_series(x):
    # K0 = -(ln(x/2) + g) I0 + sum_{m>=1} q^m / (m!)^2 H_m,  q = x^2 / 4
    q = 0.25 * x * x
    log_term = np.log(0.5 * x) + EULER_GAMMA
    term = np.ones_like(x)
    harmonic = 0.0
    i0_tail = np.zeros_like(x)
    h_sum = np.zeros_like(x)
    m = 1
    while True:
        term = term * q / (m * m)
        harmonic += 1.0 / m
        i0_tail = i0_tail + term
        h_sum = h_sum + term * harmonic
        if np.all(term * max(harmonic, 1.0) <= 1e-17 * (h_sum + 1e-300)):
            break
        m += 1
    return h_sum - log_term * i0_tail


def k0_remainder(x):
    """s(x) = K0(x) + ln(x/2) + gamma, accurate also where s is tiny.

    s(x) = O(x^2 ln x) as x -> 0; for x <= 2 it is summed directly.
    """
    scalar = np.ndim(x) == 0
    x = _as_array(x, "k0_remainder", strict=True)
    out = np.empty_like(x)
    small = x <= _SERIES_MAX
    if np.any(small):
        out[small] = _k0_remainder_series(x[small])
    if np.any(~small):
        xl = x[~small]
        out[~small] = k0(xl) + np.log(0.5 * xl) + EULER_GAMMA
    return _ret(out, scalar)


def i0(x):
    """Modified Bessel function I0(x) for x >= 0."""
    scalar = np.ndim(x) == 0
    return _ret(special.i0(_as_array(x, "i0", strict=False)), scalar)


def j0(x):
    """Bessel function J0(x) for x >= 0."""
    scalar = np.ndim(x) == 0
    return _ret(special.j0(_as_array(x, "j0", strict=False)), scalar)
