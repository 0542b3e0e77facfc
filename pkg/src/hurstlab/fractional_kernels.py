"""Closed-form quantities attached to filtered fractional Brownian motion.

Everything here is at unit sampling step: by self-similarity the
covariance of ``V_n^a B_H`` is the unit-step value times ``n**(-2H)`` and
correlations do not depend on ``n`` at all.

The increment-ratio mean function is

    Lambda(rho) = arccos(-rho)/pi + sqrt((1+rho)/(1-rho)) * log(2/(1+rho))/pi

evaluated at the lag-one correlation ``rho`` of (dilated) second-order
variations; ``lambda2_inverse`` inverts it by vectorized bisection.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .filters import Filter

EPS_H = 1e-6
_LIMIT_BAND = 1e-6
_FD_STEP = 1e-5


def check_hurst(h):
    """Validate ``0 < h < 1`` (scalar or array) and return it as float(s)."""
    arr = np.asarray(h, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError(f"Hurst values must lie in the open interval (0, 1), got {h}")
    return float(arr) if arr.ndim == 0 else arr


def fbm_cross_covariance(f: Filter, g: Filter, h: float, lag):
    """``Cov(V^f B_H(0), V^g B_H(lag))`` at unit step (vectorized over ``lag``).

    Both filters must have zero sum, which removes the ``|s|^{2H}`` terms of
    the FBM covariance and leaves ``-1/2 sum_{l,m} f_l g_m |lag + m - l|^{2H}``.
    """
    lag_arr = np.asarray(lag, dtype=float)
    d = np.arange(g.q + 1)[None, :] - np.arange(f.q + 1)[:, None]
    w = np.outer(f.coeffs, g.coeffs)
    keep = w != 0.0
    d, w = d[keep], w[keep]
    out = -0.5 * np.sum(w * np.abs(lag_arr[..., None] + d) ** (2.0 * h), axis=-1)
    return float(out) if out.ndim == 0 else out


def fbm_filtered_covariance(f: Filter, h: float, lag):
    """Lag-``lag`` autocovariance of ``V^a B_H`` at unit step."""
    check_hurst(h)
    return fbm_cross_covariance(f, f, h, lag)


def fbm_filtered_asymptote(f: Filter, h: float, lag: float) -> float:
    """Leading term of the lag covariance as ``lag -> infinity``."""
    m = f.m
    ell = np.arange(f.q + 1, dtype=float)
    mom = float(np.sum(ell**m * f.coeffs))
    prod = np.prod([2.0 * h - k for k in range(2 * m)])
    fact = float(np.prod(np.arange(1, m + 1)))
    return (-1) ** (m + 1) * mom**2 / (2.0 * fact**2) * prod * abs(lag) ** (2.0 * h - 2 * m)


# -- lag-one correlation of dilated second-order variations -----------------
#
# With a* = (1,-2,1) dilated by i the unit-lag covariance is
#   -1/2 [6 - 4(|i+1|^{2H} + |i-1|^{2H}) + |2i+1|^{2H} + |2i-1|^{2H}]
# and the variance i^{2H} (4 - 4^H); the ratio below is their quotient.


def _rho_terms(i: int):
    bases = np.array([2 * i + 1, 2 * i - 1, i + 1, i - 1], dtype=float)
    coefs = np.array([-1.0, -1.0, 4.0, 4.0])
    return bases, coefs


def _rho_numerator(i: int, h):
    bases, coefs = _rho_terms(i)
    h = np.asarray(h, dtype=float)[..., None]
    with np.errstate(divide="ignore"):
        powers = np.where(bases > 0, bases ** (2.0 * h), 0.0)
    return np.sum(coefs * powers, axis=-1) - 6.0


def _rho_numerator_slope(i: int, h):
    bases, coefs = _rho_terms(i)
    h = np.asarray(h, dtype=float)[..., None]
    safe = np.where(bases > 0, bases, 1.0)
    terms = np.where(bases > 0, coefs * 2.0 * np.log(safe) * safe ** (2.0 * h), 0.0)
    return np.sum(terms, axis=-1)


def rho2_dilated(i: int, h):
    """Lag-one correlation of the ``i``-dilated second-order variations of FBM.

    Near ``h = 1`` both numerator and denominator vanish; inside a band of
    width 1e-6 the ratio of derivatives at ``h = 1`` is returned instead.
    """
    if int(i) != i or i < 1:
        raise ValueError(f"dilatation index must be a positive integer, got {i}")
    i = int(i)
    h_arr = np.asarray(check_hurst(h), dtype=float)
    den = i ** (2.0 * h_arr) * (8.0 - 2.0 ** (2.0 * h_arr + 1.0))
    generic = _rho_numerator(i, h_arr) / np.where(np.abs(h_arr - 1.0) < _LIMIT_BAND, 1.0, den)
    # d/dH [i^{2H}(8 - 2^{2H+1})] at H = 1 is -16 log 2 * i^2 (the other factor is 0)
    limit = _rho_numerator_slope(i, 1.0) / (-16.0 * np.log(2.0) * i**2)
    out = np.where(np.abs(h_arr - 1.0) < _LIMIT_BAND, limit, generic)
    return float(out) if out.ndim == 0 else out


def rho2(h):
    """``rho2(h) = (-3^{2h} + 2^{2h+2} - 7) / (8 - 2^{2h+1})``."""
    return rho2_dilated(1, h)


def lambda_of_rho(rho):
    """Mean of ``|X+Y|/(|X|+|Y|)`` for a standard Gaussian pair of correlation ``rho``."""
    r = np.asarray(rho, dtype=float)
    if not np.all((r > -1.0) & (r < 1.0)):
        raise DomainError(f"correlation must lie in (-1, 1), got {rho}")
    out = np.arccos(-r) / np.pi + np.sqrt((1.0 + r) / (1.0 - r)) * np.log(2.0 / (1.0 + r)) / np.pi
    return float(out) if out.ndim == 0 else out


def lambda2_dilated(i: int, h):
    return lambda_of_rho(rho2_dilated(i, h))


def lambda2(h):
    """Expected increment ratio of FBM second-order variations."""
    return lambda2_dilated(1, h)


class InverseResult(NamedTuple):
    h: np.ndarray | float
    clamped: np.ndarray | bool


def lambda2_inverse(s, i: int = 1, tol: float = 1e-10) -> InverseResult:
    """Invert ``lambda2_dilated(i, .)`` on ``[EPS_H, 1 - EPS_H]``.

    Values outside the attainable range are clamped to the nearest end of
    the Hurst interval and flagged.
    """
    s_arr = np.asarray(s, dtype=float)
    if not np.all((s_arr >= 0.0) & (s_arr <= 1.0)):
        raise DomainError(f"increment-ratio statistic must lie in [0, 1], got {s}")
    lo_val = lambda2_dilated(i, EPS_H)
    hi_val = lambda2_dilated(i, 1.0 - EPS_H)
    below = s_arr < lo_val
    above = s_arr > hi_val
    lo = np.full(s_arr.shape, EPS_H)
    hi = np.full(s_arr.shape, 1.0 - EPS_H)
    # bisection halves [EPS_H, 1-EPS_H] until its width is below tol
    n_iter = int(np.ceil(np.log2((1.0 - 2 * EPS_H) / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        go_up = lambda2_dilated(i, mid) < s_arr
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    h = 0.5 * (lo + hi)
    h = np.where(below, EPS_H, np.where(above, 1.0 - EPS_H, h))
    clamped = below | above
    if h.ndim == 0:
        return InverseResult(float(h), bool(clamped))
    return InverseResult(h, clamped)


def lambda2_derivative(h, i: int = 1, step: float = _FD_STEP):
    """Central-difference derivative of ``lambda2_dilated(i, .)``.

    The step shrinks near the ends of (0, 1) so both nodes stay inside.
    """
    h_arr = np.asarray(check_hurst(h), dtype=float)
    st = np.minimum(step, 0.5 * np.minimum(h_arr, 1.0 - h_arr))
    out = (lambda2_dilated(i, h_arr + st) - lambda2_dilated(i, h_arr - st)) / (2.0 * st)
    return float(out) if out.ndim == 0 else out
