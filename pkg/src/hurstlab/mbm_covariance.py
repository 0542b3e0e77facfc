"""Covariance of the normalized generalized multifractional Brownian motion.

For ``t <= t'`` with ``H = H(t)``, ``H' = H(t')`` and ``s = H + H'``::

    E X(t) X(t') = 1/2 (L11 t^s + L22 t'^s - L22 (t'-t)^s)

    L11 = L cos(db - pi s/2) / cos(pi s/2)
    L22 = L cos(db + pi s/2) / cos(pi s/2)
    L   = K(H) K(H') / K(s/2)^2
    db  = beta(H) - beta(H')

On the seam ``s = 1`` the cosine denominator vanishes and the kernel is
evaluated through its analytic continuation in ``w = s - 1``.  Both ``L``
and the sign of ``db`` were checked against direct numerical integration
of the harmonizable representation (see ``tests/test_mbm_covariance.py``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DegenerateSpec, DomainError
from .fractional_kernels import check_hurst

SEAM_EPS = 1e-4
_TAYLOR_EPS = 1e-3
_FIELD_CHECK_POINTS = 10_000


@dataclass(frozen=True)
class HurstField:
    """A Hurst function ``t -> H(t)`` on (0, 1).

    ``kind`` is ``"closed_form"`` or ``"sampled"``; sampled fields carry their
    grid and interpolate linearly between nodes (constant beyond the ends).
    """

    kind: str
    func: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    eta: Optional[float] = None
    grid: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("closed_form", "sampled"):
            raise ValueError(f"unknown HurstField kind {self.kind!r}")
        probe = (np.arange(_FIELD_CHECK_POINTS) + 0.5) / _FIELD_CHECK_POINTS
        vals = np.asarray(self(probe), dtype=float)
        lo, hi = float(vals.min()), float(vals.max())
        if not (np.all(np.isfinite(vals)) and 0.0 < lo and hi < 1.0):
            raise DomainError(
                f"Hurst field {self.name!r} leaves (0, 1): range [{lo:.6g}, {hi:.6g}]"
            )

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.func(t_arr), dtype=float)
        if out.shape != t_arr.shape:
            out = np.broadcast_to(out, t_arr.shape).copy()
        return float(out) if out.ndim == 0 else out

    @classmethod
    def closed_form(cls, func, name="custom", eta=None):
        return cls("closed_form", func, name=name, eta=eta)

    @classmethod
    def constant(cls, h: float, name=None):
        h = check_hurst(h)
        return cls("closed_form", lambda t: np.full(np.shape(t), h), name=name or f"const({h:g})",
                   eta=math.inf)

    @classmethod
    def sampled(cls, grid, values, name="sampled", eta=None, meta=None):
        g = np.asarray(grid, dtype=float)
        v = np.asarray(values, dtype=float)
        if g.shape != v.shape or g.ndim != 1 or np.any(np.diff(g) <= 0):
            raise ValueError("sampled Hurst field needs a strictly increasing 1-d grid "
                             "and values of the same length")
        return cls("sampled", lambda t: np.interp(t, g, v), name=name, eta=eta,
                   grid=g, values=v, meta=dict(meta or {}))


@dataclass(frozen=True)
class MbmSpec:
    """Covariance model: ``sigma(t) X_{(a+, a-)}(t)`` with Hurst function ``hurst``."""

    hurst: HurstField
    a_plus: float = 1.0
    a_minus: float = 1.0
    scale: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.a_plus == 0.0 and self.a_minus == 0.0:
            raise DegenerateSpec("(a+, a-) must not both vanish")

    @property
    def well_balanced(self) -> bool:
        return self.a_plus == self.a_minus

    def spec_id(self) -> str:
        return f"mbm(a+={self.a_plus:g},a-={self.a_minus:g},H={self.hurst.name})"


def kconst(h):
    """``K(H) = (H Gamma(2H) sin(pi H) / pi)^{1/2}``."""
    h = np.asarray(check_hurst(h), dtype=float)
    out = np.sqrt(h * gamma_fn(2.0 * h) * np.sin(np.pi * h) / np.pi)
    return float(out) if out.ndim == 0 else out


def beta(spec: MbmSpec, h):
    """Principal argument in [0, 2 pi) of ``a+ e^{-i phi} + a- e^{i phi}``,
    ``phi = (H + 1/2) pi / 2``; identically 0 in the well-balanced case."""
    h = np.asarray(check_hurst(h), dtype=float)
    if spec.well_balanced:
        out = np.zeros_like(h)
    else:
        phi = (h + 0.5) * np.pi / 2.0
        z = spec.a_plus * np.exp(-1j * phi) + spec.a_minus * np.exp(1j * phi)
        if np.any(np.abs(z) < 1e-300):
            raise DegenerateSpec("complex operand of beta vanishes")
        out = np.mod(np.angle(z), 2.0 * np.pi)
        # mod can return exactly 2 pi for tiny negative angles
        out = np.where(out >= 2.0 * np.pi, 0.0, out)
    return float(out) if out.ndim == 0 else out


def lfactor(h, h2):
    """``L(H, H') = K(H) K(H') / K((H + H')/2)^2``; equals 1 on the diagonal."""
    return kconst(h) * kconst(h2) / kconst(0.5 * (np.asarray(h) + np.asarray(h2))) ** 2


def _omega_over_tan(w):
    """``w / tan(w pi / 2)``, analytic at 0 where it equals 2/pi."""
    x = 0.5 * np.pi * w
    small = np.abs(w) < _TAYLOR_EPS
    safe = np.where(small, 1.0, w)
    series = (2.0 / np.pi) * (1.0 - x**2 / 3.0 - x**4 / 45.0)
    return np.where(small, series, safe / np.tan(0.5 * np.pi * safe))


def _x_powm1_over_w(x, w):
    """``x (x^w - 1) / w`` with its limits ``x log x`` (w=0) and 0 (x=0)."""
    pos = x > 0
    lx = np.log(np.where(pos, x, 1.0))
    wz = w == 0
    ratio = np.where(wz, lx, np.expm1(w * lx) / np.where(wz, 1.0, w))
    return np.where(pos, x * ratio, 0.0)


def _q_ordered(h_s, h_l, t_s, t_l, db):
    """Kernel for ``t_s <= t_l`` (arrays broadcast together)."""
    s = h_s + h_l
    w = s - 1.0
    lf = lfactor(h_s, h_l)
    gap = t_l - t_s
    seam = np.abs(w) < SEAM_EPS
    half_pi_s = 0.5 * np.pi * s
    cos_s = np.where(seam, 1.0, np.cos(half_pi_s))
    l11 = lf * np.cos(db - half_pi_s) / cos_s
    l22 = lf * np.cos(db + half_pi_s) / cos_s
    generic = 0.5 * (l11 * t_s**s + l22 * t_l**s - l22 * gap**s)
    if not np.any(seam):
        return generic
    cont = (
        0.5 * lf * np.cos(db) * (t_s**s + t_l**s - gap**s)
        - 0.5 * lf * np.sin(db) * _omega_over_tan(w)
        * (_x_powm1_over_w(t_s, w) - _x_powm1_over_w(t_l, w) + _x_powm1_over_w(gap, w))
    )
    return np.where(seam, cont, generic)


def _check_times(*ts):
    for t in ts:
        t = np.asarray(t, dtype=float)
        if not np.all((t > 0.0) & (t < 1.0)):
            raise DomainError(f"times must lie in the open interval (0, 1), got {t}")


def q_kernel(spec: MbmSpec, t, t2):
    """``E X(t) X(t2)`` for the model ``spec`` (vectorized over t, t2)."""
    _check_times(t, t2)
    t = np.asarray(t, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    out = _q_from_times(spec, t, t2, spec.hurst(t), spec.hurst(t2))
    return float(out) if np.ndim(out) == 0 else out


def _q_from_times(spec, t, t2, h, h2):
    t, t2, h, h2 = np.broadcast_arrays(t, t2, np.asarray(h, float), np.asarray(h2, float))
    first = t <= t2
    t_s = np.where(first, t, t2)
    t_l = np.where(first, t2, t)
    h_s = np.where(first, h, h2)
    h_l = np.where(first, h2, h)
    db = beta(spec, h_s) - beta(spec, h_l)
    out = _q_ordered(h_s, h_l, t_s, t_l, db)
    if spec.scale is not None:
        out = out * (np.asarray(spec.scale(t), float) * np.asarray(spec.scale(t2), float))
    return out


def covariance_matrix(spec: MbmSpec, n: int, block: int = 512) -> np.ndarray:
    """``[E Z(k/n) Z(k'/n)]`` for ``k, k' = 1..n-1``.

    Rows are filled in blocks from the diagonal rightwards and mirrored, so
    memory stays at the output matrix plus one block of temporaries.
    """
    if n < 8:
        raise ValueError(f"n must be at least 8, got {n}")
    t = np.arange(1, n) / n
    h = np.asarray(spec.hurst(t), dtype=float)
    if not np.all((h > 0) & (h < 1)):
        raise DomainError("Hurst field leaves (0, 1) on the sampling lattice")
    if spec.scale is not None and not np.all(np.asarray(spec.scale(t)) > 0):
        raise DomainError("scale function must be positive")
    m = n - 1
    cov = np.empty((m, m))
    for r0 in range(0, m, block):
        r1 = min(r0 + block, m)
        rows = _q_from_times(spec, t[r0:r1, None], t[None, r0:], h[r0:r1, None], h[None, r0:])
        cov[r0:r1, r0:] = rows
        cov[r0:, r0:r1] = rows.T
    return cov
