"""Local Hurst estimators: IR, QV and their pseudo-GLS refinements IR2, QV2.

All four work on the neighborhood ``{k : |k/n - t| <= n^-alpha}`` of each
target time.  Per-dilatation statistics are precomputed once per path as
cumulative sums, so each target time costs O(p) after an O(p n) pass.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .asymptotic_constants import AsymptoticTable, gamma_matrix, psi
from .errors import DegenerateVariations, EmptyNeighborhood
from .filters import SECOND_ORDER, Filter, _values, apply_filter, dilate
from .fractional_kernels import EPS_H, lambda2_inverse

log = logging.getLogger(__name__)

ESTIMATORS = ("IR", "QV", "IR2", "QV2")
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float
    p: int = 5
    estimator: str = "IR"
    filter: Filter = SECOND_ORDER

    def __post_init__(self):
        object.__setattr__(self, "estimator", self.estimator.upper())
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        min_p = 1 if self.estimator == "IR" else 2
        if int(self.p) != self.p or self.p < min_p:
            raise ValueError(f"{self.estimator} needs p >= {min_p}, got {self.p}")
        if self.estimator in ("IR", "IR2") and self.filter != SECOND_ORDER:
            raise ValueError("increment-ratio estimators are defined for the (1, -2, 1) filter only")

    def to_dict(self):
        return {"alpha": self.alpha, "p": int(self.p), "estimator": self.estimator,
                "filter": self.filter.coeffs.tolist()}


@dataclass
class EstimateCurve:
    ts: np.ndarray
    h_hat: np.ndarray
    clamp_flags: np.ndarray
    config: EstimatorConfig
    stderr: Optional[np.ndarray] = None
    intercept: Optional[np.ndarray] = None   # QV2 only
    fallback_flags: Optional[np.ndarray] = None
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        m = len(self.ts)
        for name in ("h_hat", "clamp_flags", "stderr", "intercept", "fallback_flags", "valid"):
            v = getattr(self, name)
            if v is not None and len(v) != m:
                raise ValueError(f"{name} has length {len(v)}, expected {m}")


# -- neighborhoods -----------------------------------------------------------


def _bounds(n: int, alpha: float, t: float, kmax: int):
    r = n ** (-alpha)
    lo = max(1, int(np.ceil(n * (t - r) - _EDGE_TOL * n)))
    hi = min(kmax, int(np.floor(n * (t + r) + _EDGE_TOL * n)))
    return lo, hi


def neighborhood(n: int, alpha: float, t: float, q: int) -> np.ndarray:
    """Indices ``k in 1..n-q-1`` with ``|k/n - t| <= n^-alpha``."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    lo, hi = _bounds(n, alpha, t, n - q - 1)
    if hi < lo:
        raise EmptyNeighborhood(f"no index k in 1..{n - q - 1} within {n ** -alpha:.4g} of t={t}")
    return np.arange(lo, hi + 1)


def ir_statistic(path, f_dilated: Filter, nbhd) -> float:
    """Mean of ``psi(V(k), V(k+1))`` over ``k`` in ``nbhd`` (1-based indices)."""
    k = np.asarray(nbhd, dtype=int)
    if k.size == 0:
        raise EmptyNeighborhood("empty neighborhood")
    v = apply_filter(f_dilated, _values(path))
    if k.min() < 1 or k.max() + 1 > v.size:
        raise EmptyNeighborhood(f"neighborhood {k.min()}..{k.max()} exceeds the "
                                f"{v.size} available variations")
    return float(np.mean(psi(v[k - 1], v[k])))


def qv_log_vector(path, cfg: EstimatorConfig, nbhd) -> np.ndarray:
    """``log`` of the mean squared ``i``-dilated variations, ``i = 1..p``.

    Each dilatation uses the part of ``nbhd`` where its support fits.
    """
    x = _values(path)
    k = np.asarray(nbhd, dtype=int)
    out = np.empty(cfg.p)
    for i in range(1, cfg.p + 1):
        v = apply_filter(dilate(cfg.filter, i), x)
        kk = k[(k >= 1) & (k <= v.size)]
        if kk.size == 0:
            raise EmptyNeighborhood(f"no valid index for dilatation {i}")
        ms = float(np.mean(v[kk - 1] ** 2))
        if ms == 0.0:
            raise DegenerateVariations(f"dilatation {i} variations vanish on the neighborhood")
        out[i - 1] = np.log(ms)
    return out


# -- per-path precomputation -------------------------------------------------


class _PathStats:
    """Cumulative sums of ``psi`` and ``V^2`` per dilatation for O(1) window means."""

    def __init__(self, x: np.ndarray, f: Filter, p: int, need_ir: bool, need_qv: bool):
        self.n = x.size + 1
        self.psi_cs, self.sq_cs, self.ir_kmax, self.qv_kmax = [], [], [], []
        for i in range(1, p + 1):
            v = apply_filter(dilate(f, i), x)
            if need_ir:
                self.psi_cs.append(np.concatenate([[0.0], np.cumsum(psi(v[:-1], v[1:]))]))
                self.ir_kmax.append(v.size - 1)
            if need_qv:
                self.sq_cs.append(np.concatenate([[0.0], np.cumsum(v * v)]))
                self.qv_kmax.append(v.size)

    @staticmethod
    def _mean(cs, lo, hi):
        return (cs[hi] - cs[lo - 1]) / (hi - lo + 1)

    def ir_stats(self, alpha, t):
        out = np.empty(len(self.psi_cs))
        for i, cs in enumerate(self.psi_cs):
            lo, hi = _bounds(self.n, alpha, t, self.ir_kmax[i])
            if hi < lo:
                raise EmptyNeighborhood(f"t={t}: empty neighborhood for dilatation {i + 1}")
            out[i] = self._mean(cs, lo, hi)
        return out

    def qv_logs(self, alpha, t):
        out = np.empty(len(self.sq_cs))
        for i, cs in enumerate(self.sq_cs):
            lo, hi = _bounds(self.n, alpha, t, self.qv_kmax[i])
            if hi < lo:
                raise EmptyNeighborhood(f"t={t}: empty neighborhood for dilatation {i + 1}")
            ms = self._mean(cs, lo, hi)
            if not ms > 0.0:
                raise DegenerateVariations(f"t={t}: dilatation {i + 1} variations vanish")
            out[i] = np.log(ms)
        return out


def _clamp(h):
    h = np.asarray(h, dtype=float)
    c = (h < EPS_H) | (h > 1.0 - EPS_H)
    return np.clip(h, EPS_H, 1.0 - EPS_H), c


def qv_slope(tvec: np.ndarray) -> float:
    """Half the OLS slope of ``tvec`` against ``log i``."""
    p = tvec.shape[-1]
    a = np.log(np.arange(1, p + 1))
    a = a - a.mean()
    return 0.5 * (tvec @ a) / (a @ a)


def gls_fit(tvec: np.ndarray, gamma: Optional[np.ndarray], n: int):
    """GLS of ``tvec`` on rows ``(log(i/n), 1)``; returns ``(2H, C)``.

    ``gamma = None`` gives ordinary least squares.
    """
    p = tvec.size
    z = np.vstack([np.log(np.arange(1, p + 1) / n), np.ones(p)])
    if gamma is None:
        w_z, w_t = z.T, tvec
    else:
        w_z = np.linalg.solve(gamma, z.T)
        w_t = tvec
    coef = np.linalg.solve(z @ w_z, w_z.T @ w_t)
    return float(coef[0]), float(coef[1])


def gls_mean(values: np.ndarray, sigma: Optional[np.ndarray]) -> float:
    """``1' S^-1 x / 1' S^-1 1``; plain mean when ``sigma`` is None."""
    if sigma is None:
        return float(np.mean(values))
    w = np.linalg.solve(sigma, np.ones(values.size))
    return float(w @ values / w.sum())


def _solvable(m: np.ndarray) -> bool:
    if not np.all(np.isfinite(m)):
        return False
    return np.linalg.cond(m) < 1e12


# -- estimators --------------------------------------------------------------


def estimate(path, cfg: EstimatorConfig, ts, table: AsymptoticTable | None = None) -> EstimateCurve:
    """Estimate ``H(t)`` at each of ``ts``.

    IR2 needs ``table`` (Sigma^(p) over H); QV2 uses ``table`` for Gamma when
    given and the series otherwise.  A target time whose neighborhood is
    empty yields NaN with ``valid = False``.
    """
    return estimate_many(path, [cfg], ts, table)[0]


def estimate_many(path, cfgs, ts, table: AsymptoticTable | None = None) -> list[EstimateCurve]:
    """Several configurations on one path, sharing the filtered variations."""
    x = _values(path)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    n = x.size + 1
    by_filter = {}
    for c in cfgs:
        by_filter.setdefault(c.filter, []).append(c)
    stats = {}
    for f, group in by_filter.items():
        p = max(c.p for c in group)
        need_ir = any(c.estimator in ("IR", "IR2") for c in group)
        need_qv = any(c.estimator in ("QV", "QV2") for c in group)
        stats[f] = _PathStats(x, f, p, need_ir, need_qv)
    return [_estimate_curve(stats[c.filter], n, c, ts, table) for c in cfgs]


def _estimate_curve(st: _PathStats, n, cfg, ts, table):
    m = ts.size
    h = np.full(m, np.nan)
    clamp = np.zeros(m, bool)
    fallback = np.zeros(m, bool)
    valid = np.ones(m, bool)
    icpt = np.full(m, np.nan) if cfg.estimator == "QV2" else None
    if cfg.estimator == "IR2" and table is None:
        raise ValueError("IR2 needs an asymptotic table for its weight matrix")
    ir = cfg.estimator in ("IR", "IR2")
    p = 1 if cfg.estimator == "IR" else cfg.p
    stat = np.full((m, p), np.nan)
    for r, t in enumerate(ts):
        try:
            stat[r] = st.ir_stats(cfg.alpha, t)[:p] if ir else st.qv_logs(cfg.alpha, t)[:p]
        except EmptyNeighborhood as exc:
            log.debug("t=%g skipped: %s", t, exc)
            valid[r] = False
    ok = np.flatnonzero(valid)
    if ir:
        # invert every dilatation at once over the valid target times
        hs = np.empty((ok.size, p))
        flags = np.empty((ok.size, p), bool)
        for i in range(p):
            inv = lambda2_inverse(stat[ok, i], i + 1)
            hs[:, i], flags[:, i] = inv.h, inv.clamped
        if cfg.estimator == "IR":
            h[ok], clamp[ok] = hs[:, 0], flags[:, 0]
        else:
            for j, r in enumerate(ok):
                sig = table.sigma_p_at(table.clip(hs[j, 0]))[:p, :p]
                if not _solvable(sig):
                    fallback[r] = True
                    sig = None
                h[r], clamp[r] = _clamp(gls_mean(hs[j], sig))
    else:
        pilot, pc = _clamp(qv_slope(stat[ok]))
        if cfg.estimator == "QV":
            h[ok], clamp[ok] = pilot, pc
        else:
            for j, r in enumerate(ok):
                gam = _gamma_at(table, float(pilot[j]), cfg)
                if not _solvable(gam):
                    fallback[r] = True
                    gam = None
                two_h, c = gls_fit(stat[r], gam, n)
                h[r], clamp[r] = _clamp(0.5 * two_h)
                icpt[r] = c
    if fallback.any():
        log.warning("%s: weight matrix singular at %d target times, fell back to OLS",
                    cfg.estimator, int(fallback.sum()))
    return EstimateCurve(ts.copy(), h, clamp, cfg, intercept=icpt,
                         fallback_flags=fallback, valid=valid)


def _gamma_at(table, h, cfg):
    if table is not None and cfg.filter == SECOND_ORDER and table.p >= cfg.p:
        return table.gamma_at(table.clip(h))[: cfg.p, : cfg.p]
    return gamma_matrix(float(np.clip(h, 0.01, 0.99)), cfg.p, cfg.filter)


def estimate_ir(path, cfg: EstimatorConfig, ts) -> EstimateCurve:
    return estimate(path, _as(cfg, "IR"), ts)


def estimate_qv(path, cfg: EstimatorConfig, ts) -> EstimateCurve:
    return estimate(path, _as(cfg, "QV"), ts)


def estimate_ir2(path, cfg: EstimatorConfig, ts, table: AsymptoticTable) -> EstimateCurve:
    return estimate(path, _as(cfg, "IR2"), ts, table)


def estimate_qv2(path, cfg: EstimatorConfig, ts, table: AsymptoticTable | None = None) -> EstimateCurve:
    return estimate(path, _as(cfg, "QV2"), ts, table)


def _as(cfg, name):
    if cfg.estimator != name:
        raise ValueError(f"configuration is for {cfg.estimator}, not {name}")
    return cfg
