"""Limit-law constants of the IR and QV estimators and their cached tables.

* ``gamma_matrix`` -- covariance of the log mean squared dilated variations
  (a convergent lattice series, evaluated deterministically).
* ``sigma_ij`` / ``sigma_p_matrix`` -- long-run covariances of increment
  ratios at two dilatations, by Monte Carlo on the exact 4-d Gaussian law of
  the two variation pairs at every lag.
* ``clt_stderr`` -- predicted standard errors of the four estimators.

Tables over a Hurst grid are cached as CSV + JSON under
``$HURSTLAB_TABLE_CACHE`` (default ``~/.cache/hurstlab``).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .errors import NonPositiveDefiniteLagCov, OutOfTableRange
from .filters import SECOND_ORDER, Filter, dilate
from .fractional_kernels import (
    check_hurst,
    fbm_cross_covariance,
    lambda2_derivative,
    lambda2_dilated,
)
from .gaussian_sampler import SeedLineage, Stream

log = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 1000
DEFAULT_K = 20
DEFAULT_SAMPLES = 200_000
DEFAULT_SEED = 20110101
CACHE_ENV = "HURSTLAB_TABLE_CACHE"


def default_h_grid(step: float = 0.01) -> np.ndarray:
    count = int(round(0.98 / step)) + 1
    return np.round(0.01 + step * np.arange(count), 10)


# -- Gamma ------------------------------------------------------------------


class GammaResult(NamedTuple):
    matrix: np.ndarray
    truncation_error: float


def gamma_matrix(h: float, p: int, f: Filter = SECOND_ORDER,
                 truncation: int = DEFAULT_TRUNCATION, with_error: bool = False):
    """Asymptotic covariance of ``(log mean |V^{(i)}|^2)_{i=1..p}``.

    Entry ``(i1, i2)`` is ``2/(i1 i2)^{2H} sum_{|j|<=J} [num(j)/den]^2`` with
    ``num(j) = sum a_k1 a_k2 |i1 k1 - i2 k2 + j|^{2H}`` and ``den`` its value
    at ``i1 = i2 = 1, j = 0``.  The neglected tail decays like
    ``j^{4H-4m}``; its integral estimate is returned when ``with_error``.
    """
    h = check_hurst(h)
    if truncation < 100:
        raise ValueError(f"truncation must be at least 100, got {truncation}")
    two_h = 2.0 * h
    k = np.arange(f.q + 1)
    w = np.outer(f.coeffs, f.coeffs)
    den = np.sum(w * np.abs(k[:, None] - k[None, :]) ** two_h)
    j = np.arange(-truncation, truncation + 1, dtype=float)
    out = np.empty((p, p))
    tail = 0.0
    decay = 4.0 * f.m - 2.0 * two_h
    for i1 in range(1, p + 1):
        for i2 in range(i1, p + 1):
            d = (i1 * k[:, None] - i2 * k[None, :]).ravel()
            num = np.abs(j[:, None] + d[None, :]) ** two_h @ w.ravel()
            terms = (num / den) ** 2
            val = 2.0 / (i1 * i2) ** two_h * np.sum(terms)
            out[i1 - 1, i2 - 1] = out[i2 - 1, i1 - 1] = val
            # two tails of sum_{j>J} c j^{-decay} ~ term(J) J / (decay - 1)
            edge = 2.0 / (i1 * i2) ** two_h * 0.5 * (terms[0] + terms[-1])
            tail = max(tail, 2.0 * edge * truncation / (decay - 1.0))
    return GammaResult(out, tail) if with_error else out


def gamma_from_correlations(h: float, p: int, f: Filter = SECOND_ORDER,
                            truncation: int = DEFAULT_TRUNCATION) -> np.ndarray:
    """Same matrix through ``Cov(X^2, Y^2) = 2 Cov(X, Y)^2`` applied to the
    lag correlations of dilated variations."""
    h = check_hurst(h)
    lags = np.arange(-truncation, truncation + 1, dtype=float)
    dil = [dilate(f, i) for i in range(1, p + 1)]
    var = [fbm_cross_covariance(g, g, h, 0.0) for g in dil]
    out = np.empty((p, p))
    for a in range(p):
        for b in range(p):
            cor = fbm_cross_covariance(dil[a], dil[b], h, lags) / np.sqrt(var[a] * var[b])
            out[a, b] = 2.0 * np.sum(cor**2)
    return out


# -- sigma_ij by Monte Carlo -------------------------------------------------


def psi(x, y):
    """``|x + y| / (|x| + |y|)``, set to 1 where both vanish."""
    num = np.abs(x + y)
    den = np.abs(x) + np.abs(y)
    return np.divide(num, den, out=np.ones_like(num), where=den > 0)


def _psd_chol2(c: np.ndarray, scale: float) -> np.ndarray:
    """Lower factor of a 2x2 PSD matrix, tolerating singularity relative to ``scale``."""
    tol = 1e-12 * scale
    if c[0, 0] < -tol or c[1, 1] < -tol:
        raise NonPositiveDefiniteLagCov(f"negative conditional variance: {c}")
    l11 = np.sqrt(c[0, 0]) if c[0, 0] > tol else 0.0
    l21 = c[1, 0] / l11 if l11 > 0 else 0.0
    rem = c[1, 1] - l21**2
    if rem < -1e-9 * scale:
        raise NonPositiveDefiniteLagCov(f"conditional covariance not PSD: {c}")
    l22 = np.sqrt(rem) if rem > tol else 0.0
    return np.array([[l11, 0.0], [l21, l22]])


def _pair_covariances(h, fi, fj, k):
    """Blocks of the covariance of ``(V_i(0), V_i(1))`` and ``(V_j(k), V_j(k+1))``."""
    sx = np.array([[fbm_cross_covariance(fi, fi, h, v - u) for v in (0, 1)] for u in (0, 1)])
    sy = np.array([[fbm_cross_covariance(fj, fj, h, v - u) for v in (0, 1)] for u in (0, 1)])
    sxy = np.array([[fbm_cross_covariance(fi, fj, h, k + v - u) for v in (0, 1)] for u in (0, 1)])
    return sx, sy, sxy


class SigmaEstimate(NamedTuple):
    value: float
    stderr: float


def sigma_ij(h: float, i: int, j: int, K: int = DEFAULT_K, samples: int = DEFAULT_SAMPLES,
             seed: SeedLineage | None = None) -> SigmaEstimate:
    """Monte Carlo estimate of ``sum_{|k|<=K} Cov(psi_i(0), psi_j(k))``.

    ``psi_i(k)`` is the increment ratio of ``(V_i(k), V_i(k+1))`` with ``V_i``
    the i-dilated second-order variations of FBM.  At each lag the second pair
    is drawn from its exact conditional law given the first, and the
    covariance is estimated as ``E[(psi_X - Lambda_i)(psi_Y - psi_Y0)]`` where
    ``Y0`` reuses the same innovations with the cross-covariance removed: its
    ratio is independent of ``psi_X``, so the estimator stays unbiased while
    most of the noise cancels at weakly correlated lags.

    The draws depend on ``(seed, i, j)`` only, so estimates at different ``h``
    share random numbers and the resulting tables are smooth in ``h``.
    """
    h = check_hurst(h)
    if K < 10:
        raise ValueError(f"K must be at least 10, got {K}")
    if samples < 100_000:
        raise ValueError(f"samples must be at least 1e5, got {samples}")
    if seed is None:
        seed = SeedLineage(DEFAULT_SEED, 0, Stream.ASYMPTOTIC_MC)
    rng = seed.child(i, j).generator()
    fi, fj = dilate(SECOND_ORDER, i), dilate(SECOND_ORDER, j)
    xi = rng.standard_normal((2, samples))
    eta = rng.standard_normal((2, samples))

    sx, sy, _ = _pair_covariances(h, fi, fj, 0)
    lx = np.linalg.cholesky(sx)
    ly = np.linalg.cholesky(sy)
    x = lx @ xi
    psi_x = psi(x[0], x[1]) - lambda2_dilated(i, h)
    y0 = ly @ eta
    psi_y0 = psi(y0[0], y0[1])
    acc = np.zeros(samples)
    for k in range(-K, K + 1):
        _, _, sxy = _pair_covariances(h, fi, fj, k)
        m = np.linalg.solve(lx, sxy).T  # Syx Lx^{-T}
        lc = _psd_chol2(sy - m @ m.T, float(sy[0, 0]))
        y = m @ xi + lc @ eta
        acc += psi(y[0], y[1]) - psi_y0
    prod = psi_x * acc
    return SigmaEstimate(float(prod.mean()), float(prod.std(ddof=1) / np.sqrt(samples)))


def sigma2(h: float, K: int = DEFAULT_K, samples: int = DEFAULT_SAMPLES,
           seed: SeedLineage | None = None) -> SigmaEstimate:
    """Long-run variance of the base increment ratios (``sigma_11``)."""
    return sigma_ij(h, 1, 1, K, samples, seed)


class SigmaP(NamedTuple):
    matrix: np.ndarray
    stderr: np.ndarray
    repaired: bool


def _floor_pd(m: np.ndarray, rel: float = 1e-8):
    vals, vecs = np.linalg.eigh(m)
    floor = rel * np.trace(m)
    if vals.min() > floor:
        return m, False
    fixed = (vecs * np.maximum(vals, floor)) @ vecs.T
    return 0.5 * (fixed + fixed.T), True


def sigma_p_matrix(h: float, p: int, K: int = DEFAULT_K, samples: int = DEFAULT_SAMPLES,
                   seed: SeedLineage | None = None) -> SigmaP:
    """Asymptotic covariance of the ``p`` dilated IR estimators.

    ``sigma_ij`` is divided by the slopes of ``lambda2_dilated(i, .)`` and
    ``lambda2_dilated(j, .)`` at ``h``.  Monte Carlo noise that breaks positive
    definiteness is repaired by flooring eigenvalues at 1e-8 x trace.
    """
    slopes = np.array([lambda2_derivative(h, i) for i in range(1, p + 1)])
    raw = np.empty((p, p))
    se = np.empty((p, p))
    for a in range(p):
        for b in range(a, p):
            est = sigma_ij(h, a + 1, b + 1, K, samples, seed)
            raw[a, b] = raw[b, a] = est.value
            se[a, b] = se[b, a] = est.stderr
    scale = np.outer(slopes, slopes)
    mat = raw / scale
    mat = 0.5 * (mat + mat.T)
    mat, repaired = _floor_pd(mat)
    if repaired:
        log.warning("Sigma^(p) at H=%.4f repaired by eigenvalue flooring", h)
    return SigmaP(mat, se / scale, repaired)


# -- asymptotic variances ----------------------------------------------------


def regression_row(p: int) -> np.ndarray:
    """Centered log dilatation indices ``log i - mean(log j)``."""
    li = np.log(np.arange(1, p + 1))
    return li - li.mean()


def asymptotic_variance(estimator: str, p: int, sigma_p: np.ndarray | None = None,
                        gamma: np.ndarray | None = None) -> float:
    """Variance of the Gaussian limit of ``sqrt(2 n^{1-alpha}) (H_hat - H)``."""
    est = estimator.upper()
    if est == "IR":
        return float(sigma_p[0, 0])
    if est == "IR2":
        ones = np.ones(p)
        return float(1.0 / (ones @ np.linalg.solve(sigma_p[:p, :p], ones)))
    if est == "QV":
        a = regression_row(p)
        return float(a @ gamma[:p, :p] @ a / (4.0 * (a @ a) ** 2))
    if est == "QV2":
        z = np.vstack([np.log(np.arange(1, p + 1)), np.ones(p)])
        info = z @ np.linalg.solve(gamma[:p, :p], z.T)
        return float(0.25 * np.linalg.inv(info)[0, 0])
    raise ValueError(f"unknown estimator {estimator!r}")


# -- tables -------------------------------------------------------------------


@dataclass
class AsymptoticTable:
    h_grid: np.ndarray
    p: int
    sigma_p: np.ndarray          # (G, p, p)
    gamma: np.ndarray            # (G, p, p)
    sigma_p_se: np.ndarray | None = None
    mc_meta: dict = field(default_factory=dict)

    def _interp(self, arr, h):
        g = self.h_grid
        if not (g[0] - 1e-12 <= h <= g[-1] + 1e-12):
            raise OutOfTableRange(f"H={h:.6g} outside table range [{g[0]:g}, {g[-1]:g}]")
        idx = int(np.clip(np.searchsorted(g, h) - 1, 0, g.size - 2))
        w = (h - g[idx]) / (g[idx + 1] - g[idx])
        w = min(max(w, 0.0), 1.0)
        return (1.0 - w) * arr[idx] + w * arr[idx + 1]

    def clip(self, h: float) -> float:
        return float(np.clip(h, self.h_grid[0], self.h_grid[-1]))

    def sigma_p_at(self, h: float) -> np.ndarray:
        return self._interp(self.sigma_p, h)

    def gamma_at(self, h: float) -> np.ndarray:
        return self._interp(self.gamma, h)

    # storage: one long CSV (h, matrix, i, j, value, stderr) + JSON metadata
    def save(self, stem: Path) -> None:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["h", "matrix", "i", "j", "value", "stderr"])
            for g, h in enumerate(self.h_grid):
                for a in range(self.p):
                    for b in range(self.p):
                        se = "" if self.sigma_p_se is None else repr(float(self.sigma_p_se[g, a, b]))
                        wr.writerow([repr(float(h)), "sigma_p", a + 1, b + 1,
                                     repr(float(self.sigma_p[g, a, b])), se])
                        wr.writerow([repr(float(h)), "gamma", a + 1, b + 1,
                                     repr(float(self.gamma[g, a, b])), ""])
        meta = dict(self.mc_meta, p=self.p, h_grid=[float(x) for x in self.h_grid])
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, stem: Path) -> "AsymptoticTable":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        grid = np.asarray(meta["h_grid"], dtype=float)
        p = int(meta["p"])
        sig = np.empty((grid.size, p, p))
        se = np.empty((grid.size, p, p))
        gam = np.empty((grid.size, p, p))
        index = {float(h): g for g, h in enumerate(grid)}
        with open(stem.with_suffix(".csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                g = index[float(row["h"])]
                a, b = int(row["i"]) - 1, int(row["j"]) - 1
                if row["matrix"] == "sigma_p":
                    sig[g, a, b] = float(row["value"])
                    se[g, a, b] = float(row["stderr"]) if row["stderr"] else np.nan
                else:
                    gam[g, a, b] = float(row["value"])
        meta.pop("h_grid")
        meta.pop("p")
        return cls(grid, p, sig, gam, se, meta)


def build_table(p: int = 5, h_grid=None, K: int = DEFAULT_K, samples: int = DEFAULT_SAMPLES,
                seed: int = DEFAULT_SEED, truncation: int = DEFAULT_TRUNCATION,
                progress=None) -> AsymptoticTable:
    grid = default_h_grid() if h_grid is None else np.asarray(h_grid, dtype=float)
    lineage = SeedLineage(seed, 0, Stream.ASYMPTOTIC_MC)
    sig = np.empty((grid.size, p, p))
    sig_se = np.empty((grid.size, p, p))
    gam = np.empty((grid.size, p, p))
    repaired = []
    trunc_err = 0.0
    start = time.perf_counter()
    for g, h in enumerate(grid):
        sp = sigma_p_matrix(h, p, K, samples, lineage)
        sig[g], sig_se[g] = sp.matrix, sp.stderr
        if sp.repaired:
            repaired.append(float(h))
        gr = gamma_matrix(h, p, truncation=truncation, with_error=True)
        gam[g] = gr.matrix
        trunc_err = max(trunc_err, gr.truncation_error)
        for name, mat in (("Sigma^(p)", sig[g]), ("Gamma", gam[g])):
            if np.linalg.eigvalsh(mat).min() <= 0:
                raise ArithmeticError(f"{name} not positive definite at H={h}")
        if progress is not None:
            progress(g + 1, grid.size)
    meta = {
        "samples": samples, "K": K, "seed": seed, "truncation": truncation,
        "gamma_truncation_error": trunc_err, "sigma_p_repaired_at": repaired,
        "method": "per-lag exact Gaussian Monte Carlo with independence control variate",
        "build_seconds": round(time.perf_counter() - start, 3), "version": __version__,
    }
    return AsymptoticTable(grid, p, sig, gam, sig_se, meta)


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "hurstlab"


def table_key(p, K, samples, seed, h_grid, truncation) -> str:
    grid = ",".join(f"{x:.10g}" for x in np.asarray(h_grid, dtype=float))
    raw = f"p={p};K={K};samples={samples};seed={seed};trunc={truncation};grid={grid}"
    return hashlib.sha1(raw.encode()).hexdigest()[:16]


def get_table(p: int = 5, h_grid=None, K: int = DEFAULT_K, samples: int = DEFAULT_SAMPLES,
              seed: int = DEFAULT_SEED, truncation: int = DEFAULT_TRUNCATION,
              directory: Path | None = None) -> AsymptoticTable:
    """Load a cached table or build and cache it."""
    grid = default_h_grid() if h_grid is None else np.asarray(h_grid, dtype=float)
    stem = Path(directory or cache_dir()) / f"asymptotic_p{p}_{table_key(p, K, samples, seed, grid, truncation)}"
    if stem.with_suffix(".json").exists() and stem.with_suffix(".csv").exists():
        try:
            return AsymptoticTable.load(stem)
        except (ValueError, KeyError) as exc:
            log.warning("unreadable cached table %s (%s); rebuilding", stem, exc)
    log.info("building asymptotic table p=%d on %d grid nodes", p, grid.size)
    table = build_table(p, grid, K, samples, seed, truncation)
    table.save(stem)
    return table


def clt_stderr(estimator: str, h: float, n: int, alpha: float, p: int,
               table: AsymptoticTable) -> float:
    """Predicted standard deviation of the estimator at ``H = h``."""
    if p > table.p:
        raise ValueError(f"table holds p={table.p} dilatations, {p} requested")
    est = estimator.upper()
    sig = table.sigma_p_at(h) if est in ("IR", "IR2") else None
    gam = table.gamma_at(h) if est in ("QV", "QV2") else None
    var = asymptotic_variance(est, p, sig, gam)
    return float(np.sqrt(var / (2.0 * n ** (1.0 - alpha))))
