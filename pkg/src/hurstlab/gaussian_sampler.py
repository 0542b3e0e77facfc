"""Exact Gaussian path sampling by Cholesky factorization, seeded streams,
and the Hurst-function generators used in the simulation study.
"""
from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import MissingSeed, NotPositiveDefinite
from .fractional_kernels import check_hurst
from .mbm_covariance import HurstField, MbmSpec, covariance_matrix

log = logging.getLogger(__name__)

FIELD_GRID_SIZE = 6000
INTEGRATED_FBM_RANGE = (0.1, 0.9)
FBM_FIELD_RANGE = (0.05, 0.55)


class Stream(enum.IntEnum):
    PATH = 0
    HURST_FIELD = 1
    ASYMPTOTIC_MC = 2


@dataclass(frozen=True)
class SeedLineage:
    """``(master_seed, replication, stream)`` names one independent RNG stream.

    Streams are counter-based (Philox keyed through ``SeedSequence``), so the
    draws of one replication never depend on how many others ran before it.
    """

    master_seed: int
    replication: int = 0
    stream: Stream = Stream.PATH
    extra: tuple = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.master_seed) & (2**64 - 1),
            spawn_key=(int(self.stream), int(self.replication), *map(int, self.extra)),
        )
        return np.random.Generator(np.random.Philox(seq))

    def child(self, *extra) -> "SeedLineage":
        return SeedLineage(self.master_seed, self.replication, self.stream, self.extra + extra)

    def to_dict(self):
        return {"master_seed": int(self.master_seed), "replication": int(self.replication),
                "stream": self.stream.name.lower(), "extra": list(self.extra)}


@dataclass
class SampledPath:
    """Observations ``Z(k/n), k = 1..n-1``."""

    values: np.ndarray
    n: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n - 1,):
            raise ValueError(f"path of n={self.n} must hold n-1={self.n - 1} values, "
                             f"got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.n) / self.n

    def scaled(self, c: float) -> "SampledPath":
        return SampledPath(c * self.values, self.n, dict(self.provenance))


@dataclass
class CholeskyFactor:
    lower: np.ndarray
    jitter: float = 0.0
    jitter_log: list = field(default_factory=list)


def cholesky_factor(cov: np.ndarray) -> CholeskyFactor:
    """Lower Cholesky factor, retrying with growing diagonal jitter.

    Jitter starts at 1e-12 * max diagonal and grows tenfold up to 1e-8 * max
    diagonal; past that :class:`NotPositiveDefinite` is raised.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    try:
        return CholeskyFactor(scipy.linalg.cholesky(cov, lower=True, check_finite=False))
    except np.linalg.LinAlgError:
        pass
    dmax = float(np.max(np.diag(cov)))
    tried = []
    for rel in (1e-12, 1e-11, 1e-10, 1e-9, 1e-8):
        eps = rel * dmax
        tried.append(eps)
        try:
            lower = scipy.linalg.cholesky(cov + eps * np.eye(cov.shape[0]), lower=True,
                                          check_finite=False)
        except np.linalg.LinAlgError:
            continue
        log.warning("Cholesky needed diagonal jitter %.3g (%.0e x max diagonal)", eps, rel)
        return CholeskyFactor(lower, eps, [{"jitter": eps, "relative": rel}])
    raise NotPositiveDefinite(
        f"covariance not positive definite even with jitter {tried[-1]:.3g}"
    )


def _normals(seed: SeedLineage, size: int) -> np.ndarray:
    return seed.generator().standard_normal(size)


def sample_with_factor(factor: CholeskyFactor, seed: SeedLineage, provenance=None) -> SampledPath:
    xi = _normals(seed, factor.lower.shape[0])
    prov = {"seed": seed.to_dict(), "jitter": factor.jitter}
    prov.update(provenance or {})
    return SampledPath(factor.lower @ xi, factor.lower.shape[0] + 1, prov)


def sample_many(factor: CholeskyFactor, seeds, provenance=None) -> list[SampledPath]:
    """Paths for several seeds sharing one factor (one matrix product)."""
    seeds = list(seeds)
    xi = np.stack([_normals(s, factor.lower.shape[0]) for s in seeds], axis=1)
    z = factor.lower @ xi
    out = []
    for j, s in enumerate(seeds):
        prov = {"seed": s.to_dict(), "jitter": factor.jitter}
        prov.update(provenance or {})
        out.append(SampledPath(np.ascontiguousarray(z[:, j]), factor.lower.shape[0] + 1, prov))
    return out


def sample_gaussian_path(cov: np.ndarray, seed: SeedLineage) -> SampledPath:
    """``L xi`` with ``L`` the lower Cholesky factor of ``cov``."""
    return sample_with_factor(cholesky_factor(cov), seed)


def fbm_covariance(h: float, n: int) -> np.ndarray:
    t = np.arange(1, n) / n
    two_h = 2.0 * h
    return 0.5 * (t[:, None] ** two_h + t[None, :] ** two_h
                  - np.abs(t[:, None] - t[None, :]) ** two_h)


@functools.lru_cache(maxsize=4)
def _fbm_factor(h: float, n: int) -> CholeskyFactor:
    return cholesky_factor(fbm_covariance(h, n))


def sample_fbm(h: float, n: int, seed: SeedLineage) -> SampledPath:
    """Exact FBM on ``k/n``; the factor is cached per ``(h, n)``."""
    h = check_hurst(h)
    if n < 8:
        raise ValueError(f"n must be at least 8, got {n}")
    return sample_with_factor(_fbm_factor(h, int(n)), seed, {"spec": f"fbm(H={h:g})"})


def mbm_factor(spec: MbmSpec, n: int) -> CholeskyFactor:
    return cholesky_factor(covariance_matrix(spec, n))


def sample_mbm(spec: MbmSpec, n: int, seed: SeedLineage) -> SampledPath:
    return sample_with_factor(mbm_factor(spec, n), seed, {"spec": spec.spec_id()})


# -- Hurst functions ---------------------------------------------------------

CLOSED_FORMS = {
    "H1": lambda t: np.full(np.shape(t), 0.6),
    "H2": lambda t: 0.1 + 0.8 * np.asarray(t),
    "H3": lambda t: 0.5 + 0.4 * np.sin(5.0 * np.asarray(t)),
    "H4": lambda t: 0.1 + 0.8 * (1.0 - np.asarray(t)) * np.sin(10.0 * np.asarray(t)) ** 2,
}


def _rescale(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = x.max() - x.min()
    if span == 0.0:
        return np.full_like(x, 0.5 * (lo + hi))
    return lo + (hi - lo) * (x - x.min()) / span


def make_hurst_field(case: str, param: float | None = None, seed: SeedLineage | None = None,
                     grid_size: int = FIELD_GRID_SIZE) -> HurstField:
    """Build one of the Hurst functions of the simulation study.

    ``case`` is ``H1``..``H4`` (closed forms), ``integrated_fbm`` (``param`` =
    Hurst index h of the integrated FBM, regularity 1 + h) or ``fbm``
    (``param`` = eta).  Random trajectories are min-max rescaled into
    ``[0.1, 0.9]`` and ``[0.05, 0.55]`` respectively.
    """
    key = case.upper() if case.upper() in CLOSED_FORMS else case.lower()
    if key in CLOSED_FORMS:
        return HurstField.closed_form(CLOSED_FORMS[key], name=key, eta=np.inf)
    if key not in ("integrated_fbm", "fbm"):
        raise ValueError(f"unknown Hurst field case {case!r}")
    if seed is None:
        raise MissingSeed(f"Hurst field case {case!r} is random and needs a seed")
    if param is None:
        param = 0.5 if key == "integrated_fbm" else 0.6
    hval = check_hurst(param)
    seed = SeedLineage(seed.master_seed, seed.replication, Stream.HURST_FIELD, seed.extra)
    # node 0 is B(0) = 0, nodes k/N for k = 1..N-1 carry the sampled path
    grid = np.arange(grid_size) / grid_size
    path = np.concatenate([[0.0], sample_fbm(hval, grid_size, seed).values])
    if key == "integrated_fbm":
        raw = np.cumsum(path) / grid_size
        lo, hi = INTEGRATED_FBM_RANGE
        eta = 1.0 + hval
    else:
        raw = path
        lo, hi = FBM_FIELD_RANGE
        eta = hval
    values = _rescale(raw, lo, hi)
    meta = {"case": key, "param": hval, "rescale_range": [lo, hi], "grid_size": grid_size,
            "seed": seed.to_dict()}
    return HurstField.sampled(grid, values, name=f"{key}({hval:g})#{seed.replication}",
                              eta=eta, meta=meta)
