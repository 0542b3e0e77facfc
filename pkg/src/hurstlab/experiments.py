"""Monte Carlo protocol: replicated MBM paths, root-MISE over the standard
t-grid, and the full reproduction grid over (case, n, alpha, estimator).
"""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotic_constants import AsymptoticTable
from .estimators import ESTIMATORS, EstimatorConfig, estimate_many
from .gaussian_sampler import (
    SeedLineage,
    Stream,
    make_hurst_field,
    mbm_factor,
    sample_many,
)
from .mbm_covariance import MbmSpec
from .reference_tables import ALPHAS, CASES, SIZES, reference_value

log = logging.getLogger(__name__)

# random-field cases and the generator behind each
RANDOM_CASES = {"C1.5": ("integrated_fbm", 0.5), "C0.6": ("fbm", 0.6)}
PRESETS = {
    "desk": {"n": 1024, "reps": 50, "n_fields": 10},
    "paper": {"n": 6000, "reps": 100, "n_fields": 50},
}
# reduced replication counts for a desk-scale run of the full grid
DESK_TABLE_PRESET = {"reps": 20, "n_fields": 5}
TIMING_FIELDS = ("runtime_seconds",)


def paper_t_grid(n: int, alpha: float) -> np.ndarray:
    """``n^-alpha, n^-alpha + 0.01, ...`` up to ``min(1 - n^-alpha, n^-alpha + 0.99)``."""
    start = n ** (-alpha)
    stop = min(1.0 - start, start + 0.99)
    count = int(np.floor((stop - start) / 0.01 + 1e-9)) + 1
    return start + 0.01 * np.arange(count)


def normalize_case(case: str) -> str:
    key = case.upper()
    aliases = {"CASE2": "C1.5", "C15": "C1.5", "CASE3": "C0.6", "C06": "C0.6"}
    key = aliases.get(key, key)
    if key not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    return key


def hurst_field_for(case: str, master_seed: int, field_index: int = 0):
    case = normalize_case(case)
    if case in RANDOM_CASES:
        kind, param = RANDOM_CASES[case]
        return make_hurst_field(kind, param, SeedLineage(master_seed, field_index, Stream.HURST_FIELD))
    return make_hurst_field(case)


@dataclass
class MiseReport:
    case: str
    n: int
    alpha: float
    estimator: str
    replications: int
    n_fields: int
    sqrt_mise: float
    sqrt_mise_se: float
    ts: np.ndarray
    per_t_bias: np.ndarray
    per_t_var: np.ndarray
    runtime_seconds: float = 0.0
    mc_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("a MISE report needs at least 2 replications")

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        for k in ("ts", "per_t_bias", "per_t_var"):
            d[k] = [float(x) for x in d[k]]
        if not timing:
            for k in TIMING_FIELDS:
                d.pop(k, None)
        return d

    def write_json(self, path: Path, extra: dict | None = None, timing: bool = True) -> None:
        d = self.to_dict(timing)
        if extra:
            d.update(extra)
        Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")

    def write_per_t_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "bias", "variance", "mse"])
            for t, b, v in zip(self.ts, self.per_t_bias, self.per_t_var):
                wr.writerow([repr(float(t)), repr(float(b)), repr(float(v)), repr(float(b * b + v))])


def _summarize(errors: np.ndarray) -> tuple:
    """Per-t bias and variance, root-MISE and its MC standard error.

    ``errors`` has shape (runs, len(ts)); the variance is the population one
    so that ``bias^2 + var`` is the per-t mean squared error exactly.
    """
    bias = np.nanmean(errors, axis=0)
    var = np.nanmean((errors - bias) ** 2, axis=0)
    mise = float(np.mean(bias**2 + var))
    per_run = np.nanmean(errors**2, axis=1)
    se_mise = float(np.std(per_run, ddof=1) / np.sqrt(per_run.size))
    root = np.sqrt(mise)
    se = se_mise / (2.0 * root) if root > 0 else 0.0
    return bias, var, float(root), float(se)


def run_grid(case: str, n: int, alphas, estimators, reps: int, master_seed: int,
             n_fields: int = 50, table: AsymptoticTable | None = None, p: int = 5,
             threads: int = 1, a_plus: float = 1.0, a_minus: float = 1.0,
             progress=None) -> dict:
    """Root-MISE for every ``(alpha, estimator)`` from one shared set of paths.

    Returns ``{(alpha, estimator): MiseReport}``.  Smooth cases use one Hurst
    function; random cases pool squared errors over ``n_fields`` functions.
    Every path is drawn in the calling thread, so results do not depend on
    ``threads``.
    """
    case = normalize_case(case)
    if reps < 2:
        raise ValueError(f"reps must be at least 2, got {reps}")
    alphas = [float(a) for a in alphas]
    estimators = [e.upper() for e in estimators]
    fields_used = n_fields if case in RANDOM_CASES else 1
    cfgs = [EstimatorConfig(a, p, e) for a in alphas for e in estimators]
    grids = {a: paper_t_grid(n, a) for a in alphas}
    errors = {(c.alpha, c.estimator): [] for c in cfgs}
    clamped = {k: 0 for k in errors}
    invalid = {k: 0 for k in errors}
    fallback = {k: 0 for k in errors}
    start = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for f in range(fields_used):
            hf = hurst_field_for(case, master_seed, f)
            factor = mbm_factor(MbmSpec(hf, a_plus, a_minus), n)
            seeds = [SeedLineage(master_seed, r, Stream.PATH, (f,)) for r in range(reps)]
            paths = sample_many(factor, seeds)
            del factor
            truth = {a: hf(grids[a]) for a in alphas}

            def one(path):
                out = []
                for a in alphas:
                    sub = [c for c in cfgs if c.alpha == a]
                    out.extend(estimate_many(path, sub, grids[a], table))
                return out

            results = pool.map(one, paths) if pool else map(one, paths)
            for r, curves in enumerate(results):
                for c, curve in zip(cfgs, curves):
                    key = (c.alpha, c.estimator)
                    err = curve.h_hat - truth[c.alpha]
                    errors[key].append(err)
                    clamped[key] += int(curve.clamp_flags.sum())
                    invalid[key] += int((~curve.valid).sum())
                    fallback[key] += int(curve.fallback_flags.sum())
                if progress is not None:
                    progress(f * reps + r + 1, fields_used * reps)
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = time.perf_counter() - start
    out = {}
    for key, errs in errors.items():
        a, e = key
        bias, var, root, se = _summarize(np.array(errs))
        meta = {"master_seed": int(master_seed), "p": p, "clamped_entries": clamped[key],
                "invalid_entries": invalid[key], "fallback_entries": fallback[key],
                "a_plus": a_plus, "a_minus": a_minus, "version": __version__}
        if table is not None:
            meta["asymptotic_table"] = {k: table.mc_meta.get(k) for k in ("samples", "K", "seed", "truncation")}
        out[key] = MiseReport(case, n, a, e, reps, fields_used, root, se, grids[a], bias, var,
                              round(elapsed, 3), meta)
    return out


def run_mise(case: str, n: int, alpha: float, estimator: str, reps: int, master_seed: int,
             n_fields: int = 50, table: AsymptoticTable | None = None, p: int = 5,
             threads: int = 1) -> MiseReport:
    """Root-MISE of one estimator at one ``(n, alpha)``."""
    grid = run_grid(case, n, [alpha], [estimator], reps, master_seed, n_fields, table, p, threads)
    return grid[(float(alpha), estimator.upper())]


def reproduce_tables(out_dir, table: AsymptoticTable, master_seed: int = 1, reps: int = 100,
                     n_fields: int = 50, sizes=SIZES, alphas=ALPHAS, cases=CASES,
                     threads: int = 1, progress=None) -> Path:
    """Run the full grid and write ``mise_tables.csv`` + ``mise_tables.json``.

    Each row carries the simulated root-MISE, its MC standard error, the
    published value and their difference.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    start = time.perf_counter()
    for case in cases:
        for n in sizes:
            log.info("case %s, n=%d", case, n)
            grid = run_grid(case, n, alphas, ESTIMATORS, reps, master_seed, n_fields, table,
                            threads=threads)
            for a in alphas:
                for e in ESTIMATORS:
                    rep = grid[(float(a), e)]
                    ref = reference_value(case, n, e, a)
                    rows.append({
                        "table": 1 if case.startswith("H") else 2, "case": case, "n": n,
                        "alpha": a, "estimator": e, "sqrt_mise": rep.sqrt_mise,
                        "sqrt_mise_se": rep.sqrt_mise_se, "reference": ref,
                        "diff": None if ref is None else rep.sqrt_mise - ref,
                        "replications": rep.replications, "n_fields": rep.n_fields,
                    })
            if progress is not None:
                progress(case, n)
    path = out_dir / "mise_tables.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        for row in rows:
            wr.writerow({k: ("" if v is None else v) for k, v in row.items()})
    meta = {"master_seed": master_seed, "reps": reps, "n_fields": n_fields, "sizes": list(sizes),
            "alphas": list(alphas), "cases": list(cases), "rows": len(rows),
            "asymptotic_table": table.mc_meta, "version": __version__,
            "runtime_seconds": round(time.perf_counter() - start, 3)}
    (out_dir / "mise_tables.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path
