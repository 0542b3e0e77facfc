"""``hurstlab`` command line: simulate, estimate, mise, tables.

Exit status is 0 on success, 1 on domain errors and 2 on usage errors.
Every output file is accompanied by its resolved run configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotic_constants import (
    DEFAULT_K,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    asymptotic_variance,
    clt_stderr,
    default_h_grid,
    gamma_matrix,
    get_table,
)
from .errors import HurstLabError
from .estimators import EstimatorConfig, estimate
from .experiments import (
    DESK_TABLE_PRESET,
    PRESETS,
    hurst_field_for,
    paper_t_grid,
    reproduce_tables,
    run_mise,
)
from .fractional_kernels import lambda2, rho2
from .gaussian_sampler import SeedLineage, SampledPath, Stream, sample_mbm
from .mbm_covariance import MbmSpec

log = logging.getLogger("hurstlab")


@dataclass
class RunConfig:
    subcommand: str
    args: dict
    master_seed: int | None = None
    outputs: list = field(default_factory=list)
    preset: str | None = None
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))


# flags that change how a run executes but never what it computes
_EXECUTION_FLAGS = ("threads", "log_level", "func")


def _run_config(ns, outputs, master_seed=None, preset=None) -> RunConfig:
    args = {k: v for k, v in vars(ns).items() if k not in _EXECUTION_FLAGS}
    args = json.loads(json.dumps(args, default=str))
    return RunConfig(ns.command, args, master_seed, [str(o) for o in outputs], preset)


def _write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sidecar(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def _parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        a, b, s = (float(x) for x in text.split(":"))
        count = int(np.floor((b - a) / s + 1e-9)) + 1
        return np.round(a + s * np.arange(count), 10)
    return np.array([float(x) for x in text.split(",") if x.strip()])


def _table(ns, p):
    step = ns.table_step
    grid = default_h_grid() if step == 0.01 else _parse_grid(f"{step}:{1 - step}:{step}")
    return get_table(p=max(p, 2), h_grid=grid, K=ns.table_k, samples=ns.table_samples,
                     seed=ns.table_seed)


# -- simulate ----------------------------------------------------------------


def cmd_simulate(ns) -> int:
    hf = hurst_field_for(ns.case, ns.seed, 0)
    spec = MbmSpec(hf, ns.a_plus, ns.a_minus)
    path = sample_mbm(spec, ns.n, SeedLineage(ns.seed, 0, Stream.PATH, (0,)))
    t = path.times
    h = hf(t)
    out = Path(ns.out)
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "t", "Z", "H(t)"])
        for k in range(path.values.size):
            wr.writerow([k + 1, repr(float(t[k])), repr(float(path.values[k])), repr(float(h[k]))])
    cfg = _run_config(ns, [out], ns.seed)
    _write_json(_sidecar(out), {"run_config": asdict(cfg), "spec": spec.spec_id(),
                                "hurst_field": {"name": hf.name, "eta": _finite(hf.eta)},
                                "provenance": path.provenance})
    return 0


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


# -- estimate ----------------------------------------------------------------


def _read_path(path: Path) -> SampledPath:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise HurstLabError(f"{path} is empty")
    header = rows[0]
    try:
        float(header[0])
        col, body = 0, rows
    except ValueError:
        col = header.index("Z") if "Z" in header else 0
        body = rows[1:]
    values = np.array([float(r[col]) for r in body if r])
    return SampledPath(values, values.size + 1, {"source": str(path)})


def cmd_estimate(ns) -> int:
    path = _read_path(Path(ns.input))
    cfg = EstimatorConfig(ns.alpha, ns.p, ns.estimator)
    ts = paper_t_grid(path.n, ns.alpha) if ns.t_grid == "paper" else _parse_grid(ns.t_grid)
    # Sigma^(p) comes from the Monte Carlo table; Gamma is cheap to evaluate directly
    need_table = cfg.estimator == "IR2" or (ns.stderr and cfg.estimator == "IR")
    table = _table(ns, ns.p) if need_table else None
    curve = estimate(path, cfg, ts, table)
    stderr = np.full(ts.size, np.nan)
    if ns.stderr or cfg.estimator == "IR2":
        for r, h in enumerate(curve.h_hat):
            if np.isfinite(h):
                stderr[r] = _stderr(cfg, float(h), path.n, table)
    out = Path(ns.out)
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "h_hat", "clamped", "stderr", "estimator", "alpha", "p"])
        for r in range(ts.size):
            h = curve.h_hat[r]
            wr.writerow([repr(float(ts[r])), repr(float(h)) if np.isfinite(h) else "",
                         int(curve.clamp_flags[r]),
                         repr(float(stderr[r])) if np.isfinite(stderr[r]) else "",
                         cfg.estimator.lower(), ns.alpha, ns.p])
    meta = {"run_config": asdict(_run_config(ns, [out])), "n": path.n,
            "invalid_t": int((~curve.valid).sum()),
            "fallback_t": int(curve.fallback_flags.sum())}
    if table is not None:
        meta["asymptotic_table"] = table.mc_meta
    _write_json(_sidecar(out), meta)
    return 0


def _stderr(cfg, h, n, table):
    if table is not None:
        return clt_stderr(cfg.estimator, table.clip(h), n, cfg.alpha, cfg.p, table)
    gam = gamma_matrix(float(np.clip(h, 0.01, 0.99)), cfg.p)
    var = asymptotic_variance(cfg.estimator, cfg.p, gamma=gam)
    return float(np.sqrt(var / (2.0 * n ** (1.0 - cfg.alpha))))


# -- mise ---------------------------------------------------------------------


def cmd_mise(ns) -> int:
    preset = PRESETS[ns.preset]
    n = ns.n or preset["n"]
    reps = ns.reps or preset["reps"]
    n_fields = ns.n_fields or preset["n_fields"]
    est = ns.estimator.upper()
    table = _table(ns, ns.p) if est in ("IR2", "QV2") else None
    report = run_mise(ns.case, n, ns.alpha, est, reps, ns.seed, n_fields, table, ns.p, ns.threads)
    out = Path(ns.out) if ns.out else Path(f"mise_{report.case}_{n}_{ns.alpha:g}_{est.lower()}.json")
    per_t = out.with_name(out.stem + "_per_t.csv")
    report.write_per_t_csv(per_t)
    cfg = _run_config(ns, [out, per_t], ns.seed, ns.preset)
    cfg.args.update(n=n, reps=reps, n_fields=n_fields)
    d = report.to_dict(timing=False)
    d["run_config"] = asdict(cfg)
    d["execution"] = {"threads": ns.threads, "runtime_seconds": report.runtime_seconds}
    _write_json(out, d)
    print(f"{report.case} n={n} alpha={ns.alpha:g} {est}: sqrt(MISE) = {report.sqrt_mise:.4f} "
          f"(MC se {report.sqrt_mise_se:.4f}, {report.replications} reps x {report.n_fields} fields)")
    return 0


# -- tables -------------------------------------------------------------------


def cmd_tables(ns) -> int:
    out = Path(ns.out)
    start = time.perf_counter()
    if ns.what == "reproduce":
        preset = DESK_TABLE_PRESET if ns.preset == "desk" else PRESETS["paper"]
        reps = ns.reps or preset["reps"]
        n_fields = ns.n_fields or preset["n_fields"]
        table = _table(ns, 5)
        path = reproduce_tables(out, table, ns.seed, reps, n_fields, threads=ns.threads)
        cfg = _run_config(ns, [path, path.with_suffix(".json")], ns.seed, ns.preset)
        cfg.args.update(reps=reps, n_fields=n_fields)
        meta = json.loads(path.with_suffix(".json").read_text())
        meta["run_config"] = asdict(cfg)
        _write_json(path.with_suffix(".json"), meta)
        return 0
    grid = _parse_grid(ns.h_grid) if ns.h_grid else default_h_grid()
    meta = {}
    if ns.what in ("lambda2", "rho2"):
        fn = lambda2 if ns.what == "lambda2" else rho2
        header = ["h", ns.what]
        rows = [[repr(float(h)), repr(float(fn(h)))] for h in grid]
    elif ns.what == "gamma":
        header = ["h", "i", "j", "gamma"]
        rows, err = [], 0.0
        for h in grid:
            g, e = gamma_matrix(float(h), ns.p, with_error=True)
            err = max(err, e)
            rows += [[repr(float(h)), a + 1, b + 1, repr(float(g[a, b]))]
                     for a in range(ns.p) for b in range(ns.p)]
        meta["truncation_error"] = err
    else:
        table = get_table(p=ns.p, h_grid=grid, K=ns.table_k, samples=ns.table_samples,
                          seed=ns.table_seed)
        meta["asymptotic_table"] = table.mc_meta
        if ns.what == "sigma_p":
            header = ["h", "i", "j", "sigma_p", "stderr"]
            rows = [[repr(float(h)), a + 1, b + 1, repr(float(table.sigma_p[g, a, b])),
                     repr(float(table.sigma_p_se[g, a, b]))]
                    for g, h in enumerate(grid) for a in range(ns.p) for b in range(ns.p)]
        else:
            header = ["h", "IR", "QV", "IR2", "QV2"]
            rows = []
            for h in grid:
                vals = []
                for e in header[1:]:
                    pp = 1 if e == "IR" else ns.p
                    sig = table.sigma_p_at(h) if e in ("IR", "IR2") else None
                    gam = table.gamma_at(h) if e in ("QV", "QV2") else None
                    vals.append(repr(asymptotic_variance(e, pp, sig, gam)))
                rows.append([repr(float(h))] + vals)
            meta["quantity"] = "variance of the limit law of sqrt(2 n^(1-alpha)) (H_hat - H)"
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)
    meta["run_config"] = asdict(_run_config(ns, [out]))
    meta["execution"] = {"runtime_seconds": round(time.perf_counter() - start, 3)}
    _write_json(_sidecar(out), meta)
    return 0


# -- parser -------------------------------------------------------------------


def _table_flags(p):
    p.add_argument("--table-step", type=float, default=0.01,
                   help="H grid step of the asymptotic table (default 0.01)")
    p.add_argument("--table-samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--table-k", type=int, default=DEFAULT_K)
    p.add_argument("--table-seed", type=int, default=DEFAULT_SEED)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hurstlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hurstlab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (results do not depend on it)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate one MBM path")
    s.add_argument("--case", required=True, help="H1..H4, C1.5 or C0.6")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--a-plus", type=float, default=1.0)
    s.add_argument("--a-minus", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="estimate H(t) from a path CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--estimator", required=True, type=str.lower, choices=["ir", "qv", "ir2", "qv2"])
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--p", type=int, default=5)
    e.add_argument("--t-grid", default="paper",
                   help="'paper' or explicit values (comma list or start:stop:step)")
    e.add_argument("--stderr", action="store_true", help="add CLT standard errors")
    e.add_argument("--out", required=True)
    _table_flags(e)
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("mise", parents=[common], help="Monte Carlo root-MISE of one estimator")
    m.add_argument("--case", required=True)
    m.add_argument("--n", type=int)
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--estimator", required=True, type=str.lower, choices=["ir", "qv", "ir2", "qv2"])
    m.add_argument("--reps", type=int)
    m.add_argument("--n-fields", type=int)
    m.add_argument("--p", type=int, default=5)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--preset", choices=sorted(PRESETS), default="paper")
    m.add_argument("--out")
    _table_flags(m)
    m.set_defaults(func=cmd_mise)

    t = sub.add_parser("tables", parents=[common], help="constant tables or the full MISE reproduction grid")
    t.add_argument("--what", required=True,
                   choices=["lambda2", "rho2", "sigma_p", "gamma", "clt", "reproduce"])
    t.add_argument("--p", type=int, default=5)
    t.add_argument("--h-grid", help="start:stop:step or comma list (default 0.01:0.99:0.01)")
    t.add_argument("--seed", type=int, default=1, help="master seed for --what reproduce")
    t.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    t.add_argument("--reps", type=int)
    t.add_argument("--n-fields", type=int)
    t.add_argument("--out", required=True, help="CSV file, or directory for --what reproduce")
    _table_flags(t)
    t.set_defaults(func=cmd_tables)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=getattr(logging, str(ns.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if ns.threads < 1:
        ap.error("--threads must be at least 1")
    try:
        return ns.func(ns)
    except (HurstLabError, ValueError, ArithmeticError, OSError) as exc:
        print(f"hurstlab {ns.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
