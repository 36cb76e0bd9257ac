"""Seeded ILS / ICS experiment sweeps with CSV and JSONL output.

Result files hold only deterministic fields; wall-clock times go to a
separate ``timings.csv`` so that re-running a configuration reproduces the
result files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .apps import (
    LAMBDAS,
    Metrics,
    best_over_sweep,
    compute_metrics,
    from_levels,
    gen_ics,
    gen_ils,
    omp_path,
    round_to_grid,
    solve_box_lasso,
    solve_rar,
    to_levels,
)
from .bruteforce import exhaustive_min
from .dca import DcaConfig, dca_local_search, dca_restart
from .errors import ArgumentError
from .lattice import theta_inv

SCHEMA = "dsmin-results/1"
WORKERS_ENV = "DSMIN_WORKERS"
EXHAUSTIVE_MAX_N = 14

ILS_METHODS = ("rar", "dca_ls", "dca_restart", "optimum")
ICS_METHODS = ("lasso", "omp", "dca_ls", "dca_ls_lasso")
METRIC_FIELDS = ("recovered", "ber", "rel_gap", "support_err", "est_err", "objective")
RESULT_FIELDS = ("experiment", "n", "m", "ratio", "snr_db", "seed", "method", "lambda") + METRIC_FIELDS + (
    "outer_iters",
    "status",
)


@dataclass
class ExperimentConfig:
    kind: str  # "ils" or "ics"
    n: int
    ratios: list[float]
    snr_db: float
    seeds: list[int]
    methods: list[str]
    dca: DcaConfig = field(default_factory=DcaConfig)
    s: int = 0
    lambdas: list[float] = field(default_factory=lambda: list(LAMBDAS))
    exhaustive: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.kind not in ("ils", "ics"):
            raise ArgumentError(f"unknown experiment {self.kind!r}")
        allowed = ILS_METHODS if self.kind == "ils" else ICS_METHODS
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ArgumentError(f"unknown methods {bad}; choose from {list(allowed)}")
        if not self.ratios or not self.seeds or not self.methods:
            raise ArgumentError("sweep lists must be non-empty")
        if self.kind == "ics" and not self.lambdas:
            raise ArgumentError("the lambda sweep must be non-empty")
        if self.kind == "ils" and "optimum" in self.methods and self.n > EXHAUSTIVE_MAX_N:
            raise ArgumentError(f"exhaustive optimum only for n <= {EXHAUSTIVE_MAX_N}")

    @property
    def m_values(self) -> list[int]:
        return [max(1, int(round(r * self.n))) for r in self.ratios]

    @property
    def lambda_order(self) -> list[float]:
        return sorted(self.lambdas, reverse=True)


@dataclass
class RunOutput:
    rows: list[dict] = field(default_factory=list)
    sweep_rows: list[dict] = field(default_factory=list)
    traces: list[str] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    error: str | None = None


def _row(cfg: ExperimentConfig, m: int, ratio: float, seed: int, method: str, lam, metrics: Metrics, trace=None) -> dict:
    row = {
        "experiment": cfg.kind,
        "n": cfg.n,
        "m": m,
        "ratio": ratio,
        "snr_db": cfg.snr_db,
        "seed": seed,
        "method": method,
        "lambda": "" if lam is None else lam,
    }
    d = asdict(metrics)
    for k in METRIC_FIELDS:
        row[k] = d[k]
    row["recovered"] = int(metrics.recovered)
    row["outer_iters"] = "" if trace is None else trace.iterations
    row["status"] = "" if trace is None else trace.status
    return row


def _trace_line(trace, **meta) -> str:
    buf = io.StringIO()
    trace.to_jsonl(buf, **meta)
    return buf.getvalue()


def _run_ils(cfg: ExperimentConfig, m: int, ratio: float, seed: int) -> RunOutput:
    out = RunOutput()
    inst = gen_ils(cfg.n, m, cfg.snr_db, seed)
    dec = inst.decomposition()
    F_star = None
    x_opt = None
    if cfg.exhaustive and cfg.n <= EXHAUSTIVE_MAX_N:
        t0 = time.perf_counter()
        lv, _ = exhaustive_min(dec.F)
        x_opt = from_levels(lv, inst.grid)
        F_star = inst.objective(x_opt)
        out.timings.append({"m": m, "seed": seed, "method": "exhaustive", "wall_time": time.perf_counter() - t0})

    t0 = time.perf_counter()
    x_rar = solve_rar(inst)
    t_rar = time.perf_counter() - t0
    x0 = to_levels(x_rar, inst.grid)
    meta = {"experiment": "ils", "m": m, "seed": seed}
    for method in cfg.methods:
        trace = None
        t0 = time.perf_counter()
        if method == "rar":
            v = x_rar
        elif method == "optimum":
            if x_opt is None:
                continue
            v = x_opt
        elif method == "dca_ls":
            x, trace = dca_local_search(dec, x0, cfg.dca)
            v = from_levels(x, inst.grid)
        else:
            x, trace = dca_restart(dec, theta_inv(x0, dec.lattice), cfg.dca)
            v = from_levels(x, inst.grid)
        wall = time.perf_counter() - t0 + (t_rar if method != "optimum" else 0.0)
        out.rows.append(_row(cfg, m, ratio, seed, method, None, compute_metrics(v, inst, F_star), trace))
        out.timings.append({"m": m, "seed": seed, "method": method, "wall_time": wall})
        if trace is not None:
            out.traces.append(_trace_line(trace, method=method, **meta))
    return out


def _run_ics(cfg: ExperimentConfig, m: int, ratio: float, seed: int) -> RunOutput:
    out = RunOutput()
    inst = gen_ics(cfg.n, m, cfg.s, cfg.snr_db, seed)
    grid = inst.grid
    zero = to_levels(np.zeros(cfg.n), grid)
    per_method: dict[str, list[Metrics]] = {k: [] for k in cfg.methods}
    meta = {"experiment": "ics", "m": m, "seed": seed}
    x_lasso = None
    x_dca = zero
    omp_iterates = []
    if "omp" in cfg.methods:
        t0 = time.perf_counter()
        omp_iterates = [round_to_grid(x, grid) for x in omp_path(inst, math.ceil(1.5 * cfg.s) if cfg.s else 1)]
        omp_iterates = omp_iterates or [np.zeros(cfg.n)]
        out.timings.append({"m": m, "seed": seed, "method": "omp", "wall_time": time.perf_counter() - t0})

    need_lasso = "lasso" in cfg.methods or "dca_ls_lasso" in cfg.methods
    for lam in cfg.lambda_order:
        dec = None
        if need_lasso:
            t0 = time.perf_counter()
            x_lasso = solve_box_lasso(inst, lam, x0=x_lasso)
            v_lasso = round_to_grid(x_lasso, grid)
            t_lasso = time.perf_counter() - t0
        for method in cfg.methods:
            trace = None
            t0 = time.perf_counter()
            if method == "omp":
                cands = [compute_metrics(v, inst, lam=lam) for v in omp_iterates]
                met = best_over_sweep(cands)
            else:
                if method == "lasso":
                    v = v_lasso
                else:
                    dec = dec or inst.decomposition(lam)
                    start = to_levels(v_lasso, grid) if method == "dca_ls_lasso" else x_dca
                    x, trace = dca_local_search(dec, start, cfg.dca)
                    if method == "dca_ls":
                        x_dca = x
                    v = from_levels(x, grid)
                met = compute_metrics(v, inst, lam=lam)
            wall = time.perf_counter() - t0
            if method in ("lasso", "dca_ls_lasso"):
                wall += t_lasso
            met.wall_time = wall
            per_method[method].append(met)
            out.sweep_rows.append(_row(cfg, m, ratio, seed, method, lam, met, trace))
            out.timings.append({"m": m, "seed": seed, "method": method, "lambda": lam, "wall_time": wall})
            if trace is not None:
                out.traces.append(_trace_line(trace, method=method, **{"lambda": lam}, **meta))
    for method in cfg.methods:
        out.rows.append(_row(cfg, m, ratio, seed, method, "best", best_over_sweep(per_method[method])))
    return out


def run_one(cfg: ExperimentConfig, m: int, ratio: float, seed: int) -> RunOutput:
    try:
        if cfg.kind == "ils":
            return _run_ils(cfg, m, ratio, seed)
        return _run_ics(cfg, m, ratio, seed)
    except Exception as exc:  # recorded per run, the sweep goes on
        return RunOutput(error=f"m={m} seed={seed}: {type(exc).__name__}: {exc}")


def _run_task(args):
    return run_one(*args)


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise ArgumentError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig) -> list[RunOutput]:
    """All runs, ordered by (sweep point, seed) whatever the worker count."""
    tasks = [(cfg, m, r, s) for m, r in zip(cfg.m_values, cfg.ratios) for s in cfg.seeds]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_task, tasks))
    return [run_one(*t) for t in tasks]


# ---------------------------------------------------------------------------
# Output


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and population standard deviation of each metric per (m, method)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["m"], r["method"]), []).append(r)
    out = []
    for (m, method), rs in groups.items():
        rec = {"experiment": rs[0]["experiment"], "n": rs[0]["n"], "m": m, "ratio": rs[0]["ratio"], "method": method, "runs": len(rs)}
        for k in METRIC_FIELDS:
            vals = np.array([float(r[k]) for r in rs])
            rec[f"{k}_mean"] = float(vals.mean())
            rec[f"{k}_std"] = float(vals.std())
        out.append(rec)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path: Path, rows: list[dict], fields) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SCHEMA}\n")
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in fields})


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_outputs(out_dir: Path, cfg: ExperimentConfig, runs: list[RunOutput]) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [r for run in runs for r in run.rows]
    write_csv(out_dir / "results.csv", rows, RESULT_FIELDS)
    summary = summarize(rows)
    summary_fields = ["experiment", "n", "m", "ratio", "method", "runs"] + [
        f"{k}_{s}" for k in METRIC_FIELDS for s in ("mean", "std")
    ]
    write_csv(out_dir / "summary.csv", summary, summary_fields)
    if cfg.kind == "ics":
        write_csv(out_dir / "sweep.csv", [r for run in runs for r in run.sweep_rows], RESULT_FIELDS)
    with open(out_dir / "traces.jsonl", "w") as fh:
        for run in runs:
            fh.writelines(run.traces)
    timing_fields = ["m", "seed", "method", "lambda", "wall_time"]
    write_csv(out_dir / "timings.csv", [t for run in runs for t in run.timings], timing_fields)
    errors = [run.error for run in runs if run.error]
    with open(out_dir / "errors.txt", "w") as fh:
        for e in errors:
            fh.write(e + "\n")
    meta = {
        "schema": SCHEMA,
        "experiment": cfg.kind,
        "n": cfg.n,
        "s": cfg.s,
        "ratios": cfg.ratios,
        "m_values": cfg.m_values,
        "snr_db": cfg.snr_db,
        "snr_reference": "noiseless A x_true",
        "seeds": cfg.seeds,
        "methods": cfg.methods,
        "lambdas": cfg.lambda_order if cfg.kind == "ics" else None,
        "epsilon": cfg.dca.epsilon,
        "epsilon_x": cfg.dca.epsilon_x,
        "max_outer": cfg.dca.max_outer,
        "subsolver": cfg.dca.subsolver,
        "runs_with_errors": len(errors),
    }
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"rows": rows, "summary": summary, "errors": errors}
