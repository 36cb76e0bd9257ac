"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line, printed in the pytest terminal
summary (and directly when this file is run as a script).
"""

import filecmp
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, concave_sum_table, random_stack, random_traversal
from dsmin.bruteforce import all_points, exhaustive_min, random_submodular, random_table
from dsmin.dca import LOCAL_MIN, DcaConfig, check_local_min, dca_local_search, dca_restart
from dsmin.experiments import ExperimentConfig, read_csv, run_experiment, write_outputs
from dsmin.extension import dual_lower_bound, evaluate_extension, greedy_subgradient
from dsmin.lattice import Lattice, StackMatrix, sort_row_stable, theta_inv
from dsmin.oracle import alpha_default, chain_points, decompose_generic
from dsmin.submodmin import SolverConfig, solve_pairwise_fw, solve_projected_subgradient


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def random_lattice(rng, max_size: int = 4096) -> Lattice:
    """2 to 6 coordinates, levels 2..6 (sometimes unequal), at most ``max_size`` points."""
    while True:
        n = int(rng.integers(2, 7))
        if rng.uniform() < 0.3:
            ks = tuple(int(k) for k in rng.integers(2, 7, size=n))
        else:
            ks = (int(rng.integers(2, 7)),) * n
        if math.prod(ks) <= max_size:
            return Lattice(ks)


# ---------------------------------------------------------------------------


def test_criterion_01_extension_exactness():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    shapes = [(2, 3), (3, 3), (3, 4)]
    for i in range(100):
        n, k = shapes[i % 3]
        lat = Lattice((k,) * n)
        F = random_table(lat, int(rng.integers(2**31)), scale=float(rng.uniform(0.1, 10)))
        for x in all_points(lat):
            worst = max(worst, abs(evaluate_extension(F, theta_inv(x, lat)) - F(x)))
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-12 and dt < 10, f"max error {worst:.1e} (tol 1e-12), {dt:.1f}s (< 10s)")


def test_criterion_02_permutation_invariance_and_linearity():
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    worst_perm = worst_lin = 0.0
    for _ in range(1000):
        lat = random_lattice(rng, 512)
        T = random_table(lat, int(rng.integers(2**31)))
        dec = decompose_generic(T, alpha_default(T))
        M = -np.sort(-rng.uniform(size=(lat.n, lat.width)), axis=1)
        M = np.round(M * rng.integers(1, 5)) / 4  # ties make permutations non-unique
        M = np.clip(M, 0, 1)
        M[~lat.mask] = 0.0
        X = StackMatrix(M, lat)
        p = random_traversal(X, rng)
        ref = evaluate_extension(dec.F, X)
        worst_perm = max(worst_perm, abs(evaluate_extension(dec.F, X, p) - ref))
        lin = evaluate_extension(dec.G, X, p) - evaluate_extension(dec.H, X, p)
        worst_lin = max(worst_lin, abs(evaluate_extension(dec.F, X, p) - lin))
    dt = time.perf_counter() - t0
    ok = worst_perm <= 1e-10 and worst_lin <= 1e-10 and dt < 30
    record(2, ok, f"permutation {worst_perm:.1e}, linearity {worst_lin:.1e} (tol 1e-10), {dt:.1f}s (< 30s)")


def test_criterion_03_subgradient_validity():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    worst = -np.inf
    checks = 0
    for i in range(50):
        lat = random_lattice(rng, 1024)
        F = random_submodular(lat, int(rng.integers(2**31))) if i % 2 else concave_sum_table(lat, rng)
        for _ in range(2):
            X = random_stack(lat, rng, 0.2)
            Y = greedy_subgradient(F, sort_row_stable(X)).Y
            fX = evaluate_extension(F, X)
            for _ in range(500):
                Z = random_stack(lat, rng, 0.2)
                slack = fX + float(np.sum(Y * (Z.entries - X.entries))) - evaluate_extension(F, Z)
                worst = max(worst, slack)
                checks += 1
    dt = time.perf_counter() - t0
    record(3, worst <= 1e-9 and dt < 30, f"{checks} inequalities, worst violation {worst:.1e} (tol 1e-9), {dt:.1f}s (< 30s)")


def test_criterion_04_subproblem_optimality():
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    fails = []
    budget_hits = {"pfw": 0, "psg": 0}
    for i in range(200):
        lat = random_lattice(rng)
        F = random_submodular(lat, int(rng.integers(2**31))) if i % 2 else concave_sum_table(lat, rng)
        _, fstar = exhaustive_min(F)
        for name, solve in (("pfw", solve_pairwise_fw), ("psg", solve_projected_subgradient)):
            cfg = SolverConfig()
            res = solve(F, cfg)
            budget_hits[name] += not res.converged
            if res.value - fstar > max(cfg.epsilon_x, 1e-4) or res.dual_bound > fstar + 1e-9:
                fails.append((i, name, res.value - fstar, res.dual_bound - fstar))
    dt = time.perf_counter() - t0
    record(4, not fails and dt < 120,
           f"200 instances x 2 solvers, {len(fails)} failures, budget stops {budget_hits}, {dt:.1f}s (< 120s)")


@pytest.fixture(scope="module")
def ds_suite():
    """200 generic DS instances with both DCA variants run at epsilon = 1e-3."""
    rng = np.random.default_rng(105)
    eps = 1e-3
    cfg = DcaConfig(epsilon=eps)
    runs = []
    t0 = time.perf_counter()
    for _ in range(200):
        lat = random_lattice(rng)
        T = random_table(lat, int(rng.integers(2**31)), scale=float(rng.uniform(0.5, 5)))
        dec = decompose_generic(T, alpha_default(T))
        x0 = np.array([rng.integers(0, k) for k in lat.ks])
        _, fstar = exhaustive_min(dec.F)
        x_ls, tr_ls = dca_local_search(dec, x0, cfg)
        x_rs, tr_rs = dca_restart(dec, theta_inv(x0, lat), cfg)
        runs.append(dict(dec=dec, x0=x0, fstar=fstar, ls=(x_ls, tr_ls), rs=(x_rs, tr_rs)))
    return cfg, runs, time.perf_counter() - t0


def test_criterion_05_dca_ls_contract(ds_suite):
    cfg, runs, dt = ds_suite
    eps, eps_x = cfg.epsilon, cfg.epsilon_x
    descent = localmin = bound = budget = 0
    for r in runs:
        F = r["dec"].F
        x, tr = r["ls"]
        descent += sum(rec.next_value > rec.value + eps_x for rec in tr.records)
        if tr.status != LOCAL_MIN:
            budget += 1
            continue
        localmin += not check_local_min(F, x, eps + eps_x)[0]
        bound += tr.iterations > (F(r["x0"]) - r["fstar"]) / eps + 1
    ok = descent == localmin == bound == budget == 0 and dt < 300
    record(5, ok, f"violations: descent {descent}, local-min {localmin}, iteration bound {bound}; "
                  f"unfinished runs {budget}; suite {dt:.1f}s (< 300s)")


def test_criterion_06_chain_guarantee(ds_suite):
    cfg, runs, _ = ds_suite
    eps, eps_x = cfg.epsilon, cfg.epsilon_x
    checked = violations = 0
    for r in runs:
        F = r["dec"].F
        x, tr = r["ls"]
        if tr.status != LOCAL_MIN or not tr.stop_perm.is_row_stable():
            continue
        checked += 1
        chain = F.evaluate_batch(chain_points(tr.stop_perm))
        violations += bool(F(x) > chain.min() + eps + eps_x)
    record(6, violations == 0 and checked > 0, f"{checked} row-stable stops checked, {violations} violations")


def test_criterion_07_restart_contract(ds_suite):
    cfg, runs, _ = ds_suite
    eps_p = cfg.epsilon_prime
    localmin = drops = restarts = unfinished = 0
    for r in runs:
        F = r["dec"].F
        x, tr = r["rs"]
        for rec in tr.records:
            if rec.restarted:
                restarts += 1
                drops += not (rec.value - rec.next_value > eps_p)
        if tr.status != LOCAL_MIN:
            unfinished += 1
            continue
        localmin += not check_local_min(F, x, eps_p)[0]
    ok = localmin == drops == unfinished == 0
    record(7, ok, f"{restarts} restarts, violations: local-min {localmin}, drop {drops}; unfinished runs {unfinished}")


def _by(rows, key):
    out = {}
    for r in rows:
        out.setdefault(key(r), []).append(r)
    return out


def test_criterion_08_ils_trend(tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(kind="ils", n=12, ratios=[1.0, 1.25, 1.5, 2.0], snr_db=20.0, seeds=list(range(20)),
                           methods=["rar", "dca_ls", "optimum"], dca=DcaConfig(max_outer=50))
    res = write_outputs(tmp_path, cfg, run_experiment(cfg))
    dt = time.perf_counter() - t0
    summ = {(s["m"], s["method"]): s for s in res["summary"]}
    gap_ok = rec_ok = True
    rec_curve = []
    parts = []
    for m in cfg.m_values:
        d, b = summ[(m, "dca_ls")], summ[(m, "rar")]
        gap_ok &= d["rel_gap_mean"] <= b["rel_gap_mean"]
        rec_ok &= d["recovered_mean"] >= b["recovered_mean"]
        rec_curve.append(d["recovered_mean"])
        parts.append(f"m={m}: rec {d['recovered_mean']:.2f}/{b['recovered_mean']:.2f} gap {d['rel_gap_mean']:.3g}/{b['rel_gap_mean']:.3g}")
    drops = [a - b for a, b in zip(rec_curve, rec_curve[1:]) if b < a]
    mono_ok = len(drops) <= 1 and all(x <= 0.05 + 1e-12 for x in drops)
    ok = gap_ok and rec_ok and mono_ok and not res["errors"] and dt < 600
    record(8, ok, f"DCA-LS/RAR {'; '.join(parts)}; {dt:.0f}s (< 600s)")


def test_criterion_09_ics(tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(kind="ics", n=32, s=3, ratios=[0.25, 0.5, 0.75, 1.0], snr_db=8.0, seeds=list(range(50)),
                           methods=["lasso", "dca_ls_lasso"], dca=DcaConfig(max_outer=25))
    res = write_outputs(tmp_path, cfg, run_experiment(cfg))
    dt = time.perf_counter() - t0
    eps_x = cfg.dca.epsilon_x
    sweep = read_csv(tmp_path / "sweep.csv")
    lasso = {(r["m"], r["seed"], r["lambda"]): float(r["objective"]) for r in sweep if r["method"] == "lasso"}
    descent_viol = sum(
        float(r["objective"]) > lasso[(r["m"], r["seed"], r["lambda"])] + eps_x
        for r in sweep if r["method"] == "dca_ls_lasso"
    )
    summ = {(s["m"], s["method"]): s for s in res["summary"]}
    rec_ok = True
    parts = []
    for m in cfg.m_values:
        d, b = summ[(m, "dca_ls_lasso")]["recovered_mean"], summ[(m, "lasso")]["recovered_mean"]
        rec_ok &= d >= b
        parts.append(f"m={m}: {d:.2f}/{b:.2f}")
    ok = descent_viol == 0 and rec_ok and not res["errors"] and dt < 900
    record(9, ok, f"{len(sweep) // 2} per-lambda runs, {descent_viol} descent violations; "
                  f"recovery DCA-LS-LASSO/LASSO {'; '.join(parts)}; {dt:.0f}s (< 900s)")


def test_criterion_10_determinism(tmp_path):
    names = ["results.csv", "summary.csv", "traces.jsonl", "errors.txt", "meta.json"]
    cfgs = [
        ExperimentConfig(kind="ils", n=8, ratios=[1.0, 1.5], snr_db=20.0, seeds=[7, 8, 9],
                         methods=["rar", "dca_ls", "dca_restart", "optimum"]),
        ExperimentConfig(kind="ics", n=12, s=2, ratios=[0.5, 1.0], snr_db=8.0, seeds=[7, 8],
                         methods=["lasso", "omp", "dca_ls", "dca_ls_lasso"], dca=DcaConfig(max_outer=25)),
    ]
    bad = []
    for cfg in cfgs:
        a, b = tmp_path / f"{cfg.kind}-a", tmp_path / f"{cfg.kind}-b"
        write_outputs(a, cfg, run_experiment(cfg))
        write_outputs(b, cfg, run_experiment(cfg))
        files = names + (["sweep.csv"] if cfg.kind == "ics" else [])
        _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
        bad += [f"{cfg.kind}/{f}" for f in mismatch + errors]
    record(10, not bad, "result files bit-identical across re-runs" if not bad else f"differing files: {bad}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
