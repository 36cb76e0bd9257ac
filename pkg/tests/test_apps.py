import math

import numpy as np
import pytest

from dsmin.apps import (
    ICS_GRID,
    ILS_GRID,
    IcsInstance,
    IlsInstance,
    Metrics,
    best_over_sweep,
    compute_metrics,
    from_levels,
    gen_ics,
    gen_ils,
    lasso_objective,
    noise_sigma,
    omp_path,
    round_to_grid,
    solve_box_lasso,
    solve_omp,
    solve_rar,
    to_levels,
)
from dsmin.bruteforce import all_points
from dsmin.errors import ArgumentError


def ils_from(A, b, x, grid=ILS_GRID):
    return IlsInstance(A, b, np.asarray(x, float), 0.0, 0, math.inf, np.zeros(len(b)), grid=np.asarray(grid))


def ics_from(A, b, x):
    return IcsInstance(A, b, np.asarray(x, float), 0.0, 0, math.inf, b - A @ x, s=int(np.count_nonzero(x)))


def test_noise_sigma_example():
    signal = np.array([6.0, 8.0])  # squared norm 100
    xi = np.array([3.0, 4.0])  # squared norm 25
    assert noise_sigma(20.0, signal, xi) == pytest.approx(0.2, rel=1e-12)
    assert noise_sigma(math.inf, signal, xi) == 0.0


def test_gen_ils():
    inst = gen_ils(8, 10, math.inf, 3)
    assert np.array_equal(inst.b, inst.A @ inst.x_true)
    assert set(inst.x_true) <= set(ILS_GRID)
    again = gen_ils(8, 10, math.inf, 3)
    assert np.array_equal(inst.A, again.A) and np.array_equal(inst.b, again.b)
    a, b = gen_ils(6, 12, 20.0, 1), gen_ils(6, 12, 20.0, 1)
    assert a.A.tobytes() == b.A.tobytes() and a.b.tobytes() == b.b.tobytes()
    snr = 10 * np.log10(np.sum((a.A @ a.x_true) ** 2) / np.sum(a.noise**2))
    assert snr == pytest.approx(20.0, abs=1e-9)


def test_gen_ics():
    inst = gen_ics(10, 6, 0, 8.0, 0)
    assert not inst.x_true.any() and np.array_equal(inst.b, inst.noise)
    with pytest.raises(ArgumentError):
        gen_ics(4, 4, 5, 8.0, 0)
    inst = gen_ics(12, 7, 3, 8.0, 5)
    assert np.count_nonzero(inst.x_true) == 3 and set(inst.x_true) <= set(ICS_GRID)
    # entry variance 1/m
    m = 50
    A = np.concatenate([gen_ics(20, m, 2, 8.0, s).A.ravel() for s in range(10)])
    var = A.var()
    se = (1 / m) * math.sqrt(2 / (len(A) - 1))
    assert abs(var - 1 / m) <= 3 * se


def test_rar():
    for seed in range(5):
        inst = gen_ils(6, 24, math.inf, seed)
        assert np.array_equal(solve_rar(inst), inst.x_true)
    x = np.array([2.0, -1.0, 3.0, 0.0])
    assert np.array_equal(solve_rar(ils_from(np.eye(4), x.copy(), x)), x)


def test_omp():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((8, 12)) / math.sqrt(8)
    e1 = np.zeros(12)
    e1[0] = 1.0
    inst = ics_from(A, A @ e1, e1)
    path = omp_path(inst, 3)
    assert np.flatnonzero(path[0]).tolist() == [0]
    assert np.allclose(solve_omp(inst, 3), e1, atol=1e-8)
    with pytest.raises(ArgumentError):
        solve_omp(inst, 0)


def test_box_lasso():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((6, 5))
    inst = ics_from(A, rng.standard_normal(6), np.zeros(5))
    assert not solve_box_lasso(inst, 1e6).any()
    b = np.array([0.3, -2.0, 1.5, 0.0, -0.7])
    inst = ics_from(np.eye(5), b, np.zeros(5))
    assert np.allclose(solve_box_lasso(inst, 0.0, tol=1e-12, max_iters=5000), np.clip(b, -1, 1), atol=1e-8)
    hist = []
    inst = gen_ics(16, 8, 2, 8.0, 3)
    solve_box_lasso(inst, 0.1, history=hist)
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_box_lasso_optimality():
    # compare with a fine coordinate search on a tiny instance
    inst = gen_ics(2, 3, 1, 8.0, 2)
    lam = 0.3
    x = solve_box_lasso(inst, lam, tol=1e-12, max_iters=20000)
    grid = np.linspace(-1, 1, 401)
    best = min(lasso_objective(inst.A, inst.b, lam, np.array([u, v])) for u in grid for v in grid)
    assert lasso_objective(inst.A, inst.b, lam, x) <= best + 1e-9


def test_metrics_examples():
    x = np.array([1.0, 0.0, -1.0, 0.0])
    inst = ics_from(np.eye(4), x.copy(), x)
    m = compute_metrics(x, inst, lam=0.1)
    assert m.recovered and m.ber == 0 and m.support_err == 0 and m.est_err == 0
    y = x.copy()
    y[1] = 1.0
    assert compute_metrics(y, inst, lam=0.1).ber == 0.25
    xt = np.array([0.0, 1.0, 1.0, 0.0])
    xh = np.array([1.0, 1.0, 0.0, 0.0])
    inst = ics_from(np.eye(4), xt.copy(), xt)
    assert compute_metrics(xh, inst, lam=0.0).support_err == 2
    zero = ics_from(np.eye(3), np.zeros(3), np.zeros(3))
    m = compute_metrics(np.array([1.0, 0.0, 0.0]), zero, lam=0.0)
    assert m.est_err_flagged and m.est_err == 1.0


def test_rel_gap_reference():
    inst = gen_ils(6, 8, 20.0, 0)
    ref = inst.objective(inst.x_true)
    m = compute_metrics(inst.x_true, inst, F_star=ref / 2)
    assert m.rel_gap == pytest.approx(1.0)


def test_best_over_sweep():
    a = Metrics(False, 0.5, 0.2, 3, 0.9, 4.0, 1.0)
    b = Metrics(True, 0.0, 0.4, 0, 0.0, 5.0, 2.0)
    best = best_over_sweep([a, b])
    assert best.recovered and best.ber == 0.0 and best.rel_gap == 0.2 and best.objective == 4.0
    assert best.wall_time == 3.0
    with pytest.raises(ArgumentError):
        best_over_sweep([])


def test_grid_helpers():
    assert round_to_grid([0.4, 1.0, 2.6, 9], ILS_GRID).tolist() == [0.0, 0.0, 3.0, 3.0]
    assert to_levels(np.array([-1.0, 3.0]), ILS_GRID).tolist() == [0, 3]
    assert from_levels([0, 3], ILS_GRID).tolist() == [-1.0, 3.0]
    with pytest.raises(ArgumentError):
        to_levels(np.array([1.0]), ILS_GRID)


def test_quadratic_form_matches_objective():
    inst = gen_ils(4, 6, 20.0, 2)
    F = inst.decomposition().F
    pts = all_points(F.lattice)
    vals = np.array([inst.objective(inst.grid[x]) for x in pts])
    assert np.allclose(F.evaluate_batch(pts), vals - vals[0], atol=1e-9)
    inst = gen_ics(4, 3, 1, 8.0, 2)
    F = inst.decomposition(0.5).F
    pts = all_points(F.lattice)
    vals = np.array([inst.objective(inst.grid[x], 0.5) for x in pts])
    assert np.allclose(F.evaluate_batch(pts), vals - vals[0], atol=1e-9)
