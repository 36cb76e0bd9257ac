import numpy as np
import pytest

from dsmin.lattice import Lattice, StackMatrix


def random_stack(lat: Lattice, rng, integral_frac: float = 0.0) -> StackMatrix:
    """A random feasible relaxed point; rows sorted, absent cells zeroed."""
    M = -np.sort(-rng.uniform(size=(lat.n, lat.width)), axis=1)
    if integral_frac and rng.uniform() < integral_frac:
        M = np.round(M)
    M[~lat.mask] = 0.0
    return StackMatrix(M, lat)


def random_traversal(X: StackMatrix, rng):
    """A uniformly tie-broken non-increasing traversal (not necessarily row-stable)."""
    from dsmin.lattice import PermutationPQ

    lat = X.lattice
    vals = X.entries[lat.cell_rows, lat.cell_cols]
    order = np.lexsort((rng.permutation(len(vals)), -vals))
    return PermutationPQ(lat.cell_rows[order], lat.cell_cols[order], lat)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def concave_sum_table(lat: Lattice, rng, n_terms: int = 4, modular_scale: float = 1.0):
    """Submodular table: sum of concave functions of non-negative linear forms plus a modular part.

    Harder for the solvers than the quadratic generator (several kinks).
    """
    from dsmin.bruteforce import all_points
    from dsmin.oracle import ModularOracle, TableOracle

    pts = all_points(lat)
    vals = np.zeros(len(pts))
    for _ in range(n_terms):
        w = rng.uniform(0, 1, size=lat.n)
        top = pts.max(axis=0) @ w
        vals -= rng.uniform(0.5, 2.0) * np.abs(pts @ w - rng.uniform(0, top))
    W = rng.normal(0, modular_scale, size=(lat.n, lat.width))
    W[~lat.mask] = 0
    vals += ModularOracle(W, lat).evaluate_batch(pts)
    return TableOracle(vals.reshape(lat.ks), lat)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
