"""Exhaustive reference computations for small lattices.

Nothing here is clever on purpose: these routines are the independent
oracles every solver is checked against.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import RefusalError
from .lattice import Lattice
from .oracle import FunctionOracle, QuadraticOracle, QuadraticSpec

DEFAULT_BUDGET = 2**24
SLACK = 1e-10
_CHUNK = 1 << 16


class LatticeIterator:
    """Visits every point of a lattice once, in lexicographic order."""

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self._it = itertools.product(*(range(k) for k in lattice.ks))

    def __iter__(self):
        return self

    def __next__(self) -> np.ndarray:
        return np.array(next(self._it), dtype=np.int64)


def _check_budget(lattice: Lattice, budget: int) -> None:
    if lattice.size > budget:
        raise RefusalError(f"lattice has {lattice.size} points, budget is {budget}")


def all_points(lattice: Lattice, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    _check_budget(lattice, budget)
    grids = np.indices(lattice.ks).reshape(lattice.n, -1).T
    return grids.astype(np.int64)


def _point_blocks(lattice: Lattice):
    """Lexicographic blocks of points, without materializing the whole lattice."""
    total = lattice.size
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        yield start, np.stack(np.unravel_index(idx, lattice.ks), axis=1).astype(np.int64)


def value_blocks(F: FunctionOracle, budget: int = DEFAULT_BUDGET):
    """Yield ``(start, values)`` covering every point in lexicographic order."""
    _check_budget(F.lattice, budget)
    if isinstance(F, QuadraticOracle) and F.lattice.size > _CHUNK:
        yield from F.all_values_blocks()
        return
    for start, pts in _point_blocks(F.lattice):
        yield start, F.evaluate_batch(pts)


def all_values(F: FunctionOracle, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Full value table in lexicographic order (flattened)."""
    return np.concatenate([v for _, v in value_blocks(F, budget)])


def exhaustive_min(F: FunctionOracle, lattice: Lattice | None = None, budget: int = DEFAULT_BUDGET):
    """Global minimizer and minimum; ties go to the lexicographically first point."""
    lattice = F.lattice if lattice is None else lattice
    best_val, best_idx = np.inf, 0
    for start, vals in value_blocks(F, budget):
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_idx = float(vals[i]), start + i
    x = np.array(np.unravel_index(best_idx, lattice.ks), dtype=np.int64)
    return x, best_val


def max_abs_value(F: FunctionOracle, budget: int = DEFAULT_BUDGET) -> float:
    return max(float(np.abs(v).max()) for _, v in value_blocks(F, budget))


def check_submodular(F: FunctionOracle, lattice: Lattice | None = None, budget: int = 4096, slack: float = SLACK):
    """Check ``F(x) + F(y) >= F(x ^ y) + F(x v y)`` over all pairs.

    Returns ``(True, None)`` or ``(False, (x, y))`` with a violating pair.
    ``budget`` bounds the number of lattice points (pairs grow quadratically).
    """
    lattice = F.lattice if lattice is None else lattice
    pts = all_points(lattice, budget)
    vals = F.evaluate_batch(pts)
    strides = np.array([int(np.prod(lattice.ks[i + 1:])) for i in range(lattice.n)], dtype=np.int64)
    for a in range(len(pts)):
        x = pts[a]
        lo = np.minimum(x, pts[a + 1:])
        hi = np.maximum(x, pts[a + 1:])
        lhs = vals[a] + vals[a + 1:]
        rhs = vals[lo @ strides] + vals[hi @ strides]
        bad = np.nonzero(lhs < rhs - slack)[0]
        if len(bad):
            return False, (x.copy(), pts[a + 1 + bad[0]].copy())
    return True, None


def diminishing_return_gaps(F: FunctionOracle, budget: int = 4096):
    """Yield ``(x, i, j, ai, aj, gap)`` for every diminishing-returns tuple.

    ``gap = F(x+ai e_i) - F(x) - F(x+ai e_i+aj e_j) + F(x+aj e_j)``; ``F`` is
    submodular iff every gap is non-negative.
    """
    lattice = F.lattice
    pts = all_points(lattice, budget)
    vals = F.evaluate_batch(pts)
    table = vals.reshape(lattice.ks)
    for x in pts:
        for i in range(lattice.n):
            for j in range(lattice.n):
                if i == j:
                    continue
                for ai in range(1, lattice.ks[i] - x[i]):
                    for aj in range(1, lattice.ks[j] - x[j]):
                        xi = x.copy(); xi[i] += ai
                        xj = x.copy(); xj[j] += aj
                        xij = xi.copy(); xij[j] += aj
                        gap = table[tuple(xi)] - table[tuple(x)] - table[tuple(xij)] + table[tuple(xj)]
                        yield x, i, j, ai, aj, float(gap)


def check_diminishing_returns(F: FunctionOracle, budget: int = 4096, slack: float = SLACK):
    for x, i, j, ai, aj, gap in diminishing_return_gaps(F, budget):
        if gap < -slack:
            return False, (x, i, j, ai, aj)
    return True, None


def alpha_tight(F: FunctionOracle, budget: int = 4096) -> float:
    """Smallest diminishing-returns gap (0 if ``F`` is submodular)."""
    return min([0.0] + [g for *_, g in diminishing_return_gaps(F, budget)])


def check_local_min_exhaustive(F: FunctionOracle, x, eps: float, radius: int = 1) -> bool:
    """Compare ``F(x)`` with every point at L1 distance at most ``radius``."""
    lattice = F.lattice
    x = lattice.check_point(x)
    fx = F(x)
    for d in itertools.product(range(-radius, radius + 1), repeat=lattice.n):
        d = np.asarray(d)
        dist = np.abs(d).sum()
        if dist == 0 or dist > radius:
            continue
        y = x + d
        if lattice.contains(y) and fx > F(y) + eps:
            return False
    return True


def random_submodular(lattice: Lattice, seed, grids=None, scale: float = 1.0) -> QuadraticOracle:
    """``-1/2 v^T P v + w^T v`` with ``P >= 0`` off the diagonal, zero diagonal.

    Submodular by construction (non-positive mixed second differences).
    """
    rng = np.random.default_rng(seed)
    n = lattice.n
    P = rng.uniform(0.0, scale, size=(n, n))
    P = np.triu(P, 1)
    P = P + P.T
    w = rng.normal(0.0, scale * max(lattice.ks), size=n)
    if grids is None:
        grids = [np.arange(k, dtype=float) for k in lattice.ks]
    return QuadraticOracle(QuadraticSpec(-0.5 * P, w, grids))


def random_table(lattice: Lattice, seed, scale: float = 1.0):
    """A normalized function with i.i.d. uniform values (generally not submodular)."""
    from .oracle import TableOracle

    rng = np.random.default_rng(seed)
    vals = rng.uniform(-scale, scale, size=lattice.ks)
    return TableOracle(vals, lattice)
