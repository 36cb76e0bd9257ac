"""Function oracles on lattices and difference-of-submodular decompositions.

Every oracle is normalized at construction: the raw value at the all-zeros
point is cached and subtracted from every evaluation.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError, NumericError
from .lattice import Lattice, PermutationPQ

DEFAULT_CACHE_SIZE = 2**20


class FunctionOracle:
    """Normalized evaluation oracle ``F`` on a lattice.

    Subclasses implement ``_raw_batch`` (preferred, vectorized) or ``_raw``.
    ``eval_count`` counts raw evaluations; memoized hits do not increase it.
    """

    def __init__(self, lattice: Lattice, *, memoize: bool = False, cache_size: int = DEFAULT_CACHE_SIZE):
        self.lattice = lattice
        self.eval_count = 0
        self._lock = threading.Lock()
        self._cache: OrderedDict | None = OrderedDict() if memoize else None
        self._cache_size = int(cache_size)
        self.offset = 0.0
        self.offset = float(self._raw_batch(lattice.zeros()[None, :])[0])
        if not np.isfinite(self.offset):
            raise NumericError("oracle value at the minimal point is not finite")

    @property
    def n(self) -> int:
        return self.lattice.n

    # -- subclass hooks -----------------------------------------------------
    def _raw(self, x: np.ndarray) -> float:
        return float(self._raw_batch(x[None, :])[0])

    def _raw_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self._raw(x) for x in xs], dtype=float)

    # -- public API ---------------------------------------------------------
    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.int64)
        if self._cache is not None:
            key = x.tobytes()
            with self._lock:
                hit = self._cache.get(key)
                if hit is not None:
                    self._cache.move_to_end(key)
                    return hit
        value = float(self._raw_batch(x[None, :])[0]) - self.offset
        if not np.isfinite(value):
            raise NumericError(f"oracle returned a non-finite value at {x.tolist()}")
        with self._lock:
            self.eval_count += 1
            if self._cache is not None:
                self._cache[x.tobytes()] = value
                if len(self._cache) > self._cache_size:
                    self._cache.popitem(last=False)
        return value

    def evaluate_batch(self, xs) -> np.ndarray:
        """Values at the rows of ``xs`` (unmemoized, counted)."""
        xs = np.asarray(xs, dtype=np.int64)
        if xs.ndim != 2:
            raise ArgumentError("evaluate_batch expects a 2-d array of points")
        vals = self._raw_batch(xs) - self.offset
        if not np.all(np.isfinite(vals)):
            raise NumericError("oracle returned non-finite values")
        with self._lock:
            self.eval_count += len(xs)
        return vals

    def chain_values(self, perm: PermutationPQ) -> np.ndarray:
        """``F(y^0), ..., F(y^r)`` along the greedy chain of ``perm``."""
        return self.evaluate_batch(chain_points(perm))


def chain_points(perm: PermutationPQ) -> np.ndarray:
    """The ``(r + 1) x n`` array of chain points ``y^0 = 0, y^i = y^{i-1} + e_{p_i}``."""
    lat = perm.lattice
    r = len(perm.rows)
    steps = np.zeros((r + 1, lat.n), dtype=np.int64)
    steps[np.arange(1, r + 1), perm.rows] = 1
    return np.cumsum(steps, axis=0)


class CallableOracle(FunctionOracle):
    """Wraps a Python callable taking an integer vector."""

    def __init__(self, fn: Callable[[np.ndarray], float], lattice: Lattice, **kw):
        self.fn = fn
        super().__init__(lattice, **kw)

    def _raw(self, x):
        return float(self.fn(np.asarray(x)))


class TableOracle(FunctionOracle):
    """A function given by its full table of values, shape ``lattice.ks``."""

    def __init__(self, values, lattice: Lattice | None = None, **kw):
        values = np.asarray(values, dtype=float)
        if lattice is None:
            lattice = Lattice(values.shape)
        if values.shape != lattice.ks:
            raise ArgumentError(f"table shape {values.shape} does not match lattice {lattice.ks}")
        self.values = values
        super().__init__(lattice, **kw)

    def _raw_batch(self, xs):
        return self.values[tuple(np.asarray(xs).T)]


class ModularOracle(FunctionOracle):
    """``F(x) = sum_i sum_{j < x_i} W[i, j]`` (0-based columns)."""

    def __init__(self, W, lattice: Lattice, **kw):
        W = np.array(W, dtype=float)
        if W.shape != (lattice.n, lattice.width):
            raise ArgumentError(f"weights must be {lattice.n}x{lattice.width}, got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise NumericError("modular weights must be finite")
        W[~lattice.mask] = 0.0
        self.W = W
        self._prefix = np.concatenate([np.zeros((lattice.n, 1)), np.cumsum(W, axis=1)], axis=1)
        self._rows = np.arange(lattice.n)
        super().__init__(lattice, **kw)

    def _raw_batch(self, xs):
        return self._prefix[self._rows[None, :], np.asarray(xs)].sum(axis=1)


def modular_oracle(W, lattice: Lattice) -> ModularOracle:
    return ModularOracle(W, lattice)


@dataclass
class QuadraticSpec:
    """``v^T Q v + c^T v + lam * ||v||_q^q`` with ``v_i = grids[i][x_i]``."""

    Q: np.ndarray
    c: np.ndarray
    grids: list[np.ndarray]
    lam: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        self.grids = [np.asarray(g, dtype=float) for g in self.grids]
        n = len(self.grids)
        self.Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        self.c = np.asarray(self.c, dtype=float).reshape(n)
        for i, g in enumerate(self.grids):
            if g.ndim != 1 or len(g) == 0:
                raise DomainError(f"grid {i} must be a non-empty vector")
            if np.any(np.diff(g) <= 0):
                raise DomainError(f"grid {i} must be strictly increasing")
        if self.lam < 0:
            raise ArgumentError("sparsity weight must be non-negative")
        if not 0 <= self.q < 1:
            raise ArgumentError("exponent q must lie in [0, 1)")

    @property
    def lattice(self) -> Lattice:
        return Lattice(tuple(len(g) for g in self.grids))


def _grid_table(grids: Sequence[np.ndarray]) -> np.ndarray:
    kmax = max(len(g) for g in grids)
    T = np.zeros((len(grids), kmax))
    for i, g in enumerate(grids):
        T[i, : len(g)] = g
    return T


def sparsity_penalty(V: np.ndarray, q: float) -> np.ndarray:
    """Row-wise ``||v||_q^q`` with ``0^0 = 0``."""
    if q == 0:
        return np.count_nonzero(V, axis=-1).astype(float)
    return np.sum(np.abs(V) ** q, axis=-1)


class QuadraticOracle(FunctionOracle):
    def __init__(self, spec: QuadraticSpec, **kw):
        self.spec = spec
        self._table = _grid_table(spec.grids)
        self._rows = np.arange(len(spec.grids))
        super().__init__(spec.lattice, **kw)

    def values_of(self, xs) -> np.ndarray:
        return self._table[self._rows[None, :], np.asarray(xs)]

    def _raw_batch(self, xs):
        s = self.spec
        V = self.values_of(xs)
        # einsum keeps per-row arithmetic independent of the batch size
        out = np.einsum("ij,jk,ik->i", V, s.Q, V) + np.einsum("ij,j->i", V, s.c)
        if s.lam:
            out = out + s.lam * sparsity_penalty(V, s.q)
        return out

    def all_values_blocks(self, split: int | None = None):
        """Yield ``(start, values)`` blocks covering the lattice in lexicographic order.

        Uses a two-half split so the full table is produced with matrix
        products instead of per-point evaluation.
        """
        s = self.spec
        n = len(s.grids)
        split = n // 2 if split is None else split
        lo_grids, hi_grids = s.grids[:split], s.grids[split:]

        def enum(grids):
            if not grids:
                return np.zeros((1, 0))
            mesh = np.meshgrid(*grids, indexing="ij")
            return np.stack([m.ravel() for m in mesh], axis=1)

        V1, V2 = enum(lo_grids), enum(hi_grids)
        Q = s.Q
        Q11, Q22 = Q[:split, :split], Q[split:, split:]
        C = Q[:split, split:] + Q[split:, :split].T
        f1 = np.einsum("ij,jk,ik->i", V1, Q11, V1) + V1 @ s.c[:split]
        f2 = np.einsum("ij,jk,ik->i", V2, Q22, V2) + V2 @ s.c[split:]
        if s.lam:
            f1 = f1 + s.lam * sparsity_penalty(V1, s.q)
            f2 = f2 + s.lam * sparsity_penalty(V2, s.q)
        B = V1 @ C
        rows_per_block = max(1, (1 << 22) // max(len(V2), 1))
        for start in range(0, len(V1), rows_per_block):
            stop = min(start + rows_per_block, len(V1))
            block = f1[start:stop, None] + f2[None, :] + B[start:stop] @ V2.T
            yield start * len(V2), block.ravel() - self.offset


def quadratic_oracle(spec: QuadraticSpec) -> QuadraticOracle:
    return QuadraticOracle(spec)


class LinearCombinationOracle(FunctionOracle):
    """``sum_k coef_k * F_k`` over oracles sharing one lattice."""

    def __init__(self, terms: Sequence[tuple[float, FunctionOracle]], **kw):
        if not terms:
            raise ArgumentError("need at least one term")
        lattice = terms[0][1].lattice
        if any(o.lattice != lattice for _, o in terms):
            raise ArgumentError("all terms must live on the same lattice")
        self.terms = [(float(c), o) for c, o in terms]
        super().__init__(lattice, **kw)

    def _raw_batch(self, xs):
        out = np.zeros(len(xs))
        for c, o in self.terms:
            out += c * o.evaluate_batch(xs)
        return out

    def chain_values(self, perm):
        out = np.zeros(len(perm) + 1)
        for c, o in self.terms:
            out += c * o.chain_values(perm)
        return out - self.offset


def zero_oracle(lattice: Lattice) -> ModularOracle:
    return ModularOracle(np.zeros((lattice.n, lattice.width)), lattice)


class ComposedOracle(FunctionOracle):
    """``F'(x) = F(m(x))`` for per-coordinate level maps."""

    def __init__(self, inner, maps: Sequence[np.ndarray], **kw):
        self.inner = inner
        self.maps = [np.asarray(m) for m in maps]
        self._table = _grid_table([m.astype(float) for m in self.maps])
        self._rows = np.arange(len(self.maps))
        super().__init__(Lattice(tuple(len(m) for m in self.maps)), **kw)

    def _raw_batch(self, xs):
        mapped = self._table[self._rows[None, :], np.asarray(xs)]
        if isinstance(self.inner, FunctionOracle):
            return self.inner.evaluate_batch(mapped.astype(np.int64))
        return np.array([float(self.inner(v)) for v in mapped])


def _direction(m: np.ndarray) -> int:
    d = np.diff(np.asarray(m, dtype=float))
    if np.all(d >= 0) and np.all(d <= 0):
        return 0
    if np.all(d >= 0):
        return 1
    if np.all(d <= 0):
        return -1
    raise ArgumentError("level map is not monotone")


def compose_monotone(F, maps: Sequence[Sequence[float]]) -> ComposedOracle:
    """Reparametrize ``F`` coordinatewise by monotone maps.

    ``F`` is either a FunctionOracle (maps then send new levels to integer
    levels of ``F``'s lattice) or a callable on real vectors. All maps must
    share one direction, otherwise submodularity is not preserved.
    """
    if not maps:
        raise ArgumentError("need one map per coordinate")
    dirs = {_direction(m) for m in maps} - {0}
    if len(dirs) > 1:
        raise ArgumentError("maps must be all non-decreasing or all non-increasing")
    if isinstance(F, FunctionOracle):
        if len(maps) != F.n:
            raise ArgumentError("need one map per coordinate")
        for i, m in enumerate(maps):
            m = np.asarray(m)
            if np.any(m != np.round(m)) or np.any(m < 0) or np.any(m > F.lattice.ks[i] - 1):
                raise DomainError(f"map {i} leaves the lattice of the inner oracle")
    return ComposedOracle(F, maps)


# ---------------------------------------------------------------------------
# Decompositions


@dataclass
class DsDecomposition:
    """``F = G - H`` with ``G`` and ``H`` normalized submodular oracles."""

    G: FunctionOracle
    H: FunctionOracle
    provenance: str = "user"
    objective: FunctionOracle | None = field(default=None)

    def __post_init__(self):
        if self.G.lattice != self.H.lattice:
            raise ArgumentError("G and H must share a lattice")
        if self.objective is None:
            self.objective = LinearCombinationOracle([(1.0, self.G), (-1.0, self.H)])

    @property
    def F(self) -> FunctionOracle:
        return self.objective

    @property
    def lattice(self) -> Lattice:
        return self.G.lattice


def split_quadratic(Q) -> tuple[np.ndarray, np.ndarray]:
    Q = np.asarray(Q, dtype=float)
    return np.minimum(Q, 0.0), np.maximum(Q, 0.0)


def decompose_quadratic(spec: QuadraticSpec) -> DsDecomposition:
    """Split the quadratic form by sign; modular and sparsity terms go to ``G``."""
    Qm, Qp = split_quadratic(spec.Q)
    n = len(spec.grids)
    G = QuadraticOracle(QuadraticSpec(Qm, spec.c, spec.grids, spec.lam, spec.q))
    H = QuadraticOracle(QuadraticSpec(-Qp, np.zeros(n), spec.grids))
    return DsDecomposition(G, H, provenance="quadratic", objective=QuadraticOracle(spec))


def identity_grids(lattice: Lattice) -> list[np.ndarray]:
    return [np.arange(k, dtype=float) for k in lattice.ks]


def htilde_oracle(grids: Sequence[Sequence[float]]) -> QuadraticOracle:
    """``-1/2 (sum_i m_i(x_i))^2``, normalized; strictly submodular for n >= 2."""
    grids = [np.asarray(g, dtype=float) for g in grids]
    n = len(grids)
    return QuadraticOracle(QuadraticSpec(-0.5 * np.ones((n, n)), np.zeros(n), grids))


def min_gap_product(grids: Sequence[Sequence[float]]) -> float:
    """``min_{i != j} d_i d_j`` with ``d_i`` the smallest gap in grid ``i``.

    Coordinates with a single level have no gap and impose no constraint.
    Returns 1.0 when fewer than two coordinates have gaps.
    """
    gaps = sorted(float(np.min(np.diff(g))) for g in grids if len(g) > 1)
    if len(gaps) < 2:
        return 1.0
    return gaps[0] * gaps[1]


def decompose_generic(F: FunctionOracle, alpha: float, grids=None) -> DsDecomposition:
    """``G = F + (|alpha|/beta) Htilde``, ``H = (|alpha|/beta) Htilde``.

    ``alpha <= 0`` must lower-bound the diminishing-returns violation of ``F``.
    """
    if alpha > 0:
        raise ArgumentError("alpha must be non-positive")
    if alpha == 0:
        return DsDecomposition(F, zero_oracle(F.lattice), provenance="generic", objective=F)
    grids = identity_grids(F.lattice) if grids is None else grids
    return _scaled_htilde_decomposition(F, abs(alpha) / min_gap_product(grids), grids)


def decompose_smooth(F: FunctionOracle, lipschitz: float, grids=None) -> DsDecomposition:
    """Smooth-function variant: the scale is ``L_F / L_Htilde`` with ``L_Htilde = 1``."""
    if lipschitz < 0:
        raise ArgumentError("the gradient Lipschitz bound must be non-negative")
    if lipschitz == 0:
        return DsDecomposition(F, zero_oracle(F.lattice), provenance="generic", objective=F)
    grids = identity_grids(F.lattice) if grids is None else grids
    return _scaled_htilde_decomposition(F, float(lipschitz), grids)


def _scaled_htilde_decomposition(F, scale, grids) -> DsDecomposition:
    if [len(g) for g in grids] != list(F.lattice.ks):
        raise ArgumentError("grids do not match the oracle's lattice")
    Ht = htilde_oracle(grids)
    H = LinearCombinationOracle([(scale, Ht)])
    G = LinearCombinationOracle([(1.0, F), (scale, Ht)])
    return DsDecomposition(G, H, provenance="generic", objective=F)


def alpha_default(F: FunctionOracle | None = None, M: float | None = None) -> float:
    """``-4 M`` for ``M >= max |F|``; ``M`` is computed exhaustively when omitted."""
    if M is None:
        if F is None:
            raise ArgumentError("need either F or M")
        from .bruteforce import max_abs_value

        M = max_abs_value(F)
    if M < 0:
        raise ArgumentError("M bounds an absolute value and must be non-negative")
    return -4.0 * float(M)
