"""Bounded integer lattices and their row-nonincreasing relaxation.

A lattice ``prod_i {0, ..., k_i - 1}`` is relaxed to matrices with ``n`` rows
and ``max_i k_i - 1`` columns whose rows are non-increasing and lie in [0, 1].
When the ``k_i`` differ, cells ``(i, j)`` with ``j >= k_i - 1`` are
structurally absent: they always hold 0 and permutations never visit them.

Indices are 0-based throughout: cell ``(i, j)`` is the indicator of
``x_i >= j + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DomainError, InvariantError

BINARY_TOL = 1e-9
MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class Lattice:
    """The product lattice ``prod_i {0, ..., ks[i] - 1}``."""

    ks: tuple[int, ...]

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if len(ks) == 0:
            raise DomainError("a lattice needs at least one coordinate")
        if min(ks) < 1:
            raise DomainError(f"every coordinate needs k_i >= 1, got {ks}")
        object.__setattr__(self, "ks", ks)

    @classmethod
    def uniform(cls, n: int, k: int) -> "Lattice":
        return cls((k,) * n)

    @property
    def n(self) -> int:
        return len(self.ks)

    @cached_property
    def kvec(self) -> np.ndarray:
        v = np.asarray(self.ks, dtype=np.int64)
        v.setflags(write=False)
        return v

    @cached_property
    def width(self) -> int:
        return max(self.ks) - 1

    @cached_property
    def n_cells(self) -> int:
        return int(sum(k - 1 for k in self.ks))

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.ks, dtype=object))

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean ``n x width`` array, True on cells that exist."""
        m = np.arange(self.width)[None, :] < (self.kvec[:, None] - 1)
        m.setflags(write=False)
        return m

    @cached_property
    def cell_rows(self) -> np.ndarray:
        rows, _ = np.nonzero(self.mask)
        rows.setflags(write=False)
        return rows

    @cached_property
    def cell_cols(self) -> np.ndarray:
        _, cols = np.nonzero(self.mask)
        cols.setflags(write=False)
        return cols

    @cached_property
    def uniform_width(self) -> bool:
        return len(set(self.ks)) == 1

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n, dtype=np.int64)

    def top(self) -> np.ndarray:
        return self.kvec - 1

    def contains(self, x) -> bool:
        x = np.asarray(x)
        if x.shape != (self.n,):
            return False
        if not np.all(np.equal(np.mod(x, 1), 0)):
            return False
        return bool(np.all(x >= 0) and np.all(x <= self.kvec - 1))

    def check_point(self, x) -> np.ndarray:
        """Return ``x`` as an int64 vector, raising DomainError if infeasible."""
        arr = np.asarray(x)
        if arr.shape != (self.n,):
            raise DomainError(f"expected a point with {self.n} coordinates, got shape {arr.shape}")
        if not self.contains(arr):
            raise DomainError(f"point {arr.tolist()} lies outside the lattice {self.ks}")
        return arr.astype(np.int64)


@dataclass(frozen=True, eq=False)
class StackMatrix:
    """A row-nonincreasing matrix with entries in [0, 1] on a given lattice."""

    entries: np.ndarray
    lattice: Lattice

    def __post_init__(self):
        lat = self.lattice
        M = np.array(self.entries, dtype=float)
        if M.shape != (lat.n, lat.width):
            raise DomainError(f"expected a {lat.n}x{lat.width} matrix, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise DomainError("matrix entries must be finite")
        if np.any(M[~lat.mask] != 0.0):
            raise InvariantError("structurally absent cells must be zero")
        if np.any(M < -BINARY_TOL) or np.any(M > 1 + BINARY_TOL):
            raise DomainError("matrix entries must lie in [0, 1]")
        if lat.width > 1 and np.any(np.diff(M, axis=1) > MONOTONE_TOL):
            raise InvariantError("rows must be non-increasing")
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)

    @cached_property
    def integral(self) -> bool:
        M = self.entries
        return bool(np.all((np.abs(M) <= BINARY_TOL) | (np.abs(M - 1) <= BINARY_TOL)))

    def frobenius(self, other: "StackMatrix | np.ndarray") -> float:
        other = other.entries if isinstance(other, StackMatrix) else np.asarray(other)
        return float(np.sum(self.entries * other))


@dataclass(frozen=True, eq=False)
class PermutationPQ:
    """An ordering of all existing cells, as parallel row/column arrays."""

    rows: np.ndarray
    cols: np.ndarray
    lattice: Lattice
    row_stable: bool = False

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        lat = self.lattice
        if rows.shape != (lat.n_cells,) or cols.shape != rows.shape:
            raise ArgumentError(f"a permutation must list all {lat.n_cells} cells")
        flat = rows * max(lat.width, 1) + cols
        if lat.n_cells and (
            np.any(cols < 0) or np.any(cols >= lat.width) or np.any(rows < 0) or np.any(rows >= lat.n)
            or not np.all(lat.mask[rows, cols])
            or len(np.unique(flat)) != lat.n_cells
        ):
            raise ArgumentError("permutation is not a bijection onto the lattice cells")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    def __len__(self) -> int:
        return len(self.rows)

    def cells(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    @cached_property
    def key(self) -> bytes:
        return self.rows.tobytes()

    def is_traversal_of(self, X: "StackMatrix | np.ndarray", tol: float = 0.0) -> bool:
        """True if the matrix values are non-increasing along this order."""
        M = X.entries if isinstance(X, StackMatrix) else np.asarray(X)
        vals = M[self.rows, self.cols]
        return bool(np.all(np.diff(vals) <= tol))

    def is_row_stable(self) -> bool:
        # Within every row, columns must appear in increasing order.
        last = np.full(self.lattice.n, -1)
        for r, c in zip(self.rows.tolist(), self.cols.tolist()):
            if c < last[r]:
                return False
            last[r] = c
        return True


# ---------------------------------------------------------------------------
# Theta bijection


def theta(X: StackMatrix) -> np.ndarray:
    """Row sums of a binary stack matrix, i.e. the lattice point it encodes."""
    if not isinstance(X, StackMatrix):
        raise ArgumentError("theta expects a StackMatrix")
    if not X.integral:
        raise DomainError("theta is only defined on binary matrices")
    B = np.rint(X.entries)
    if X.lattice.width > 1 and np.any(np.diff(B, axis=1) > 0):
        raise InvariantError("binary rows must be non-increasing")
    return B.sum(axis=1).astype(np.int64)


def theta_inv(x, lattice: Lattice) -> StackMatrix:
    """Prefix-indicator matrix of a lattice point: ``X[i, j] = 1`` iff ``j < x_i``."""
    x = lattice.check_point(x)
    return StackMatrix(_theta_inv_array(x, lattice), lattice)


def _theta_inv_array(x: np.ndarray, lattice: Lattice) -> np.ndarray:
    return (np.arange(lattice.width)[None, :] < np.asarray(x)[:, None]).astype(float)


# ---------------------------------------------------------------------------
# Neighbourhoods


def neighbors(x, lattice: Lattice) -> list[np.ndarray]:
    """Feasible points at distance one, ordered by coordinate, down-move first."""
    x = lattice.check_point(x)
    out = []
    for i in range(lattice.n):
        for step in (-1, 1):
            y = x.copy()
            y[i] += step
            if 0 <= y[i] <= lattice.ks[i] - 1:
                out.append(y)
    return out


def comparable_ball(x, lattice: Lattice, radius: int) -> list[np.ndarray]:
    """Points ``x + d`` with ``1 <= |d|_1 <= radius`` and ``d >= 0`` or ``d <= 0``.

    Ordered by distance, then by the coordinate-lexicographic order of the
    move, down-moves before up-moves. For ``radius=1`` this is ``neighbors``.
    """
    x = lattice.check_point(x)
    if radius < 1:
        raise ArgumentError("radius must be at least 1")
    if radius == 1:
        return neighbors(x, lattice)
    out = []
    n = lattice.n
    for dist in range(1, radius + 1):
        for comp in _compositions(dist, n):
            d = np.asarray(comp, dtype=np.int64)
            for sign in (-1, 1):
                y = x + sign * d
                if lattice.contains(y):
                    out.append(y)
    return out


def _compositions(total: int, parts: int):
    """Non-negative integer vectors of length ``parts`` summing to ``total``, lex-descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# Permutations


def sort_row_stable(X: StackMatrix | np.ndarray, lattice: Lattice | None = None) -> PermutationPQ:
    """Non-increasing, row-stable cell order; ties go to the smaller row, then column."""
    if isinstance(X, StackMatrix):
        lattice, M = X.lattice, X.entries
    else:
        if lattice is None:
            raise ArgumentError("a raw array needs its lattice")
        M = np.asarray(X, dtype=float)
    rows, cols = _row_stable_order(M, lattice)
    return PermutationPQ(rows, cols, lattice, row_stable=True)


def _row_stable_order(M: np.ndarray, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    # The running row minimum guards against sub-ulp increases inside a row,
    # so the order is row-stable even for slightly non-monotone input.
    key = np.minimum.accumulate(M, axis=1)[lattice.cell_rows, lattice.cell_cols]
    order = np.argsort(-key, kind="stable")
    return lattice.cell_rows[order], lattice.cell_cols[order]


def common_permutation(x_t, xbar, lattice: Lattice, max_distance: int = 1) -> PermutationPQ:
    """A row-stable order that is non-increasing for both ``theta_inv`` images.

    ``xbar`` must be comparable with ``x_t`` (all moves up or all moves down)
    and within L1 distance ``max_distance``. Cells gained by an up-move are
    placed first among the zeros of ``theta_inv(x_t)``; cells lost by a
    down-move are placed last among its ones. Everything else keeps the
    row-major tie order of ``sort_row_stable``.
    """
    x = lattice.check_point(x_t)
    xb = lattice.check_point(xbar)
    delta = xb - x
    dist = int(np.abs(delta).sum())
    if dist == 0 or dist > max_distance:
        raise ArgumentError(f"{xb.tolist()} is not within distance {max_distance} of {x.tolist()}")
    if np.any(delta > 0) and np.any(delta < 0):
        raise ArgumentError("no common non-increasing order exists for incomparable points")
    rows, cols = lattice.cell_rows, lattice.cell_cols
    ones = cols < x[rows]
    moved = (cols >= np.minimum(x, xb)[rows]) & (cols < np.maximum(x, xb)[rows])
    if np.all(delta >= 0):
        groups = [ones, moved, ~ones & ~moved]
    else:
        groups = [ones & ~moved, moved, ~ones]
    idx = np.concatenate([np.nonzero(g)[0] for g in groups])
    return PermutationPQ(rows[idx], cols[idx], lattice, row_stable=True)


# ---------------------------------------------------------------------------
# Projection onto [0, 1]_down


def pav_nonincreasing(y: Sequence[float]) -> np.ndarray:
    """Least-squares non-increasing fit of ``y`` by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    means: list[float] = []
    sizes: list[int] = []
    for v in y:
        means.append(float(v))
        sizes.append(1)
        while len(means) > 1 and means[-2] < means[-1]:
            m2, s2 = means.pop(), sizes.pop()
            m1, s1 = means.pop(), sizes.pop()
            means.append((m1 * s1 + m2 * s2) / (s1 + s2))
            sizes.append(s1 + s2)
    return np.repeat(means, sizes)


def isotonic_rows(Y: np.ndarray) -> np.ndarray:
    """Row-wise non-increasing least-squares fit for equal-length rows.

    Uses the min-max formula ``x_j = min_{a<=j} max_{b>=j} mean(y[a..b])``,
    vectorized across rows; it agrees with ``pav_nonincreasing`` and is
    exactly monotone in floating point.
    """
    Y = np.asarray(Y, dtype=float)
    R, w = Y.shape
    if w <= 1:
        return Y.copy()
    if w == 2:
        a, b = Y[:, 0], Y[:, 1]
        avg = 0.5 * (a + b)
        bad = a < b
        out = Y.copy()
        out[bad, 0] = avg[bad]
        out[bad, 1] = avg[bad]
        return out
    if w > 48:
        return np.vstack([pav_nonincreasing(row) for row in Y])
    S = np.concatenate([np.zeros((R, 1)), np.cumsum(Y, axis=1)], axis=1)
    a = np.arange(w)
    length = a[None, :] - a[:, None] + 1  # [a, b]
    with np.errstate(invalid="ignore", divide="ignore"):
        means = (S[:, None, 1:] - S[:, :-1, None]) / length[None, :, :]
    valid = length > 0
    means = np.where(valid[None], means, -np.inf)
    suffix_max = np.maximum.accumulate(means[:, :, ::-1], axis=2)[:, :, ::-1]
    suffix_max = np.where(valid[None], suffix_max, np.inf)
    return suffix_max.min(axis=1)


def project_nonincreasing_array(M: np.ndarray, lattice: Lattice, clip: bool = True) -> np.ndarray:
    """Euclidean projection onto row-nonincreasing matrices, optionally boxed to [0, 1]."""
    M = np.asarray(M, dtype=float)
    out = np.zeros_like(M)
    if lattice.width == 0:
        return out
    if lattice.uniform_width:
        out[:] = isotonic_rows(M)
    else:
        for k in set(lattice.ks):
            if k <= 1:
                continue
            rows = np.nonzero(lattice.kvec == k)[0]
            out[np.ix_(rows, np.arange(k - 1))] = isotonic_rows(M[np.ix_(rows, np.arange(k - 1))])
    if clip:
        np.clip(out, 0.0, 1.0, out=out)
    out[~lattice.mask] = 0.0
    return out


def project_row_nonincreasing(M, lattice: Lattice) -> StackMatrix:
    """Frobenius projection of ``M`` onto ``[0,1]_down``: isotonic regression, then clipping."""
    M = np.asarray(M, dtype=float)
    if M.shape != (lattice.n, lattice.width):
        raise DomainError(f"expected a {lattice.n}x{lattice.width} matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError("cannot project a matrix with non-finite entries")
    return StackMatrix(project_nonincreasing_array(M, lattice), lattice)
