"""The continuous extension of a lattice function and its greedy calculus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .lattice import Lattice, PermutationPQ, StackMatrix, sort_row_stable
from .oracle import FunctionOracle

TRAVERSAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SubgradientMatrix:
    """Greedy marginal gains ``Y`` laid out on the cells, with their permutation."""

    Y: np.ndarray
    perm: PermutationPQ

    @property
    def lattice(self) -> Lattice:
        return self.perm.lattice


def _resolve_perm(X: StackMatrix, perm: PermutationPQ | None) -> PermutationPQ:
    if perm is None:
        return sort_row_stable(X)
    if perm.lattice != X.lattice:
        raise ArgumentError("permutation and matrix live on different lattices")
    if not perm.is_traversal_of(X, TRAVERSAL_TOL):
        raise ArgumentError("permutation is not a non-increasing traversal of X")
    return perm


def evaluate_extension(F: FunctionOracle, X: StackMatrix, perm: PermutationPQ | None = None) -> float:
    """Value of the extension at ``X``; any valid traversal gives the same value."""
    perm = _resolve_perm(X, perm)
    chain = F.chain_values(perm)
    return float(X.entries[perm.rows, perm.cols] @ np.diff(chain))


def greedy_subgradient(F: FunctionOracle, perm: PermutationPQ) -> SubgradientMatrix:
    """Marginal gains of ``F`` along the chain of ``perm``.

    For submodular ``F`` this is a subgradient of the extension at every
    matrix that ``perm`` traverses non-increasingly.
    """
    return SubgradientMatrix(_greedy_array(F.chain_values(perm), perm), perm)


def _greedy_array(chain: np.ndarray, perm: PermutationPQ) -> np.ndarray:
    lat = perm.lattice
    Y = np.zeros((lat.n, lat.width))
    Y[perm.rows, perm.cols] = np.diff(chain)
    return Y


def chain_point(perm: PermutationPQ, i: int) -> np.ndarray:
    """The ``i``-th chain point ``y^i`` of ``perm``."""
    return np.bincount(perm.rows[:i], minlength=perm.lattice.n).astype(np.int64)


def round_extension(F: FunctionOracle, X: StackMatrix, perm: PermutationPQ | None = None) -> tuple[np.ndarray, float]:
    """Best chain point of ``X`` under ``F`` (first one on ties).

    Its value never exceeds the extension value at ``X``.
    """
    perm = _resolve_perm(X, perm)
    chain = F.chain_values(perm)
    i = int(np.argmin(chain))
    return chain_point(perm, i), float(chain[i])


def dual_lower_bound(Y: SubgradientMatrix | np.ndarray) -> float:
    """``min <Y, X>`` over ``[0,1]_down``, via per-row prefix sums.

    Absent cells must hold zero. For ``Y`` in the convex hull of greedy
    vertices of a submodular ``F`` this lower-bounds ``min F``.
    """
    Y = Y.Y if isinstance(Y, SubgradientMatrix) else np.asarray(Y, dtype=float)
    if Y.shape[1] == 0:
        return 0.0
    prefix = np.cumsum(Y, axis=1)
    return float(np.minimum(prefix.min(axis=1), 0.0).sum())
