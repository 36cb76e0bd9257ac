"""Certified minimization of submodular lattice functions.

Two first-order solvers work on the convex extension over ``[0,1]_down``:

* projected subgradient on the extension itself, and
* pairwise Frank-Wolfe on the dual, i.e. over the convex hull of greedy
  vertices, minimizing ``1/2 ||P(-Y)||^2`` where ``P`` projects rows onto
  non-increasing sequences (for ``k = 2`` this is the min-norm point).

Both stop on a certificate: every greedy chain visited is rounded into a
primal candidate, and every point of the vertex hull gives a lower bound
through ``dual_lower_bound``. The returned gap is ``value - bound``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError, NumericError
from .extension import dual_lower_bound
from .lattice import (
    Lattice,
    PermutationPQ,
    StackMatrix,
    _row_stable_order,
    _theta_inv_array,
    project_nonincreasing_array,
    theta_inv,
)
from .oracle import FunctionOracle

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
WEIGHT_DROP_TOL = 1e-12


@dataclass
class WarmStart:
    """State carried from one solve to the next.

    ``point`` is always offered as a primal candidate. ``iterate`` seeds the
    projected-subgradient iterate (and is rounded as a candidate); ``active``
    holds Frank-Wolfe vertices as ``(permutation, weight)`` pairs, which are
    re-evaluated on the new function.
    """

    point: np.ndarray | None = None
    iterate: np.ndarray | None = None
    active: list[tuple[PermutationPQ, float]] | None = None


@dataclass
class SolverConfig:
    epsilon_x: float = 0.0
    max_iters: int = 400
    gap_tol: float = 1e-4
    step_scale: float = 1.0
    warm_start: WarmStart | None = None

    def __post_init__(self):
        if self.epsilon_x < 0:
            raise ArgumentError("epsilon_x must be non-negative")
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be at least 1")
        if self.gap_tol < 0:
            raise ArgumentError("gap_tol must be non-negative")

    @property
    def target(self) -> float:
        return max(self.epsilon_x, self.gap_tol)


@dataclass
class SolverResult:
    x_hat: np.ndarray
    X_hat: StackMatrix
    value: float
    certified_gap: float
    iterations: int
    status: str
    dual_bound: float
    state: WarmStart = field(repr=False, default_factory=WarmStart)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _trusted_perm(rows, cols, lattice: Lattice) -> PermutationPQ:
    # Skips bijection validation for orders produced internally.
    p = object.__new__(PermutationPQ)
    object.__setattr__(p, "rows", rows)
    object.__setattr__(p, "cols", cols)
    object.__setattr__(p, "lattice", lattice)
    object.__setattr__(p, "row_stable", True)
    return p


class _Incumbent:
    """Best rounded point seen so far."""

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self.x = lattice.zeros()
        self.value = 0.0  # F(0) = 0 for normalized oracles

    def offer(self, x, value: float) -> None:
        if value < self.value:
            self.x, self.value = np.asarray(x, dtype=np.int64).copy(), float(value)

    def offer_chain(self, chain: np.ndarray, rows: np.ndarray) -> None:
        i = int(np.argmin(chain))
        if chain[i] < self.value:
            self.x = np.bincount(rows[:i], minlength=self.lattice.n).astype(np.int64)
            self.value = float(chain[i])


def _check_finite(chain: np.ndarray) -> None:
    if not np.all(np.isfinite(chain)):
        raise NumericError("oracle produced non-finite values")


def _seed(F: FunctionOracle, warm: WarmStart | None, inc: _Incumbent) -> None:
    if warm is None:
        return
    lat = F.lattice
    if warm.point is not None:
        x = lat.check_point(warm.point)
        inc.offer(x, F(x))
    if warm.iterate is not None:
        rows, cols = _row_stable_order(np.asarray(warm.iterate, dtype=float), lat)
        chain = F.chain_values(_trusted_perm(rows, cols, lat))
        _check_finite(chain)
        inc.offer_chain(chain, rows)


def _greedy(chain: np.ndarray, rows, cols, lattice: Lattice) -> np.ndarray:
    Y = np.zeros((lattice.n, lattice.width))
    Y[rows, cols] = np.diff(chain)
    return Y


def _result(inc: _Incumbent, dual: float, iters: int, status: str, state: WarmStart) -> SolverResult:
    # prefix sums can overshoot an attained value by rounding; a bound never exceeds it
    dual = min(float(dual), inc.value)
    gap = inc.value - dual
    return SolverResult(
        x_hat=inc.x,
        X_hat=theta_inv(inc.x, inc.lattice),
        value=inc.value,
        certified_gap=float(gap),
        iterations=iters,
        status=status,
        dual_bound=float(dual),
        state=state,
    )


def _trivial(F: FunctionOracle) -> SolverResult:
    inc = _Incumbent(F.lattice)
    return _result(inc, 0.0, 1, CONVERGED, WarmStart(point=inc.x))


def solve_projected_subgradient(
    F: FunctionOracle,
    cfg: SolverConfig | None = None,
    callback: Callable[[int, dict], None] | None = None,
) -> SolverResult:
    """Projected subgradient descent on the extension of a submodular ``F``.

    Step ``eta_s = D / (L sqrt(s + 1))`` with ``D = sqrt(r)`` the diameter of
    ``[0,1]_down`` and ``L = sqrt(r) * max |marginal gain|`` observed so far.
    Lower bounds come from each greedy vertex and from the step-weighted
    average of all of them.
    """
    cfg = cfg or SolverConfig()
    lat = F.lattice
    if lat.n_cells == 0:
        return _trivial(F)
    warm = cfg.warm_start
    inc = _Incumbent(lat)
    _seed(F, warm, inc)

    if warm is not None and warm.iterate is not None:
        Z = project_nonincreasing_array(warm.iterate, lat)
    elif warm is not None and warm.point is not None:
        Z = _theta_inv_array(warm.point, lat)
    else:
        Z = np.zeros((lat.n, lat.width))

    dual = -np.inf
    Ysum = np.zeros_like(Z)
    wsum = 0.0
    max_gain = 0.0
    status = BUDGET_EXHAUSTED
    it = 0
    for it in range(1, cfg.max_iters + 1):
        rows, cols = _row_stable_order(Z, lat)
        chain = F.chain_values(_trusted_perm(rows, cols, lat))
        _check_finite(chain)
        inc.offer_chain(chain, rows)
        Y = _greedy(chain, rows, cols, lat)
        max_gain = max(max_gain, float(np.abs(np.diff(chain)).max()))

        dual = max(dual, dual_lower_bound(Y))
        if max_gain == 0.0:
            dual = max(dual, 0.0)
        else:
            eta = cfg.step_scale / (max_gain * np.sqrt(it))
            Ysum += eta * Y
            wsum += eta
            dual = max(dual, dual_lower_bound(Ysum / wsum))
        if callback is not None:
            callback(it, {"Z": Z, "Y": Y, "value": inc.value, "dual": dual})
        if inc.value - dual <= cfg.target:
            status = CONVERGED
            break
        Z = project_nonincreasing_array(Z - eta * Y, lat)

    return _result(inc, dual, it, status, WarmStart(point=inc.x, iterate=Z))


def solve_pairwise_fw(
    F: FunctionOracle,
    cfg: SolverConfig | None = None,
    callback: Callable[[int, dict], None] | None = None,
) -> SolverResult:
    """Pairwise Frank-Wolfe over the greedy-vertex hull of a submodular ``F``.

    Minimizes ``phi(Y) = 1/2 ||P(-Y)||_F^2``; the gradient is ``-X`` with
    ``X = P(-Y)`` row-nonincreasing, so the linear minimization oracle is the
    greedy vertex for the row-stable sort of ``X``, and rounding along that
    same order yields the primal candidate. Steps use the curvature bound
    ``||d||^2`` (``P`` is non-expansive), clipped to the away weight.
    """
    cfg = cfg or SolverConfig()
    lat = F.lattice
    if lat.n_cells == 0:
        return _trivial(F)
    warm = cfg.warm_start
    inc = _Incumbent(lat)
    _seed(F, warm, inc)

    # active set: key -> [perm, vertex, weight]
    active: dict[bytes, list] = {}

    def add_vertex(perm: PermutationPQ, weight: float):
        chain = F.chain_values(perm)
        _check_finite(chain)
        inc.offer_chain(chain, perm.rows)
        active[perm.key] = [perm, _greedy(chain, perm.rows, perm.cols, lat), weight]

    if warm is not None and warm.active:
        total = sum(w for _, w in warm.active)
        for perm, w in warm.active:
            if perm.lattice != lat:
                raise ArgumentError("warm-start vertices belong to another lattice")
            add_vertex(perm, w / total)
    else:
        if warm is not None and warm.iterate is not None:
            M0 = np.asarray(warm.iterate, dtype=float)
        elif warm is not None and warm.point is not None:
            M0 = _theta_inv_array(warm.point, lat)
        else:
            M0 = np.zeros((lat.n, lat.width))
        rows, cols = _row_stable_order(M0, lat)
        add_vertex(_trusted_perm(rows, cols, lat), 1.0)

    dual = -np.inf
    status = BUDGET_EXHAUSTED
    X = np.zeros((lat.n, lat.width))
    it = 0
    for it in range(1, cfg.max_iters + 1):
        entries = list(active.values())
        weights = np.array([e[2] for e in entries])
        Vs = np.stack([e[1] for e in entries])
        Y = np.tensordot(weights, Vs, axes=1)

        dual = max(dual, dual_lower_bound(Y))
        X = project_nonincreasing_array(-Y, lat, clip=False)
        rows, cols = _row_stable_order(X, lat)
        perm = _trusted_perm(rows, cols, lat)
        chain = F.chain_values(perm)
        _check_finite(chain)
        inc.offer_chain(chain, rows)
        if callback is not None:
            callback(it, {"weights": weights, "Y": Y, "X": X, "value": inc.value, "dual": dual})
        if inc.value - dual <= cfg.target:
            status = CONVERGED
            break

        V_fw = _greedy(chain, rows, cols, lat)
        scores = np.tensordot(Vs, X, axes=2)
        away = int(np.argmin(scores))
        d = V_fw - Vs[away]
        slope = float(np.sum(X * d))
        dd = float(np.sum(d * d))
        if dd <= 0.0 or slope <= 0.0:
            # phi is stationary along every pairwise direction
            break
        w_away = entries[away][2]
        gamma = min(slope / dd, w_away)

        key = perm.key
        if key in active:
            active[key][2] += gamma
        else:
            active[key] = [perm, V_fw, gamma]
        entries[away][2] -= gamma
        for k in [k for k, e in active.items() if e[2] <= WEIGHT_DROP_TOL]:
            del active[k]
        total = sum(e[2] for e in active.values())
        for e in active.values():
            e[2] /= total

    state = WarmStart(point=inc.x, iterate=X, active=[(e[0], e[2]) for e in active.values()])
    return _result(inc, dual, it, status, state)


SOLVERS = {
    "psg": solve_projected_subgradient,
    "projected_subgradient": solve_projected_subgradient,
    "pfw": solve_pairwise_fw,
    "pairwise_fw": solve_pairwise_fw,
}


def get_solver(name: str):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ArgumentError(f"unknown subproblem solver {name!r}; choose from {sorted(SOLVERS)}") from None
