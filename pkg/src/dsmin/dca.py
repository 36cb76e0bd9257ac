"""DCA on the continuous extension: local-search and restart variants.

Both variants keep integral iterates. Each outer step linearizes ``h`` with a
greedy subgradient ``Y`` of ``H`` and minimizes the submodular function
``F^t = G - H^t`` (``H^t`` modular with weights ``Y``) up to the accuracy
certified by the subproblem solver.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import IO

import numpy as np

from .errors import ArgumentError, InvariantError
from .extension import SubgradientMatrix, evaluate_extension, greedy_subgradient, round_extension
from .lattice import (
    Lattice,
    PermutationPQ,
    StackMatrix,
    comparable_ball,
    common_permutation,
    sort_row_stable,
    theta,
    theta_inv,
)
from .oracle import DsDecomposition, FunctionOracle, LinearCombinationOracle, ModularOracle
from .submodmin import SolverConfig, WarmStart, get_solver

LOCAL_MIN = "local_min_certified"
BUDGET_EXHAUSTED = "budget_exhausted"
TRACE_SCHEMA = "dsmin-trace/1"


@dataclass
class DcaConfig:
    epsilon: float = 1e-5
    epsilon_prime: float | None = None  # defaults to epsilon
    max_outer: int = 50
    subsolver: str = "pfw"
    subsolver_cfg: SolverConfig = field(default_factory=SolverConfig)
    local_radius: int = 1
    warm_start: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ArgumentError("epsilon must be non-negative")
        if self.epsilon_prime is None:
            self.epsilon_prime = self.epsilon
        if self.epsilon_prime < self.epsilon:
            raise ArgumentError("epsilon_prime must be at least epsilon")
        if self.max_outer < 1:
            raise ArgumentError("max_outer must be at least 1")
        if self.local_radius < 1:
            raise ArgumentError("local_radius must be at least 1")
        get_solver(self.subsolver)

    @property
    def epsilon_x(self) -> float:
        return self.subsolver_cfg.target


@dataclass
class DcaRecord:
    t: int
    value: float  # F(x^t), or f(X^t) for the restart variant
    next_value: float
    sub_iters: int
    certified_gap: float
    sub_status: str
    row_stable: bool
    restarted: bool = False
    fallback: bool = False


@dataclass
class DcaTrace:
    method: str
    records: list[DcaRecord] = field(default_factory=list)
    status: str = BUDGET_EXHAUSTED
    oracle_calls: int = 0
    x_out: np.ndarray | None = None
    value: float = float("nan")
    epsilon: float = 0.0
    epsilon_x: float = 0.0
    stop_perm: PermutationPQ | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def restarts(self) -> int:
        return sum(r.restarted for r in self.records)

    def header(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "method": self.method,
            "status": self.status,
            "iterations": self.iterations,
            "oracle_calls": self.oracle_calls,
            "x_out": None if self.x_out is None else self.x_out.tolist(),
            "value": self.value,
            "epsilon": self.epsilon,
            "epsilon_x": self.epsilon_x,
        }

    def to_jsonl(self, fh: IO[str], **extra) -> None:
        """Header line, then one record per outer iteration."""
        fh.write(json.dumps({**self.header(), **extra}, sort_keys=True) + "\n")
        for r in self.records:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def ht_weights(Y: SubgradientMatrix | np.ndarray) -> np.ndarray:
    """Weights of the modular minorant ``H^t``; they are just ``Y``."""
    Y = Y.Y if isinstance(Y, SubgradientMatrix) else np.asarray(Y, dtype=float)
    return Y.copy()


def _subproblem(G: FunctionOracle, W: np.ndarray, lattice: Lattice) -> FunctionOracle:
    return LinearCombinationOracle([(1.0, G), (-1.0, ModularOracle(W, lattice))])


def _best_in_ball(F: FunctionOracle, x: np.ndarray, lattice: Lattice, radius: int):
    cands = comparable_ball(x, lattice, radius)
    if not cands:
        return None, np.inf
    vals = F.evaluate_batch(np.array(cands))
    j = int(np.argmin(vals))  # first wins: coordinate order, down-move first
    return cands[j], float(vals[j])


def check_local_min(F: FunctionOracle, x, eps: float, radius: int = 1):
    """``(True, None)`` if no point of the ball beats ``F(x)`` by more than ``eps``.

    Otherwise ``(False, worst)`` with the best-valued (most violating) point.
    """
    lattice = F.lattice
    x = lattice.check_point(x)
    best, fbest = _best_in_ball(F, x, lattice, radius)
    if best is not None and F(x) > fbest + eps:
        return False, best
    return True, None


def _solve_sub(solver, Ft, cfg: DcaConfig, point, iterate, state):
    warm = WarmStart(point=point, iterate=iterate)
    if cfg.warm_start and state is not None:
        warm.active = state.active
        if iterate is None:
            warm.iterate = state.iterate
    return solver(Ft, replace(cfg.subsolver_cfg, warm_start=warm))


def _next_point(F: FunctionOracle, res) -> np.ndarray:
    X = res.X_hat
    if X.integral:
        return theta(X)
    return round_extension(F, X)[0]


def dca_local_search(dec: DsDecomposition, x0, cfg: DcaConfig | None = None):
    """DCA with local search; returns ``(x, trace)``.

    The subgradient of ``h`` is taken along a permutation shared by ``x^t``
    and its best neighbor, so that ``F^t`` agrees with ``F`` at both. The
    subsolver is seeded with ``x^t``, which makes every step a descent step.
    At the stopping test the neighbor and chain guarantees are re-checked
    explicitly; if an inaccurate subproblem broke them, the iteration moves
    to the best violating point instead of stopping (``fallback``).
    """
    cfg = cfg or DcaConfig()
    lat = dec.lattice
    F, G, H = dec.F, dec.G, dec.H
    try:
        x = lat.check_point(x0)
    except Exception as exc:
        raise ArgumentError(f"infeasible starting point: {exc}") from exc
    solver = get_solver(cfg.subsolver)
    eps, eps_x = cfg.epsilon, cfg.epsilon_x
    calls0 = F.eval_count + G.eval_count + H.eval_count
    trace = DcaTrace("dca_ls", epsilon=eps, epsilon_x=eps_x)
    fx = F(x)
    state = None

    for t in range(1, cfg.max_outer + 1):
        xbar, fbar = _best_in_ball(F, x, lat, cfg.local_radius)
        if xbar is None:  # single-point lattice
            trace.status = LOCAL_MIN
            break
        perm = common_permutation(x, xbar, lat, cfg.local_radius)
        if not (perm.is_traversal_of(theta_inv(x, lat)) and perm.is_traversal_of(theta_inv(xbar, lat))):
            raise InvariantError("permutation is not common to x^t and its best neighbor")
        W = ht_weights(greedy_subgradient(H, perm))
        res = _solve_sub(solver, _subproblem(G, W, lat), cfg, x, None, state)
        state = res.state
        x_new = _next_point(F, res)
        f_new = F(x_new)
        rec = DcaRecord(t, fx, f_new, res.iterations, res.certified_gap, res.status, perm.is_row_stable())
        trace.records.append(rec)

        if fx - f_new <= eps:
            # certified stop unless the guarantees fail on the points they cover
            chain = F.chain_values(perm)
            i = int(np.argmin(chain))
            if fbar < chain[i]:
                y, fy = xbar, fbar
            else:
                y, fy = np.bincount(perm.rows[:i], minlength=lat.n).astype(np.int64), float(chain[i])
            if fx > fy + eps + eps_x:
                rec.fallback = True
                rec.next_value = fy
                x, fx = y, fy
                continue
            trace.status = LOCAL_MIN
            trace.stop_perm = perm
            break
        x, fx = x_new, f_new

    trace.x_out, trace.value = x, fx
    trace.oracle_calls = F.eval_count + G.eval_count + H.eval_count - calls0
    return x, trace


def dca_restart(dec: DsDecomposition, X0, cfg: DcaConfig | None = None):
    """DCA with restart; returns ``(x, trace)``.

    Plain DCA steps along row-stable subgradients; once the extension value
    stalls, the iterate is rounded and, if a neighbor is better by more than
    ``epsilon_prime``, DCA restarts from that neighbor.
    """
    cfg = cfg or DcaConfig()
    lat = dec.lattice
    F, G, H = dec.F, dec.G, dec.H
    if not isinstance(X0, StackMatrix):
        X0 = StackMatrix(np.asarray(X0, dtype=float), lat)
    if X0.lattice != lat:
        raise ArgumentError("starting matrix lives on another lattice")
    solver = get_solver(cfg.subsolver)
    eps, eps_p = cfg.epsilon, cfg.epsilon_prime
    calls0 = F.eval_count + G.eval_count + H.eval_count
    trace = DcaTrace("dca_restart", epsilon=eps, epsilon_x=cfg.epsilon_x)
    X = X0
    fX = evaluate_extension(F, X)
    state = None
    x_out, f_out = None, None

    for t in range(1, cfg.max_outer + 1):
        perm = sort_row_stable(X)
        W = ht_weights(greedy_subgradient(H, perm))
        point = theta(X) if X.integral else None
        res = _solve_sub(solver, _subproblem(G, W, lat), cfg, point, X.entries, state)
        state = res.state
        x_new = _next_point(F, res)
        f_new = F(x_new)
        rec = DcaRecord(t, fX, f_new, res.iterations, res.certified_gap, res.status, True)
        trace.records.append(rec)

        if fX - f_new <= eps:
            if X.integral:
                x_t = theta(X)
                fx_t = F(x_t)
            else:
                x_t, fx_t = round_extension(F, X, perm)
            xbar, fbar = _best_in_ball(F, x_t, lat, cfg.local_radius)
            if xbar is None or fx_t <= fbar + eps_p:
                trace.status = LOCAL_MIN
                trace.stop_perm = perm
                x_out, f_out = x_t, fx_t
                break
            rec.restarted = True
            rec.next_value = fbar
            X, fX = theta_inv(xbar, lat), fbar
            continue
        X, fX = theta_inv(x_new, lat), f_new

    if x_out is None:
        x_out, f_out = round_extension(F, X)
    trace.x_out, trace.value = x_out, float(f_out)
    trace.oracle_calls = F.eval_count + G.eval_count + H.eval_count - calls0
    return x_out, trace
