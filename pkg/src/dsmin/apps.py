"""Integer least squares and integer compressed sensing.

Instances, the baselines (relax-and-round, OMP, box-constrained LASSO) and
the evaluation metrics. Signals are stored as real vectors on the value grid;
``to_levels``/``from_levels`` convert to and from lattice points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .oracle import DsDecomposition, QuadraticSpec, decompose_quadratic

ILS_GRID = np.array([-1.0, 0.0, 2.0, 3.0])
ICS_GRID = np.array([-1.0, 0.0, 1.0])
LAMBDAS = tuple(10.0 ** -i for i in range(6))
NORMAL_EQ_REG = 1e-10


def noise_sigma(snr_db: float, signal: np.ndarray, xi_prime: np.ndarray) -> float:
    """``sqrt(10^(-snr/10) ||signal||^2 / ||xi'||^2)``; infinite SNR means no noise."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    denom = float(xi_prime @ xi_prime)
    if denom == 0.0:
        return 0.0
    return math.sqrt(10.0 ** (-snr_db / 10.0) * float(signal @ signal) / denom)


def round_to_grid(v, grid) -> np.ndarray:
    """Nearest grid value per coordinate; ties go to the smaller value."""
    grid = np.asarray(grid, dtype=float)
    v = np.asarray(v, dtype=float)
    return grid[np.argmin(np.abs(v[:, None] - grid[None, :]), axis=1)]


def to_levels(v, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    idx = np.searchsorted(grid, v)
    if np.any(idx >= len(grid)) or np.any(grid[np.minimum(idx, len(grid) - 1)] != v):
        raise ArgumentError("vector is not on the grid")
    return idx.astype(np.int64)


def from_levels(x, grid) -> np.ndarray:
    return np.asarray(grid, dtype=float)[np.asarray(x)]


@dataclass
class _LinearInstance:
    A: np.ndarray
    b: np.ndarray
    x_true: np.ndarray
    sigma: float
    seed: int
    snr_db: float
    noise: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def residual_sq(self, v) -> float:
        r = self.A @ np.asarray(v, dtype=float) - self.b
        return float(r @ r)

    def quadratic_spec(self, lam: float = 0.0) -> QuadraticSpec:
        Q = self.A.T @ self.A
        c = -2.0 * self.A.T @ self.b
        return QuadraticSpec(Q, c, [self.grid] * self.n, lam=lam, q=0.0)

    def decomposition(self, lam: float = 0.0) -> DsDecomposition:
        return decompose_quadratic(self.quadratic_spec(lam))


@dataclass
class IlsInstance(_LinearInstance):
    grid: np.ndarray = field(default_factory=lambda: ILS_GRID.copy())

    def objective(self, v) -> float:
        return self.residual_sq(v)


@dataclass
class IcsInstance(_LinearInstance):
    s: int = 0
    lam: float = 1.0
    grid: np.ndarray = field(default_factory=lambda: ICS_GRID.copy())

    def objective(self, v, lam: float | None = None) -> float:
        lam = self.lam if lam is None else lam
        return self.residual_sq(v) + lam * float(np.count_nonzero(v))


def gen_ils(n: int, m: int, snr_db: float, seed: int) -> IlsInstance:
    """Uniform signal on ``{-1, 0, 2, 3}``, standard normal ``A``, Gaussian noise at the target SNR."""
    if n < 1 or m < 1:
        raise ArgumentError("need n >= 1 and m >= 1")
    rng = np.random.default_rng(seed)
    x = rng.choice(ILS_GRID, size=n)
    A = rng.standard_normal((m, n))
    xi_p = rng.standard_normal(m)
    clean = A @ x
    sigma = noise_sigma(snr_db, clean, xi_p)
    noise = sigma * xi_p
    return IlsInstance(A, clean + noise, x, sigma, seed, snr_db, noise)


def gen_ics(n: int, m: int, s: int, snr_db: float, seed: int, lam: float = 1.0) -> IcsInstance:
    """``s``-sparse signal with random signs, ``A`` with N(0, 1/m) entries."""
    if s > n or s < 0:
        raise ArgumentError(f"sparsity s={s} must lie in [0, n={n}]")
    if m < 1:
        raise ArgumentError("need m >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    support = rng.choice(n, size=s, replace=False)
    x = np.zeros(n)
    x[support] = rng.choice(np.array([-1.0, 1.0]), size=s)
    xi_p = rng.standard_normal(m)
    clean = A @ x
    sigma = noise_sigma(snr_db, clean, xi_p)
    noise = sigma * xi_p
    return IcsInstance(A, clean + noise, x, sigma, seed, snr_db, noise, s=s, lam=lam)


# ---------------------------------------------------------------------------
# Baselines


def _lipschitz(A: np.ndarray) -> float:
    return 2.0 * float(np.linalg.norm(A, 2)) ** 2


def solve_box_ls(A, b, lo: float, hi: float, tol: float = 1e-10, max_iters: int = 20000) -> np.ndarray:
    """Projected gradient descent for ``min ||Ax - b||^2`` on a box."""
    L = _lipschitz(A)
    x = np.zeros(A.shape[1])
    if L == 0:
        return np.clip(x, lo, hi)
    for _ in range(max_iters):
        x_new = np.clip(x - 2.0 * A.T @ (A @ x - b) / L, lo, hi)
        if np.linalg.norm(x_new - x) <= tol:
            return x_new
        x = x_new
    return x


def solve_rar(inst: IlsInstance) -> np.ndarray:
    """Relax to the box ``[min grid, max grid]``, solve, round to the grid."""
    x_ls = solve_box_ls(inst.A, inst.b, float(inst.grid[0]), float(inst.grid[-1]))
    return round_to_grid(x_ls, inst.grid)


def omp_path(inst: IcsInstance, max_atoms: int, stop_norm: float | None = None) -> list[np.ndarray]:
    """OMP iterates, one per selected atom, with least-squares refits.

    Stops after ``max_atoms`` atoms or once ``||Ax - b|| <= stop_norm``
    (the true noise norm by default).
    """
    if max_atoms < 1:
        raise ArgumentError("max_atoms must be at least 1")
    A, b = inst.A, inst.b
    stop = float(np.linalg.norm(inst.noise)) if stop_norm is None else stop_norm
    n = A.shape[1]
    support: list[int] = []
    r = b.copy()
    path = []
    for _ in range(min(max_atoms, n)):
        if np.linalg.norm(r) <= stop:
            break
        corr = np.abs(A.T @ r)
        corr[support] = -np.inf
        support.append(int(np.argmax(corr)))
        As = A[:, support]
        coef = np.linalg.solve(As.T @ As + NORMAL_EQ_REG * np.eye(len(support)), As.T @ b)
        x = np.zeros(n)
        x[support] = coef
        r = b - As @ coef
        path.append(x)
    return path


def solve_omp(inst: IcsInstance, max_atoms: int, stop_norm: float | None = None) -> np.ndarray:
    path = omp_path(inst, max_atoms, stop_norm)
    return path[-1] if path else np.zeros(inst.n)


def lasso_objective(A, b, lam: float, x) -> float:
    r = A @ x - b
    return float(r @ r) + lam * float(np.abs(x).sum())


def solve_box_lasso(
    inst: IcsInstance,
    lambda_l1: float,
    x0: np.ndarray | None = None,
    tol: float = 1e-5,
    max_iters: int = 1000,
    history: list | None = None,
) -> np.ndarray:
    """FISTA for ``min ||Ax - b||^2 + lam ||x||_1`` over ``[-1, 1]^n``.

    The prox is soft-thresholding followed by clipping. Momentum is reset
    whenever a step would increase the objective, which keeps the iterates
    monotone.
    """
    if lambda_l1 < 0:
        raise ArgumentError("lambda must be non-negative")
    A, b = inst.A, inst.b
    L = _lipschitz(A)
    x = np.zeros(inst.n) if x0 is None else np.clip(np.asarray(x0, dtype=float), -1.0, 1.0)
    if L == 0:
        return x
    fx = lasso_objective(A, b, lambda_l1, x)
    y, t = x.copy(), 1.0
    thr = lambda_l1 / L
    for _ in range(max_iters):
        g = y - 2.0 * A.T @ (A @ y - b) / L
        z = np.clip(np.sign(g) * np.maximum(np.abs(g) - thr, 0.0), -1.0, 1.0)
        fz = lasso_objective(A, b, lambda_l1, z)
        if fz > fx:
            if t == 1.0:  # plain prox step from x cannot increase; numerical floor
                break
            y, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_new) * (z - x)
        step = float(np.linalg.norm(z - x))
        x, fx, t = z, fz, t_new
        if history is not None:
            history.append(fx)
        if step <= tol:
            break
    return x


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class Metrics:
    recovered: bool
    ber: float
    rel_gap: float
    support_err: int
    est_err: float
    objective: float
    wall_time: float = 0.0
    est_err_flagged: bool = False

    def __post_init__(self):
        self.recovered = bool(self.recovered)


def compute_metrics(x_hat, inst, F_star: float | None = None, lam: float | None = None, wall_time: float = 0.0) -> Metrics:
    """Metrics of a grid vector ``x_hat``.

    ``rel_gap = (F(x_hat) - F_ref) / |F_ref|`` with ``F_ref = F_star`` when
    given, else ``F(x_true)``; when ``F_ref = 0`` the absolute gap is used.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = inst.x_true
    n = len(x_true)
    obj = inst.objective(x_hat) if lam is None else inst.objective(x_hat, lam)
    if F_star is None:
        F_star = inst.objective(x_true) if lam is None else inst.objective(x_true, lam)
    gap = obj - F_star
    rel_gap = gap / abs(F_star) if F_star != 0 else gap
    diff = np.count_nonzero(x_hat != x_true)
    support_err = int(np.count_nonzero((x_hat != 0) != (x_true != 0)))
    norm_true = float(np.linalg.norm(x_true))
    flagged = norm_true == 0
    est_err = float(np.linalg.norm(x_hat - x_true)) / (1.0 if flagged else norm_true)
    return Metrics(
        recovered=diff == 0,
        ber=diff / n,
        rel_gap=float(rel_gap),
        support_err=support_err,
        est_err=est_err,
        objective=float(obj),
        wall_time=wall_time,
        est_err_flagged=flagged,
    )


def best_over_sweep(ms: list[Metrics]) -> Metrics:
    """Fieldwise best: any recovery, smallest errors, gaps and objective."""
    if not ms:
        raise ArgumentError("nothing to aggregate")
    return Metrics(
        recovered=any(m.recovered for m in ms),
        ber=min(m.ber for m in ms),
        rel_gap=min(m.rel_gap for m in ms),
        support_err=min(m.support_err for m in ms),
        est_err=min(m.est_err for m in ms),
        objective=min(m.objective for m in ms),
        wall_time=sum(m.wall_time for m in ms),
        est_err_flagged=any(m.est_err_flagged for m in ms),
    )
