"""Brute-force cross-checks bundled for ``dsmin verify``."""

from __future__ import annotations

import numpy as np

from .bruteforce import check_submodular, exhaustive_min, random_submodular, random_table
from .dca import LOCAL_MIN, DcaConfig, check_local_min, dca_local_search, dca_restart
from .extension import evaluate_extension
from .lattice import Lattice, theta_inv
from .oracle import alpha_default, decompose_generic
from .submodmin import SolverConfig, solve_pairwise_fw, solve_projected_subgradient


def _random_lattice(rng, max_size: int = 512) -> Lattice:
    n = int(rng.integers(2, 5))
    k = int(rng.integers(2, 5))
    while k**n > max_size:
        n -= 1
    return Lattice((k,) * n)


def check_extension(rng, reps):
    worst = 0.0
    for _ in range(reps):
        lat = _random_lattice(rng, 256)
        F = random_table(lat, int(rng.integers(2**31)))
        for x in np.ndindex(*lat.ks):
            worst = max(worst, abs(evaluate_extension(F, theta_inv(np.array(x), lat)) - F(np.array(x))))
    return worst <= 1e-12, f"max |f(theta_inv(x)) - F(x)| = {worst:.2e}"


def check_solvers(rng, reps):
    worst = -np.inf
    for _ in range(reps):
        lat = _random_lattice(rng)
        F = random_submodular(lat, int(rng.integers(2**31)))
        _, fstar = exhaustive_min(F)
        for solve in (solve_pairwise_fw, solve_projected_subgradient):
            res = solve(F, SolverConfig())
            worst = max(worst, res.value - fstar - SolverConfig().target, res.dual_bound - fstar - 1e-9)
    return worst <= 0, f"worst excess over tolerance = {worst:.2e}"


def check_decomposition(rng, reps):
    for _ in range(reps):
        lat = _random_lattice(rng, 64)
        F = random_table(lat, int(rng.integers(2**31)))
        dec = decompose_generic(F, alpha_default(F))
        for oracle in (dec.G, dec.H):
            ok, witness = check_submodular(oracle)
            if not ok:
                return False, f"non-submodular component, witness {witness}"
    return True, "G and H submodular on every instance"


def check_dca(rng, reps):
    eps = 1e-3
    for _ in range(reps):
        lat = _random_lattice(rng)
        F = random_table(lat, int(rng.integers(2**31)))
        dec = decompose_generic(F, alpha_default(F))
        cfg = DcaConfig(epsilon=eps)
        x0 = rng.integers(0, lat.ks[0], size=lat.n)
        x, tr = dca_local_search(dec, x0, cfg)
        if tr.status == LOCAL_MIN and not check_local_min(F, x, eps + cfg.epsilon_x)[0]:
            return False, f"DCA-LS output {x.tolist()} is not locally minimal"
        x, tr = dca_restart(dec, theta_inv(x0, lat), cfg)
        if tr.status == LOCAL_MIN and not check_local_min(F, x, eps)[0]:
            return False, f"DCA-Restart output {x.tolist()} is not locally minimal"
    return True, "every certified stop is a local minimum"


CHECKS = {
    "extension_exactness": check_extension,
    "subproblem_optimality": check_solvers,
    "generic_decomposition": check_decomposition,
    "dca_local_minimality": check_dca,
}


def run_checks(seed: int = 0, reps: int = 20):
    for name, fn in CHECKS.items():
        rng = np.random.default_rng([seed, len(name)])
        ok, detail = fn(rng, reps)
        yield name, bool(ok), detail
