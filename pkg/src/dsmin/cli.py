"""Command line interface: ``dsmin {solve,ils,ics,verify}``.

Exit codes: 0 success, 1 a run or check failed, 2 bad input (unparsable
problem file or invalid arguments), 3 the outer iteration budget ran out
before the stopping test (partial results are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bruteforce import exhaustive_min
from .dca import LOCAL_MIN, DcaConfig, check_local_min, dca_local_search, dca_restart
from .errors import ArgumentError, DsminError, ParseError
from .experiments import ICS_METHODS, ILS_METHODS, ExperimentConfig, run_experiment, workers_from_env, write_outputs
from .lattice import theta_inv
from .problem import load_problem
from .submodmin import SolverConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_dca_flags(p: argparse.ArgumentParser, max_outer: int) -> None:
    g = p.add_argument_group("DCA and subproblem solver")
    g.add_argument("--epsilon", type=float, default=1e-5, help="outer stopping threshold (default 1e-5)")
    g.add_argument("--epsilon-prime", type=float, default=None, help="restart local-min slack (default: epsilon)")
    g.add_argument("--epsilon-x", type=float, default=0.0, help="subproblem accuracy target (default 0)")
    g.add_argument("--gap-tol", type=float, default=1e-4, help="subproblem duality-gap stop (default 1e-4)")
    g.add_argument("--max-sub-iters", type=int, default=400, help="subproblem iteration budget (default 400)")
    g.add_argument("--solver", choices=("psg", "pfw"), default="pfw", help="subproblem solver (default pfw)")
    g.add_argument("--max-outer", type=int, default=max_outer, help=f"outer iteration budget (default {max_outer})")
    g.add_argument("--radius", type=int, default=1, help="local search radius (default 1)")
    g.add_argument("--no-warm-start", action="store_true", help="cold-start every subproblem")


def _dca_config(a) -> DcaConfig:
    sub = SolverConfig(epsilon_x=a.epsilon_x, max_iters=a.max_sub_iters, gap_tol=a.gap_tol)
    return DcaConfig(
        epsilon=a.epsilon,
        epsilon_prime=a.epsilon_prime,
        max_outer=a.max_outer,
        subsolver=a.solver,
        subsolver_cfg=sub,
        local_radius=a.radius,
        warm_start=not a.no_warm_start,
    )


def _add_sweep_flags(p, ratios: str, snr: float) -> None:
    p.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
    p.add_argument("--reps", type=int, default=20, help="number of seeds: seed, seed+1, ... (default 20)")
    p.add_argument("--seeds", type=_int_list, default=None, help="explicit comma-separated seed list (overrides --seed/--reps)")
    p.add_argument("--ratios", type=_float_list, default=_float_list(ratios), help=f"m/n values (default {ratios})")
    p.add_argument("--snr", type=float, default=snr, help=f"signal-to-noise ratio in dB, 'inf' for none (default {snr:g})")
    p.add_argument("--out", type=Path, required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsmin",
        description="Minimize differences of submodular functions on integer lattices.",
        epilog="Set DSMIN_WORKERS to run experiment sweeps on several processes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("problem", type=Path, help="problem file")
    p.add_argument("--algorithm", choices=("dca_ls", "dca_restart"), default="dca_ls")
    p.add_argument("--x0", type=_int_list, default=None, help="start point as comma-separated levels (default 0)")
    p.add_argument("--verify", action="store_true", help="compare with the exhaustive optimum")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: print only)")
    _add_dca_flags(p, max_outer=50)

    p = sub.add_parser("ils", help="integer least squares sweep")
    p.add_argument("--n", type=int, default=12)
    _add_sweep_flags(p, "1.0,1.25,1.5,2.0", 20.0)
    p.add_argument("--methods", type=_str_list, default=list(ILS_METHODS[:2]) + ["optimum"],
                   help=f"comma-separated subset of {','.join(ILS_METHODS)} (default rar,dca_ls,optimum)")
    _add_dca_flags(p, max_outer=50)

    p = sub.add_parser("ics", help="integer compressed sensing sweep")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--s", type=int, default=3, help="sparsity (default 3)")
    _add_sweep_flags(p, "0.25,0.5,0.75,1.0", 8.0)
    p.add_argument("--lambdas", type=_float_list, default=[10.0 ** -i for i in range(6)],
                   help="lambda sweep (default 1,0.1,...,1e-5)")
    p.add_argument("--methods", type=_str_list, default=list(ICS_METHODS),
                   help=f"comma-separated subset of {','.join(ICS_METHODS)}")
    _add_dca_flags(p, max_outer=25)

    p = sub.add_parser("verify", help="brute-force cross-checks of the solvers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=20, help="random instances per check (default 20)")
    return parser


# ---------------------------------------------------------------------------


def cmd_solve(a) -> int:
    problem = load_problem(a.problem)
    dec = problem.decomposition()
    lat = dec.lattice
    cfg = _dca_config(a)
    x0 = np.zeros(lat.n, dtype=np.int64) if a.x0 is None else np.array(a.x0, dtype=np.int64)
    if len(x0) != lat.n or not lat.contains(x0):
        raise ArgumentError(f"--x0 must be a point of the lattice with levels {lat.ks}")
    if a.algorithm == "dca_ls":
        x, trace = dca_local_search(dec, x0, cfg)
    else:
        x, trace = dca_restart(dec, theta_inv(x0, lat), cfg)
    F = dec.F
    eps_cert = cfg.epsilon + cfg.epsilon_x if a.algorithm == "dca_ls" else cfg.epsilon_prime
    ok, worst = check_local_min(F, x, eps_cert, cfg.local_radius)
    result = {
        "algorithm": a.algorithm,
        "status": trace.status,
        "x": x.tolist(),
        "values": problem.mapping(x).tolist(),
        "objective": F(x),
        "iterations": trace.iterations,
        "oracle_calls": trace.oracle_calls,
        "certificate": {
            "local_min": bool(ok),
            "epsilon": eps_cert,
            "radius": cfg.local_radius,
            "worst_neighbor": None if worst is None else worst.tolist(),
        },
    }
    code = EXIT_OK
    if a.verify:
        xs, fs = exhaustive_min(F)
        result["verify"] = {"exhaustive_x": xs.tolist(), "exhaustive_min": fs, "gap": F(x) - fs}
    if trace.status != LOCAL_MIN:
        code = EXIT_BUDGET
    if a.out is not None:
        a.out.mkdir(parents=True, exist_ok=True)
        with open(a.out / "solution.json", "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(a.out / "trace.jsonl", "w") as fh:
            trace.to_jsonl(fh, algorithm=a.algorithm)
    print(json.dumps(result, sort_keys=True))
    return code


def cmd_experiment(a) -> int:
    seeds = a.seeds if a.seeds else list(range(a.seed, a.seed + a.reps))
    cfg = ExperimentConfig(
        kind=a.command,
        n=a.n,
        ratios=a.ratios,
        snr_db=a.snr,
        seeds=seeds,
        methods=a.methods,
        dca=_dca_config(a),
        s=getattr(a, "s", 0),
        lambdas=getattr(a, "lambdas", [1.0]),
        workers=workers_from_env(),
    )
    runs = run_experiment(cfg)
    res = write_outputs(a.out, cfg, runs)
    for rec in res["summary"]:
        print(
            f"m={rec['m']:<4d} {rec['method']:<13s} recovery={rec['recovered_mean']:.3f} "
            f"ber={rec['ber_mean']:.4f} rel_gap={rec['rel_gap_mean']:.4g} est_err={rec['est_err_mean']:.4f}"
        )
    for e in res["errors"]:
        print(f"run failed: {e}", file=sys.stderr)
    return EXIT_FAIL if res["errors"] else EXIT_OK


def cmd_verify(a) -> int:
    from .verify import run_checks

    failures = 0
    for name, ok, detail in run_checks(seed=a.seed, reps=a.reps):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += not ok
    return EXIT_FAIL if failures else EXIT_OK


COMMANDS = {"solve": cmd_solve, "ils": cmd_experiment, "ics": cmd_experiment, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)  # argparse exits with status 2 on bad flags
    if getattr(a, "snr", None) is not None and math.isnan(a.snr):
        parser.error("--snr must not be NaN")
    try:
        return COMMANDS[a.command](a)
    except ParseError as exc:
        print(f"dsmin: {a.problem}: {exc}" if hasattr(a, "problem") else f"dsmin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArgumentError as exc:
        print(f"dsmin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DsminError as exc:
        print(f"dsmin: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
