import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsmin.apps import gen_ils, solve_rar, to_levels
from dsmin.bruteforce import check_local_min_exhaustive, exhaustive_min, random_submodular, random_table
from dsmin.dca import (
    LOCAL_MIN,
    TRACE_SCHEMA,
    DcaConfig,
    check_local_min,
    dca_local_search,
    dca_restart,
    ht_weights,
)
from dsmin.errors import ArgumentError
from dsmin.extension import greedy_subgradient
from dsmin.lattice import Lattice, theta_inv
from dsmin.oracle import DsDecomposition, ModularOracle, alpha_default, decompose_generic, zero_oracle
from dsmin.oracle import chain_points

from conftest import random_stack, random_traversal


def generic(lat, seed):
    F = random_table(lat, seed)
    return decompose_generic(F, alpha_default(F))


def test_ht_weights(rng):
    lat = Lattice((3, 4))
    W = rng.normal(size=(2, 3))
    H = ModularOracle(W, lat)
    for _ in range(10):
        Y = greedy_subgradient(H, random_traversal(random_stack(lat, rng), rng))
        Ht = ModularOracle(ht_weights(Y), lat)
        for x in ([0, 0], [2, 3], [1, 2]):
            assert Ht(x) == pytest.approx(H(x), abs=1e-12)


def test_submodular_f_one_step_global():
    lat = Lattice((3,) * 4)
    for seed in range(5):
        G = random_submodular(lat, seed)
        dec = DsDecomposition(G, zero_oracle(lat))
        _, fstar = exhaustive_min(G)
        x, tr = dca_local_search(dec, lat.zeros(), DcaConfig(epsilon=1e-6))
        assert G(x) - fstar <= DcaConfig().epsilon_x
        assert tr.records[0].next_value - fstar <= DcaConfig().epsilon_x
        y, _ = dca_restart(dec, theta_inv(lat.zeros(), lat), DcaConfig(epsilon=1e-6))
        assert abs(G(x) - G(y)) <= DcaConfig().epsilon_x


def test_modular_converges_to_separable_argmin(rng):
    lat = Lattice((4, 4, 4))
    for _ in range(10):
        W = rng.normal(size=(3, 3))
        F = ModularOracle(W, lat)
        prefix = np.concatenate([np.zeros((3, 1)), np.cumsum(W, axis=1)], axis=1)
        dec = DsDecomposition(F, zero_oracle(lat))
        x, tr = dca_local_search(dec, rng.integers(0, 4, size=3), DcaConfig())
        assert x.tolist() == prefix.argmin(axis=1).tolist()
        assert tr.iterations <= 2


def test_ils_toy_against_rar():
    for seed in range(5):
        inst = gen_ils(6, 9, 20.0, seed)
        dec = inst.decomposition()
        x0 = to_levels(solve_rar(inst), inst.grid)
        x, tr = dca_local_search(dec, x0, DcaConfig())
        assert tr.status == LOCAL_MIN
        assert check_local_min_exhaustive(dec.F, x, DcaConfig().epsilon + DcaConfig().epsilon_x)
        assert inst.objective(inst.grid[x]) <= inst.objective(inst.grid[x0]) + 1e-9


def test_restart_instance():
    lat = Lattice((3, 3, 3))
    dec = generic(lat, 2)
    cfg = DcaConfig(epsilon=1e-3)
    x, tr = dca_restart(dec, theta_inv(np.array([2, 0, 0]), lat), cfg)
    assert tr.restarts >= 1 and tr.status == LOCAL_MIN
    assert check_local_min_exhaustive(dec.F, x, cfg.epsilon_prime)


def test_check_local_min_examples(rng):
    lat = Lattice((3, 3))
    F = random_table(lat, 4)
    xs, _ = exhaustive_min(F)
    assert check_local_min(F, xs, 0.0) == (True, None)
    worse = next(x for x in np.ndindex(3, 3) if not check_local_min_exhaustive(F, x, 0.0))
    ok, witness = check_local_min(F, worse, 0.0)
    assert not ok and F(witness) < F(worse)
    assert check_local_min(F, worse, 1e6)[0]


def test_argument_errors():
    lat = Lattice((3, 3))
    dec = generic(lat, 0)
    with pytest.raises(ArgumentError):
        dca_local_search(dec, [3, 0])
    with pytest.raises(ArgumentError):
        DcaConfig(epsilon=-1)
    with pytest.raises(ArgumentError):
        DcaConfig(epsilon=1e-3, epsilon_prime=1e-4)
    with pytest.raises(ArgumentError):
        DcaConfig(subsolver="nope")


def test_epsilon_zero_budget():
    lat = Lattice((4, 4, 4))
    dec = generic(lat, 9)
    x, tr = dca_local_search(dec, [1, 2, 3], DcaConfig(epsilon=0.0, max_outer=1))
    assert tr.iterations == 1


def test_trace_jsonl():
    lat = Lattice((3, 3, 3))
    _, tr = dca_local_search(generic(lat, 1), [0, 0, 0], DcaConfig(epsilon=1e-3))
    buf = io.StringIO()
    tr.to_jsonl(buf, run="x")
    lines = [json.loads(s) for s in buf.getvalue().splitlines()]
    assert lines[0]["schema"] == TRACE_SCHEMA and lines[0]["run"] == "x"
    assert len(lines) == tr.iterations + 1
    assert [r["t"] for r in lines[1:]] == list(range(1, tr.iterations + 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(3, 3), (3, 3, 3), (4, 4, 2), (2, 3, 4, 3)]), st.sampled_from(["pfw", "psg"]))
def test_local_search_contract(seed, ks, solver):
    lat = Lattice(ks)
    dec = generic(lat, seed)
    F = dec.F
    eps = 1e-3
    cfg = DcaConfig(epsilon=eps, subsolver=solver)
    x0 = np.random.default_rng(seed).integers(0, np.array(ks))
    _, fstar = exhaustive_min(F)
    x, tr = dca_local_search(dec, x0, cfg)
    for r in tr.records:
        assert r.next_value <= r.value + cfg.epsilon_x
    if tr.status == LOCAL_MIN:
        assert check_local_min(F, x, eps + cfg.epsilon_x)[0]
        assert tr.iterations <= (F(x0) - fstar) / eps + 1
        if tr.stop_perm.is_row_stable():
            chain = F.evaluate_batch(chain_points(tr.stop_perm))
            assert F(x) <= chain.min() + eps + cfg.epsilon_x


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(3, 3), (3, 3, 3), (4, 4, 2)]))
def test_restart_contract(seed, ks):
    lat = Lattice(ks)
    dec = generic(lat, seed)
    cfg = DcaConfig(epsilon=1e-3)
    x0 = np.random.default_rng(seed).integers(0, np.array(ks))
    x, tr = dca_restart(dec, theta_inv(x0, lat), cfg)
    for r in tr.records:
        if r.restarted:
            assert r.value - r.next_value > cfg.epsilon_prime
    if tr.status == LOCAL_MIN:
        assert check_local_min_exhaustive(dec.F, x, cfg.epsilon_prime)


def test_radius_two():
    lat = Lattice((4, 4, 4))
    for seed in range(10):
        dec = generic(lat, seed)
        cfg = DcaConfig(epsilon=1e-3, local_radius=2)
        x, tr = dca_local_search(dec, [0, 0, 0], cfg)
        if tr.status == LOCAL_MIN:
            assert check_local_min(dec.F, x, cfg.epsilon + cfg.epsilon_x, radius=2)[0]
