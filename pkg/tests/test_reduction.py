import math

import numpy as np
import pytest

from mpshl.bqp import BqpInstance, big_objective, witness
from mpshl.hamiltonian import chain_mpo, mpo_expectation
from mpshl.mps import energy, gauge_residuals, window_profile
from mpshl.oracles import bqp_min
from mpshl.reduction import (
    InfeasibleCompletion,
    StructureError,
    assemble_instance,
    embed_variables,
    embedding_scale,
    extract_variables,
    gauge_complete,
    instance_from_dict,
    instance_to_dict,
    layout_constants,
    load_instance,
    save_instance,
    shortcut_energy,
    solve_instance,
    triple_product,
)


def random_bqp(N, seed):
    M = np.random.default_rng(seed).uniform(-1, 1, (N - 1, N - 1))
    return BqpInstance(M)


@pytest.fixture(scope="module")
def inst2():
    return assemble_instance(BqpInstance([[-1.0]]))


@pytest.fixture(scope="module")
def inst3():
    return assemble_instance(random_bqp(3, 1))


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_layout_formulas(N):
    lc = layout_constants(N)
    D = 2 * N * N + N
    m = math.ceil(math.log2(D))
    assert lc == {"N": N, "D": D, "m": m, "n": N * N + 6 + 2 * m}


def test_layout_n6_values():
    assert layout_constants(6) == {"N": 6, "D": 78, "m": 7, "n": 56}


def test_gauge_completion():
    a = np.diag([0.5, 1.0, 0.0])
    b = gauge_complete([a], 3)
    assert np.allclose(a.conj().T @ a + b.conj().T @ b, np.eye(3), atol=1e-15)
    with pytest.raises(InfeasibleCompletion):
        gauge_complete([2 * np.eye(2)], 2)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_embedding_triple_product(N):
    rng = np.random.default_rng(N)
    c = rng.uniform(0, 1, N) * np.exp(1j * rng.uniform(0, 6, N))
    d = rng.uniform(0, 1, N) * np.exp(1j * rng.uniform(0, 6, N))
    free = embed_variables(c, d, N)
    T = triple_product(free, N)
    assert np.allclose(T[:N, :N], embedding_scale(N) * np.outer(c.conj(), d), atol=1e-15)
    assert np.count_nonzero(np.abs(T) > 1e-15) <= N * N
    for t in free.values():
        g = np.einsum("iab,iac->bc", t.conj(), t)
        assert np.abs(g - np.eye(g.shape[0])).max() < 1e-11


def test_embedding_rejects_out_of_box():
    with pytest.raises(ValueError):
        embed_variables([1.5, 0], [0, 0], 2)


def test_extract_round_trip(inst2):
    x = np.array([0.25, 1.0])
    y = np.array([0.5, 0.0])
    psi = inst2.with_variables(np.sqrt(x), np.sqrt(y))
    gx, gy = extract_variables(psi, 2)
    assert np.allclose(gx, x) and np.allclose(gy, y)
    m = inst2.m
    tampered = {m + 3: psi.site(m + 3).copy(), m + 5: psi.site(m + 5)}
    tampered[m + 3][0, 0, 1] = 0.1
    with pytest.raises(StructureError):
        extract_variables(tampered, 2)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_assembled_sites_are_gauge_exact(N):
    inst = assemble_instance(random_bqp(N, N))
    assert inst.n == layout_constants(N)["n"]
    psi = inst.state()
    assert max(gauge_residuals(psi)) <= 1e-12
    lo, hi = inst.layout["right_center"]
    for j in range(lo, hi + 1):
        t = psi.site(j)
        assert not np.any(t[:2])  # levels 1, 2 unused


def test_tail_windows_vanish(inst3):
    rng = np.random.default_rng(0)
    tail = inst3.tail_sites()
    for _ in range(3):
        c, d = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        prof = window_profile(inst3.with_variables(c, d), inst3.hamiltonian)
        for s, v in prof:
            if set(range(s, s + 6)) & tail:
                assert v == 0.0


# energies from the MPO contraction, an independent route through the chain
@pytest.mark.parametrize(
    "c, d, expected",
    [((0, 0), (0, 0), 0.0), ((1, 1), (1, 1), 0.09375), ((1, 0), (0, 1), 0.0078125), ((0, 1), (1, 0), 0.0390625)],
)
def test_frozen_energies_n2(inst2, c, d, expected):
    psi = inst2.with_variables(np.array(c, float), np.array(d, float))
    assert abs(energy(psi, inst2.hamiltonian) - expected) < 1e-12


def test_frozen_baseline_n3():
    inst = assemble_instance(BqpInstance(np.zeros((2, 2))))
    psi = inst.with_variables(np.zeros(3), np.zeros(3))
    assert abs(energy(psi, inst.hamiltonian) - 3.248046875) < 1e-12


def test_mpo_route_agrees(inst3):
    rng = np.random.default_rng(4)
    c = rng.uniform(0, 1, 3) * np.exp(1j * rng.uniform(0, 6, 3))
    d = rng.uniform(0, 1, 3)
    psi = inst3.with_variables(c, d)
    assert abs(mpo_expectation(psi, chain_mpo(inst3.hamiltonian)).real - energy(psi, inst3.hamiltonian)) < 1e-12


def test_shortcut_energy_formula(inst3):
    x = np.array([0.2, 0.7, 1.0])
    y = np.array([0.9, 0.1, 1.0])
    V = inst3.gamma * inst3.Y
    ref = inst3.kappa**2 * sum(V[k, l] ** 2 * x[l] * y[k] for k in range(3) for l in range(3))
    assert abs(shortcut_energy(x, y, inst3) - ref) < 1e-15


def test_padding_and_affine():
    inst = assemble_instance(BqpInstance([[0.5]]), pad=3)
    assert inst.n == 21
    assert inst.affine == divmod(21, 10)
    assert max(gauge_residuals(inst.state())) < 1e-15
    prof = window_profile(inst.with_variables(np.ones(2), np.ones(2)), inst.hamiltonian)
    assert all(v == 0.0 for s, v in prof if s + 5 > 18)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_enumerate_matches_oracle(N):
    for seed in range(5):
        inst = assemble_instance(random_bqp(N, 100 + seed))
        sol = solve_instance(inst, "enumerate")
        val, argmins = bqp_min(inst.bqp.M)
        assert sol.b == argmins[0]
        assert abs(sol.value - val) < 1e-12
        assert abs(sol.energy - big_objective(*witness(sol.b), inst.bqp.M)) == 0


def test_enumerate_lexicographic_tie():
    inst = assemble_instance(BqpInstance(np.zeros((2, 2))))
    assert solve_instance(inst).b == (0, 0)


def test_alternating_mode_runs(inst2):
    sol = solve_instance(inst2, "alternating", seed=3)
    assert sol.mode == "alternating" and len(sol.b) == 1
    assert sol.energy >= solve_instance(inst2, "enumerate").energy


def test_unknown_mode(inst2):
    with pytest.raises(ValueError):
        solve_instance(inst2, "annealing")


def test_json_round_trip_bit_exact(tmp_path, inst3):
    path = tmp_path / "inst.json"
    save_instance(inst3, path)
    back = load_instance(path)
    assert (back.N, back.D, back.m, back.n, back.kappa) == (inst3.N, inst3.D, inst3.m, inst3.n, inst3.kappa)
    for j, t in inst3.fixed.items():
        assert np.array_equal(back.fixed[j], t)
    for j, t in inst3.free.items():
        assert np.array_equal(back.free[j], t)
    assert np.array_equal(back.bqp.M, inst3.bqp.M)
    assert instance_to_dict(back) == instance_to_dict(inst3)


def test_unknown_format_version(inst2):
    doc = instance_to_dict(inst2)
    doc["version"] = 99
    with pytest.raises(ValueError):
        instance_from_dict(doc)
