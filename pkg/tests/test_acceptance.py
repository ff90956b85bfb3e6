"""Acceptance suite: one test per criterion, each recording a pass/fail line."""

import itertools
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from mpshl.bqp import BqpInstance, big_minimum, big_objective, satisfies_conditions
from mpshl.dmrg import optimize_site_set, sweep
from mpshl.hamiltonian import ChainHamiltonian, LocalTerm, dense_hamiltonian, tfi_chain
from mpshl.mps import (
    default_profile,
    energy,
    gauge_residuals,
    left_canonicalize,
    norm,
    random_mps,
    to_dense,
)
from mpshl.oracles import (
    bqp_min,
    dense_ground_energy,
    gauge_report,
    grid_min_big,
    verify_indicator_family,
    windows_decomposition_check,
)
from mpshl.reduction import (
    assemble_instance,
    instance_to_dict,
    layout_constants,
    load_instance,
    save_instance,
    solve_instance,
)

# every energy trace produced in this module, checked by criterion 3
TRACES: list = []


def random_bqp(N: int, seed: int) -> BqpInstance:
    return BqpInstance(np.random.default_rng(seed).uniform(-1, 1, (N - 1, N - 1)))


def random_hermitian(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def random_problem(seed):
    """Random (psi, H) pair with d^n <= 2^14."""
    rng = np.random.default_rng([7, seed])
    d = int(rng.integers(2, 5))
    r = int(rng.integers(1, 4 if d < 4 else 3))
    nmax = int(math.floor(14 * math.log(2) / math.log(d) + 1e-9))
    n = int(rng.integers(r, nmax + 1))
    H = ChainHamiltonian(LocalTerm.from_matrix(random_hermitian(d**r, rng), d), n)
    D = int(rng.integers(1, 6))
    psi = left_canonicalize(random_mps(n, d, default_profile(n, d, D), seed=seed))
    return psi, H


def cli(*argv):
    proc = subprocess.run([sys.executable, "-m", "mpshl", *map(str, argv)], capture_output=True, text=True)
    return proc.returncode, proc.stdout


def test_c01_gauge_suite(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_res = worst_norm = 0.0
    for seed in range(200):
        n, d, D = int(rng.integers(1, 21)), int(rng.integers(2, 5)), int(rng.integers(1, 17))
        psi = left_canonicalize(random_mps(n, d, default_profile(n, d, D), seed=seed))
        worst_res = max(worst_res, max(gauge_residuals(psi)))
        worst_norm = max(worst_norm, abs(norm(psi) - 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst_res <= 1e-12 and worst_norm <= 1e-12 and elapsed < 30
    criterion(1, "gauge suite", ok, f"residual {worst_res:.1e}, norm error {worst_norm:.1e}, {elapsed:.1f}s")
    assert ok


def test_c02_engine_vs_dense(criterion):
    worst = 0.0
    for seed in range(50):
        psi, H = random_problem(seed)
        v = to_dense(psi)
        ref = np.vdot(v, dense_hamiltonian(H, sparse=True) @ v).real
        worst = max(worst, abs(energy(psi, H) - ref))

    H = tfi_chain(10, 1.0)
    t0 = time.perf_counter()
    _, rep = sweep(random_mps(10, 2, default_profile(10, 2, 16), seed=1), H, max_sweeps=20)
    elapsed = time.perf_counter() - t0
    TRACES.append(rep.energies)
    tfi_err = abs(rep.final_energy - dense_ground_energy(H))

    exact = -math.sqrt(5)
    _, rep2 = sweep(random_mps(2, 2, (1, 2, 1), seed=0), tfi_chain(2, 1.0))
    TRACES.append(rep2.energies)
    two_err = max(abs(dense_ground_energy(tfi_chain(2, 1.0)) - exact), abs(rep2.final_energy - exact))

    ok = worst <= 1e-9 and tfi_err <= 1e-10 and rep.sweeps <= 20 and elapsed < 10 and two_err <= 1e-12
    detail = f"energy {worst:.1e}, tfi {tfi_err:.1e} in {rep.sweeps} sweeps/{elapsed:.1f}s, n=2 {two_err:.1e}"
    criterion(2, "engine vs dense oracle", ok, detail)
    assert ok


def test_c03_monotone_sweeps(criterion):
    for seed in range(10):
        psi, H = random_problem(100 + seed)
        if H.n < 2:
            continue
        TRACES.append(sweep(psi, H, max_sweeps=10)[1].energies)
    inst = assemble_instance(random_bqp(2, 5))
    for strategy in ("alternating", "multistart"):
        _, rep = optimize_site_set(inst.state(), inst.hamiltonian, inst.free_sites, strategy=strategy, max_rounds=3)
        TRACES.append(rep.energies)
    worst = max(float(np.max(np.diff(t), initial=0.0)) for t in TRACES if len(t) > 1)
    ok = worst <= 1e-12
    criterion(3, "sweep monotonicity", ok, f"{len(TRACES)} traces, max increase {worst:.1e}")
    assert ok


def test_c04_big_structure(criterion):
    N = 3
    worst_val = worst_grid = 0.0
    witnesses_ok = True
    for entries in itertools.product((-1.0, 0.0, 1.0), repeat=4):
        M = np.array(entries).reshape(2, 2)
        brute = min(float(np.array(b) @ M @ np.array(b)) for b in itertools.product((0, 1), repeat=2))
        expected = -N + brute / (2 * (N - 1) ** 2)
        bm = big_minimum(M)
        worst_val = max(worst_val, abs(bm.value - expected))
        grid, _ = grid_min_big(M, 8)
        worst_grid = max(worst_grid, bm.value - grid)
        for x, y in bm.witnesses:
            witnesses_ok &= satisfies_conditions(x, y, M, bm.bqp_value)
            witnesses_ok &= abs(big_objective(x, y, M) - bm.value) <= 1e-12
    ok = worst_val <= 1e-12 and worst_grid <= 1e-9 and witnesses_ok
    criterion(4, "penalty objective structure", ok, f"value {worst_val:.1e}, grid undercut {worst_grid:.1e}")
    assert ok


def test_c05_indicator_contract(criterion):
    ok, times, notes = True, {}, []
    for N in (2, 3, 4):
        inst = assemble_instance(random_bqp(N, 50 + N))
        t0 = time.perf_counter()
        rep = verify_indicator_family(inst.family, tol=1e-12)
        times[N] = time.perf_counter() - t0
        p = rep.payload
        lo, hi = inst.layout["right_center"]
        res = gauge_residuals(inst.state())
        rc = max(res[j - 1] for j in range(lo, hi + 1))
        ok &= rep.passed and rep.exhaustive and p["words_scanned"] == 2 ** (N * N)
        ok &= p["nonzero_words"] == N * N and rc <= 1e-12
        notes.append(f"N={N}: {p['nonzero_words']} hits")
    ok &= times[4] < 60
    criterion(5, "indicator contract", ok, ", ".join(notes) + f", N=4 {times[4]:.2f}s")
    assert ok


def test_c06_assembly_invariants(criterion):
    ok = True
    for N in range(2, 7):
        inst = assemble_instance(random_bqp(N, 60 + N))
        D = 2 * N * N + N
        m = math.ceil(math.log2(D))
        ok &= (inst.N, inst.D, inst.m, inst.n) == (N, D, m, N * N + 6 + 2 * m)
        ok &= layout_constants(N) == {"N": N, "D": D, "m": m, "n": inst.n}
        ok &= gauge_report(inst, tol=1e-12).passed
    psi = inst.with_variables(np.full(6, 0.5), np.full(6, 0.5))
    t0 = time.perf_counter()
    E = energy(psi, inst.hamiltonian)
    elapsed = time.perf_counter() - t0
    ok &= np.isfinite(E) and elapsed < 5
    criterion(6, "assembly invariants", ok, f"N=6 D={inst.D} n={inst.n}, energy {elapsed:.2f}s")
    assert ok


@pytest.mark.parametrize("N", [2, 3])
def test_c07_window_profile(criterion, N):
    inst = assemble_instance(random_bqp(N, 70 + N))
    rep = windows_decomposition_check(inst, samples=50, seed=0, tol=1e-12)
    p = rep.payload
    f = p["findings"]
    consistent = (
        p["kappa"] == inst.kappa
        and p["gamma"] == inst.gamma
        and p["samples"] == 50
        and sum(p["window_counts"].values()) == inst.hamiltonian.windows
        and p["max_tail"] <= 1e-12
        and p["max_additivity_error"] <= 1e-12
        and f["literal_identity_observed"] == (f["max_literal_gap"] <= 1e-9)
        and f["right_center_constant"] == (f["right_center_spread"] <= 1e-9)
    )
    json.dumps(rep.to_dict())
    ok = rep.passed and consistent
    literal = "observed" if f["literal_identity_observed"] else "not observed"
    detail = f"N={N} kappa={inst.kappa:.4g} gamma={inst.gamma:g}, literal identity {literal}"
    criterion(7, "window profile", ok, detail)
    assert ok


def test_c08_enumerate_matches_oracle(criterion):
    bad = []
    for N in (2, 3, 4):
        for seed in range(20):
            inst = assemble_instance(random_bqp(N, 1000 * N + seed))
            sol = solve_instance(inst, "enumerate")
            val, argmins = bqp_min(inst.bqp.M)
            if sol.b != argmins[0] or abs(sol.value - val) > 1e-12:
                bad.append((N, seed))
    ok = not bad
    criterion(8, "certified solver vs oracle", ok, f"60 instances, {len(bad)} mismatches")
    assert ok


GRAPHS = {
    "triangle": ("p edge 3 3\ne 1 2\ne 2 3\ne 1 3\n", 3),
    "bowtie": ("p edge 5 6\ne 1 2\ne 1 3\ne 2 3\ne 3 4\ne 3 5\ne 4 5\n", 3),
    "k4_pendant": ("p edge 5 7\ne 1 2\ne 1 3\ne 1 4\ne 2 3\ne 2 4\ne 3 4\ne 4 5\n", 4),
}


def test_c09_clique_pipeline(criterion, tmp_path):
    t0 = time.perf_counter()
    sizes = {}
    for name, (text, _) in GRAPHS.items():
        src = tmp_path / f"{name}.col"
        src.write_text(text)
        inst = tmp_path / f"{name}.json"
        assert cli("reduce", src, "-o", inst)[0] == 0
        code, out = cli("solve", inst, "--json")
        assert code == 0
        sizes[name] = len(json.loads(out)["clique"])
    elapsed = time.perf_counter() - t0
    ok = all(sizes[k] == want for k, (_, want) in GRAPHS.items()) and elapsed < 10
    criterion(9, "clique pipeline", ok, ", ".join(f"{k} {v}" for k, v in sizes.items()) + f", {elapsed:.1f}s")
    assert ok


def test_c10_determinism_round_trip(criterion, tmp_path):
    inst = assemble_instance(random_bqp(3, 10))
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    exact = all(np.array_equal(back.fixed[j], t) for j, t in inst.fixed.items())
    exact &= all(np.array_equal(back.free[j], t) for j, t in inst.free.items())
    exact &= instance_to_dict(back) == instance_to_dict(inst)
    again = tmp_path / "again.json"
    save_instance(back, again)
    exact &= path.read_bytes() == again.read_bytes()

    commands = [
        ("solve", path, "--json", "--seed", "3", "--mode", "alternating"),
        ("sweep", "--n", "6", "--D", "4", "--json", "--seed", "7"),
        ("verify", path, "--json", "--window-samples", "2"),
        ("report", path, "--json", "--window-samples", "2"),
    ]
    same = True
    for argv in commands:
        first, second = cli(*argv), cli(*argv)
        same &= first == second and first[1].strip() != ""
    ok = exact and same
    criterion(10, "determinism and round trip", ok, f"bit-exact {exact}, byte-identical CLI {same}")
    assert ok
