"""Variational energy minimization over matrix product states.

Single-site sweeping keeps the state in mixed-canonical form so that every
local update is a standard Hermitian eigenproblem.  Multi-site set
optimization keeps every site outside the set bit-for-bit fixed and works on
the gauge manifold ``sum_i A_i^dagger A_i = 1`` of each free site.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigsh

from .hamiltonian import ChainHamiltonian, chain_mpo
from .hamiltonian import mpo_left_env as _left_env
from .mps import MatrixProductState, _left_factor, gauge_residuals

DENSE_EIG_LIMIT = 4096
DENSE_SET_LIMIT = 1024


class EigensolverError(RuntimeError):
    pass


class UnsupportedStrategy(ValueError):
    pass


# -- environments -----------------------------------------------------------


def _right_env(env, a, w):
    t = np.tensordot(a, env, axes=(2, 2))  # t c b y
    t = np.tensordot(t, w, axes=([0, 3], [3, 1]))  # c b x s
    t = np.tensordot(t, a.conj(), axes=([1, 3], [2, 0]))  # c x a
    return t.transpose(2, 1, 0)


def _boundary_envs(w0: int, wn: int):
    left = np.zeros((1, w0, 1), dtype=complex)
    left[0, 0, 0] = 1.0
    right = np.zeros((1, wn, 1), dtype=complex)
    right[0, 1, 0] = 1.0
    return left, right


def _all_envs(tensors, mpo):
    left0, right0 = _boundary_envs(mpo[0].shape[0], mpo[-1].shape[1])
    lefts = [left0]
    for a, w in zip(tensors, mpo):
        lefts.append(_left_env(lefts[-1], a, w))
    rights = [right0]
    for a, w in zip(reversed(tensors), reversed(mpo)):
        rights.append(_right_env(rights[-1], a, w))
    rights.reverse()
    return lefts, rights


@dataclass
class EffectiveProblem:
    """Local energy functional of one site with all other tensors fixed."""

    site: int
    left_env: np.ndarray
    mpo_tensor: np.ndarray
    right_env: np.ndarray
    center: Optional[np.ndarray] = None  # current tensor at the site
    state: Optional[MatrixProductState] = None  # mixed-canonical state it was built from

    @property
    def shape(self) -> tuple:
        d = self.mpo_tensor.shape[2]
        return (d, self.left_env.shape[0], self.right_env.shape[0])

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        x = np.reshape(v, self.shape)
        t = np.tensordot(self.left_env, x, axes=(2, 1))  # a x t d
        t = np.tensordot(t, self.mpo_tensor, axes=([1, 2], [0, 3]))  # a d y s
        t = np.tensordot(t, self.right_env, axes=([1, 2], [2, 1]))  # a s b
        return t.transpose(1, 0, 2).reshape(np.shape(v))

    def value(self, v: np.ndarray) -> float:
        v = np.ravel(v)
        return float(np.vdot(v, self.matvec(v)).real)

    @property
    def matrix(self) -> np.ndarray:
        t = np.tensordot(self.left_env, self.mpo_tensor, axes=(1, 0))  # a c y s t
        t = np.tensordot(t, self.right_env, axes=(2, 1))  # a c s t b d
        return t.transpose(2, 0, 4, 3, 1, 5).reshape(self.dim, self.dim)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def lowest_eigenpair(problem: EffectiveProblem, v0: Optional[np.ndarray] = None, seed: int = 0):
    dim = problem.dim
    if dim <= DENSE_EIG_LIMIT:
        h = problem.matrix
        h = 0.5 * (h + h.conj().T)
        vals, vecs = sla.eigh(h, subset_by_index=[0, 0])
        return float(vals[0]), _fix_phase(vecs[:, 0])
    if v0 is None or not np.any(v0):
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    op = LinearOperator((dim, dim), matvec=problem.matvec, dtype=complex)
    try:
        vals, vecs = eigsh(op, k=1, which="SA", v0=np.ravel(v0), tol=0)
    except Exception as exc:  # ARPACK non-convergence and friends
        raise EigensolverError(f"site {problem.site}: local eigensolve failed ({exc})") from exc
    v = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    return float(vals[0]), _fix_phase(v)


# -- canonical-form moves -------------------------------------------------


def _shift_right(tensors, j):
    """QR site j (0-based) into a left isometry, push the rest into j+1."""
    a = tensors[j]
    d, dl, dr = a.shape
    q, r = _left_factor(a.reshape(d * dl, dr))
    tensors[j] = q.reshape(d, dl, q.shape[1])
    tensors[j + 1] = np.einsum("ab,ibc->iac", r, tensors[j + 1])


def _shift_left(tensors, j):
    a = tensors[j]
    d, dl, dr = a.shape
    m = a.transpose(1, 0, 2).reshape(dl, d * dr)
    q, r = _left_factor(m.conj().T)
    tensors[j] = q.conj().T.reshape(q.shape[1], d, dr).transpose(1, 0, 2)
    tensors[j - 1] = np.einsum("iab,bc->iac", tensors[j - 1], r.conj().T)


def mixed_canonical(psi: MatrixProductState, j: int) -> list:
    """Tensors with sites < j left-canonical, sites > j right-canonical, norm in site j."""
    tensors = [np.array(t) for t in psi.tensors]
    for k in range(j - 1):
        _shift_right(tensors, k)
    for k in range(psi.n - 1, j - 1, -1):
        _shift_left(tensors, k)
    return tensors


def effective_problem(psi: MatrixProductState, H: ChainHamiltonian, j: int, mpo=None) -> EffectiveProblem:
    """Effective Hamiltonian of 1-based site ``j``; the state is first brought
    to mixed-canonical form with center at ``j`` and normalized there."""
    mpo = chain_mpo(H) if mpo is None else mpo
    tensors = mixed_canonical(psi, j)
    center = tensors[j - 1]
    nrm = np.linalg.norm(center)
    if nrm > 0:
        tensors[j - 1] = center / nrm
    left, right = _envs_around(tensors, mpo, j - 1)
    return EffectiveProblem(
        site=j,
        left_env=left,
        mpo_tensor=mpo[j - 1],
        right_env=right,
        center=tensors[j - 1],
        state=MatrixProductState(tuple(tensors), orthogonality_center=j),
    )


def _envs_around(tensors, mpo, i):
    left, right = _boundary_envs(mpo[0].shape[0], mpo[-1].shape[1])
    for a, w in zip(tensors[:i], mpo[:i]):
        left = _left_env(left, a, w)
    for a, w in zip(reversed(tensors[i + 1 :]), reversed(mpo[i + 1 :])):
        right = _right_env(right, a, w)
    return left, right


def optimize_site(psi: MatrixProductState, H: ChainHamiltonian, j: int, mpo=None):
    """Replace site ``j`` by the lowest eigenvector of its effective Hamiltonian.

    Returns the new (normalized, mixed-canonical) state and its energy.
    """
    prob = effective_problem(psi, H, j, mpo)
    current = prob.value(prob.center)
    val, vec = lowest_eigenpair(prob, v0=prob.center)
    if val > current:
        val, vec = current, np.ravel(prob.center)
    return prob.state.replace({j: vec.reshape(prob.shape)}), val


# -- sweeping ---------------------------------------------------------------


@dataclass
class SweepReport:
    energies: list = field(default_factory=list)
    final_energy: float = float("nan")
    sweeps: int = 0
    converged: bool = False
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "energies": list(self.energies),
            "final_energy": self.final_energy,
            "sweeps": self.sweeps,
            "converged": self.converged,
        }
        if include_timing:
            doc["wall_time"] = self.wall_time
        return doc

    @property
    def max_increase(self) -> float:
        e = np.asarray(self.energies)
        return float(np.max(np.diff(e), initial=0.0)) if e.size > 1 else 0.0


def _local_solve(tensors, lefts, rights, mpo, j, report):
    prob = EffectiveProblem(j + 1, lefts[j], mpo[j], rights[j + 1], center=tensors[j])
    current = prob.value(tensors[j])
    val, vec = lowest_eigenpair(prob, v0=tensors[j])
    if val > current:
        val, vec = current, np.ravel(tensors[j])
    tensors[j] = vec.reshape(prob.shape)
    report.energies.append(val)
    return val


def sweep(
    psi: MatrixProductState,
    H: ChainHamiltonian,
    max_sweeps: int = 100,
    tol_energy: float = 1e-12,
):
    """Single-site DMRG, left-right-left, until the per-sweep energy decrease
    falls below ``tol_energy``.  ``psi`` itself is never modified."""
    t0 = time.perf_counter()
    mpo = chain_mpo(H)
    n = psi.n
    report = SweepReport()
    tensors = mixed_canonical(psi, 1)
    tensors[0] = tensors[0] / np.linalg.norm(tensors[0])
    lefts, rights = _all_envs(tensors, mpo)
    prev = EffectiveProblem(1, lefts[0], mpo[0], rights[1]).value(tensors[0])
    if n == 1:
        _local_solve(tensors, lefts, rights, mpo, 0, report)
        report.sweeps, report.converged = 1, True
    for s in range(max_sweeps if n > 1 else 0):
        for j in range(n - 1):
            _local_solve(tensors, lefts, rights, mpo, j, report)
            _shift_right(tensors, j)
            lefts[j + 1] = _left_env(lefts[j], tensors[j], mpo[j])
        for j in range(n - 1, 0, -1):
            _local_solve(tensors, lefts, rights, mpo, j, report)
            _shift_left(tensors, j)
            rights[j] = _right_env(rights[j + 1], tensors[j], mpo[j])
        e = report.energies[-1]
        report.sweeps = s + 1
        if prev - e < tol_energy:
            report.converged = True
            break
        prev = e
    report.final_energy = report.energies[-1]
    report.wall_time = time.perf_counter() - t0
    return MatrixProductState(tuple(tensors), orthogonality_center=1), report


# -- multi-site set optimization ------------------------------------------


def _polar(x: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(x, full_matrices=False)
    return u @ vh


def minimize_on_gauge_manifold(problem: EffectiveProblem, v0: np.ndarray, tol: float = 1e-10, max_iter: int = 2000):
    """Minimize <V, H_eff V> over isometries V (stacked d*Dl x Dr).

    Riemannian conjugate gradient (PR+, projection transport) with polar
    retraction and Armijo backtracking; every accepted step lowers the value.
    """
    d, dl, dr = problem.shape
    if d * dl < dr:
        raise ValueError(f"site {problem.site}: no isometry of shape {d * dl}x{dr}")
    if problem.dim <= DENSE_SET_LIMIT:
        h = problem.matrix
        h = 0.5 * (h + h.conj().T)
        apply = lambda x: (h @ x.ravel()).reshape(x.shape)  # noqa: E731
    else:
        apply = problem.matvec

    def project(x, z):
        sym = x.conj().T @ z
        return z - x @ (0.5 * (sym + sym.conj().T))

    def inner(a, b):
        return float(np.vdot(a, b).real)

    V = np.reshape(v0, (d * dl, dr))
    HV = apply(V)
    f = inner(V, HV)
    g = project(V, 2.0 * HV)
    direction = -g
    trace = [f]
    step = 1.0
    for _ in range(max_iter):
        gg = inner(g, g)
        if np.sqrt(gg) < tol:
            break
        slope = inner(g, direction)
        if slope >= 0:
            direction, slope = -g, -gg
        step = min(step * 2.0, 1e6)
        while step > 1e-16:
            cand = _polar(V + step * direction)
            Hc = apply(cand)
            fc = inner(cand, Hc)
            if fc <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        g_new = project(cand, 2.0 * Hc)
        moved = project(cand, g)
        beta = max(0.0, inner(g_new, g_new - moved) / gg)
        direction = -g_new + beta * project(cand, direction)
        V, f, g = cand, fc, g_new
        trace.append(f)
    return V.reshape(problem.shape), f, trace


@dataclass
class SetReport:
    strategy: str
    sites: tuple
    energies: list = field(default_factory=list)
    final_energy: float = float("nan")
    starts: int = 1
    best_start: int = 0
    start_energies: list = field(default_factory=list)
    certified: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "sites": list(self.sites),
            "energies": list(self.energies),
            "final_energy": self.final_energy,
            "starts": self.starts,
            "best_start": self.best_start,
            "start_energies": list(self.start_energies),
            "certified": self.certified,
            "details": self.details,
        }


def _alternating(psi, mpo, sites, max_rounds, tol, trace):
    tensors = [np.array(t) for t in psi.tensors]
    energy = None
    for _ in range(max_rounds):
        before = energy
        for j in sites:
            left, right = _envs_around(tensors, mpo, j - 1)
            prob = EffectiveProblem(j, left, mpo[j - 1], right)
            tensors[j - 1], energy, local = minimize_on_gauge_manifold(prob, tensors[j - 1])
            trace.extend(local if not trace else local[1:])
        if before is not None and before - energy < tol:
            break
    return MatrixProductState(tuple(tensors)), energy


def _random_isometry(shape, rng):
    d, dl, dr = shape
    x = rng.standard_normal((d * dl, dr)) + 1j * rng.standard_normal((d * dl, dr))
    return _polar(x).reshape(shape)


def optimize_site_set(
    psi: MatrixProductState,
    H: ChainHamiltonian,
    sites: Sequence[int],
    strategy: str = "alternating",
    starts: int = 4,
    seed: int = 0,
    instance=None,
    max_rounds: int = 50,
    tol: float = 1e-12,
):
    """Minimize the energy by varying only the 1-based ``sites`` under the
    gauge condition, every other tensor held fixed.

    Strategies: ``alternating`` (cyclic gauge-constrained local solves),
    ``multistart`` (alternating from ``starts`` random isometries, lowest
    energy kept, ties to the lowest start index) and ``enumerate`` (only for
    reduction instances; delegated to :func:`mpshl.reduction.enumerate_free_sites`).
    """
    sites = tuple(sorted(set(int(j) for j in sites)))
    if not sites:
        raise ValueError("site set must be nonempty")
    if strategy == "enumerate":
        if instance is None:
            raise UnsupportedStrategy("'enumerate' is only available for reduction instances")
        from .reduction import enumerate_free_sites

        return enumerate_free_sites(instance, sites)
    if strategy not in ("alternating", "multistart"):
        raise UnsupportedStrategy(f"unknown strategy {strategy!r}")
    res = gauge_residuals(psi)
    bad = [j for j in range(1, psi.n + 1) if j not in sites and res[j - 1] > 1e-10]
    if bad:
        raise ValueError(f"sites outside the set must satisfy the gauge condition; violated at {bad}")
    mpo = chain_mpo(H)
    if strategy == "alternating":
        start = psi.replace({j: _polar(psi.site(j).reshape(-1, psi.site(j).shape[2])).reshape(psi.site(j).shape) for j in sites if res[j - 1] > 1e-10})
        report = SetReport("alternating", sites)
        out, e = _alternating(start, mpo, sites, max_rounds, tol, report.energies)
        report.final_energy = e
        report.start_energies = [e]
        return out, report
    report = SetReport("multistart", sites, starts=starts)
    best = None
    for k in range(starts):
        rng = np.random.default_rng([seed, k])
        start = psi.replace({j: _random_isometry(psi.site(j).shape, rng) for j in sites})
        trace = []
        out, e = _alternating(start, mpo, sites, max_rounds, tol, trace)
        report.start_energies.append(e)
        if best is None or e < best[1]:
            best = (out, e, k, trace)
    report.final_energy, report.best_start, report.energies = best[1], best[2], best[3]
    return best[0], report
