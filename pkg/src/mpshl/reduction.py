"""Compiler from binary quadratic problems to a two-site MPS variational problem.

Chain layout for an instance with ``N`` (``N - 1`` binary variables),
``D = 2N^2 + N`` and ``m = ceil(log2 D)``, 1-based sites:

====================  ===========================================
``1 .. m``            left tail, bond dimension ramps 1 -> D
``m+1 .. m+6``        left center; ``m+3`` and ``m+5`` are free
``m+7 .. m+6+N^2``    right center, indicator matrices on levels 3, 4
``m+7+N^2 .. n``      right tail, bond dimension ramps D -> 1
====================  ===========================================

Tail sites use two physical levels each, alternating between {1, 2} and
{3, 4}; the tail site next to each center region uses the pair the region
does not, so no projector window touching a tail sees a common level.
Every fixed site is left-canonical, which makes the left environment at
every bond the identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bqp import BqpInstance, big_objective, binary_vectors, magnitude_table, signed_penalty_matrix, witness
from .hamiltonian import ChainHamiltonian, LocalTerm, projector_term
from .indicator import IndicatorFamily, build_indicator_family, shift_operator
from .mps import MatrixProductState, energy, window_profile

FORMAT_VERSION = 1
LEVELS = 4
GAUGE_TOL = 1e-12


class StructureError(ValueError):
    """Free-site tensors are not in the embedded form."""


class InfeasibleCompletion(ValueError):
    pass


def layout_constants(N: int) -> dict:
    if N < 2:
        raise ValueError("N must be at least 2")
    D = 2 * N * N + N
    m = math.ceil(math.log2(D))
    return {"N": N, "D": D, "m": m, "n": N * N + 6 + 2 * m}


def embedding_scale(N: int) -> float:
    """kappa(N) = N^(-3/2): the triple product is kappa * c^dagger d."""
    return N ** (-1.5)


# -- gauge completion and the fixed tensors --------------------------------


def gauge_complete(partial, D: int) -> np.ndarray:
    """Hermitian PSD square root of ``1 - sum_i A_i^dagger A_i``."""
    R = np.eye(D, dtype=complex)
    for a in partial:
        a = np.asarray(a)
        R = R - a.conj().T @ a
    offdiag = R - np.diag(np.diagonal(R))
    if not np.any(offdiag):
        ev = np.real(np.diagonal(R))
        if np.min(ev, initial=0.0) < -1e-9:
            raise InfeasibleCompletion(f"partial gauge sum exceeds identity (eigenvalue {np.min(ev):.3g})")
        return np.diag(np.sqrt(np.clip(ev, 0.0, None))).astype(complex)
    R = 0.5 * (R + R.conj().T)
    ev, vecs = np.linalg.eigh(R)
    if ev[0] < -1e-9:
        raise InfeasibleCompletion(f"partial gauge sum exceeds identity (eigenvalue {ev[0]:.3g})")
    return (vecs * np.sqrt(np.clip(ev, 0.0, None))) @ vecs.conj().T


def _site(levels: dict, shape) -> np.ndarray:
    t = np.zeros((LEVELS,) + tuple(shape), dtype=complex)
    for lvl, mat in levels.items():
        t[lvl - 1] = mat
    return t


def fixed_center_tensors(N: int) -> dict:
    """Tensors of sites m+1, m+2, m+4, m+6 (1-based keys)."""
    c = layout_constants(N)
    D, m = c["D"], c["m"]
    eye = np.eye(D)
    p1 = np.zeros((D, D))
    p1[:N, :N] = np.eye(N)
    selector = np.zeros((D, D))
    selector[:N, 0] = 1.0 / N
    return {
        m + 1: _site({1: eye}, (D, D)),
        m + 2: _site({1: p1, 2: eye - p1}, (D, D)),
        m + 4: _site({1: selector, 2: gauge_complete([selector], D)}, (D, D)),
        m + 6: _site({1: eye}, (D, D)),
    }


def left_tail(D: int, m: int) -> list:
    dims = [1]
    for _ in range(m):
        dims.append(min(2 * dims[-1], D))
    if dims[-1] != D:
        raise ValueError("tail too short to reach the bond dimension")
    out = []
    for i in range(m):
        dl, dr = dims[i], dims[i + 1]
        pair = (3, 4) if (m - 1 - i) % 2 == 0 else (1, 2)
        V = np.eye(2 * dl)[:, :dr]
        out.append(_site({pair[0]: V[:dl], pair[1]: V[dl:]}, (dl, dr)))
    return out


def right_tail(D: int, m: int) -> list:
    dims = [D]
    for _ in range(m):
        dims.append(-(-dims[-1] // 2))
    if dims[-1] != 1:
        raise ValueError("tail too short to close the chain")
    out = []
    for i in range(m):
        dl, dr = dims[i], dims[i + 1]
        pair = (1, 2) if i % 2 == 0 else (3, 4)
        a = np.zeros((dl, dr))
        b = np.zeros((dl, dr))
        for col in range(dr):
            if 2 * col + 1 < dl:
                a[2 * col, col] = b[2 * col + 1, col] = np.sqrt(0.5)
            else:
                a[2 * col, col] = 1.0
        out.append(_site({pair[0]: a, pair[1]: b}, (dl, dr)))
    return out


def padding_sites(count: int, last_pair: tuple) -> list:
    """Bond-1 sites on alternating single levels, none sharing a level with its neighbour."""
    out = []
    lvl = 3 if 1 in last_pair else 1
    for _ in range(count):
        out.append(_site({lvl: np.ones((1, 1))}, (1, 1)))
        lvl = 1 if lvl == 3 else 3
    return out


# -- free-site embedding ---------------------------------------------------


def _check_unit(v, name):
    v = np.asarray(v, dtype=complex)
    if np.any(np.abs(v) > 1 + 1e-12):
        raise ValueError(f"|{name}_k| must not exceed 1")
    return v


def embed_variables(c, d_vec, N: int) -> dict:
    """Gauge-exact free tensors with A3_1 A4_1 A5_1 = kappa(N) * conj(c) d^T.

    ``c`` sits on the diagonal of A^(m+3)_1 and ``d / sqrt(N)`` on the first
    row of A^(m+5)_1; level 2 of each site carries the gauge completion.
    """
    c = _check_unit(c, "c")
    d_vec = _check_unit(d_vec, "d")
    if c.shape != (N,) or d_vec.shape != (N,):
        raise ValueError(f"c and d need length N = {N}")
    lc = layout_constants(N)
    D, m = lc["D"], lc["m"]
    a3 = np.zeros((D, D), dtype=complex)
    a3[:N, :N] = np.diag(c.conj())
    a5 = np.zeros((D, D), dtype=complex)
    a5[0, :N] = d_vec / np.sqrt(N)
    return {
        m + 3: _site({1: a3, 2: gauge_complete([a3], D)}, (D, D)),
        m + 5: _site({1: a5, 2: gauge_complete([a5], D)}, (D, D)),
    }


def triple_product(tensors: dict, N: int) -> np.ndarray:
    m = layout_constants(N)["m"]
    t4 = fixed_center_tensors(N)[m + 4]
    return tensors[m + 3][0] @ t4[0] @ tensors[m + 5][0]


def extract_variables(source, N: Optional[int] = None, strict: bool = True, tol: float = 1e-12):
    """Recover (x, y) = (|c|^2, |d|^2) from free-site tensors.

    ``source`` is a :class:`ReductionInstance`, an MPS of one, or a dict of
    the two free tensors.  With ``strict`` the tensors must be exactly in
    embedded form; otherwise c and d are read off the triple product
    factors and clipped to the unit box.
    """
    if isinstance(source, ReductionInstance):
        N, tensors = source.N, source.free
    elif isinstance(source, MatrixProductState):
        lc = layout_constants(N)
        tensors = {lc["m"] + 3: source.site(lc["m"] + 3), lc["m"] + 5: source.site(lc["m"] + 5)}
    else:
        tensors = source
    m = layout_constants(N)["m"]
    a3, a5 = np.asarray(tensors[m + 3][0]), np.asarray(tensors[m + 5][0])
    if strict:
        rest3 = a3.copy()
        rest3[np.arange(N), np.arange(N)] = 0
        rest5 = a5.copy()
        rest5[0, :N] = 0
        if np.max(np.abs(rest3)) > tol:
            raise StructureError(f"site {m + 3}: level-1 matrix is not diagonal on the first {N} indices")
        if np.max(np.abs(rest5)) > tol:
            raise StructureError(f"site {m + 5}: level-1 matrix has entries outside its first row block")
        c = np.conj(np.diagonal(a3)[:N])
    else:
        t4 = fixed_center_tensors(N)[m + 4][0]
        c = np.conj(N * (a3 @ t4)[:N, 0])
    d_vec = np.sqrt(N) * a5[0, :N]
    x = np.clip(np.abs(c) ** 2, 0.0, 1.0)
    y = np.clip(np.abs(d_vec) ** 2, 0.0, 1.0)
    return x, y


# -- the instance ----------------------------------------------------------


@dataclass(eq=False)
class ReductionInstance:
    bqp: BqpInstance
    N: int
    D: int
    m: int
    n: int
    kappa: float
    family: IndicatorFamily
    signed_penalty: np.ndarray
    penalty_factor: float
    hamiltonian: ChainHamiltonian
    fixed: dict  # site -> tensor
    free: dict  # site -> tensor
    padding: int = 0
    provenance: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return self.family.gamma

    @property
    def free_sites(self) -> tuple:
        return (self.m + 3, self.m + 5)

    @property
    def Y(self) -> np.ndarray:
        return self.family.Y

    @property
    def affine(self) -> tuple:
        """(a, b) with n = a D + b, 0 <= b < D."""
        return divmod(self.n, self.D)

    @property
    def layout(self) -> dict:
        m, N = self.m, self.N
        core = m + 6 + N * N
        return {
            "left_tail": [1, m],
            "left_center": [m + 1, m + 6],
            "free_sites": list(self.free_sites),
            "right_center": [m + 7, core],
            "right_tail": [core + 1, core + m],
            "padding": [core + m + 1, self.n] if self.padding else None,
            "affine": dict(zip(("a", "b"), self.affine)),
        }

    def tail_sites(self) -> set:
        lay = self.layout
        sites = set(range(lay["left_tail"][0], lay["left_tail"][1] + 1))
        sites |= set(range(lay["right_tail"][0], self.n + 1))
        return sites

    def state(self, free: Optional[dict] = None) -> MatrixProductState:
        tensors = dict(self.fixed)
        tensors.update(self.free if free is None else free)
        return MatrixProductState(tuple(tensors[j] for j in range(1, self.n + 1)))

    def with_variables(self, c, d_vec) -> MatrixProductState:
        return self.state(embed_variables(c, d_vec, self.N))


def assemble_instance(bqp: BqpInstance, pad: int = 0, provenance: Optional[dict] = None) -> ReductionInstance:
    """Build the full chain encoding ``bqp``; ``pad`` extra bond-1 sites are
    appended after the right tail."""
    N = bqp.N
    lc = layout_constants(N)
    D, m = lc["D"], lc["m"]
    S = signed_penalty_matrix(bqp.M)
    Y, factor = magnitude_table(S)
    family = build_indicator_family(Y, N)
    fixed = {}
    for i, t in enumerate(left_tail(D, m)):
        fixed[i + 1] = t
    fixed.update(fixed_center_tensors(N))
    for l in range(1, N * N + 1):
        fixed[m + 6 + l] = _site({3: family.M1[l - 1], 4: family.M2[l - 1]}, (D, D))
    rt = right_tail(D, m)
    start = m + 7 + N * N
    for i, t in enumerate(rt):
        fixed[start + i] = t
    last_pair = (1, 2) if (m - 1) % 2 == 0 else (3, 4)
    for i, t in enumerate(padding_sites(pad, last_pair)):
        fixed[start + m + i] = t
    n = lc["n"] + pad
    free = embed_variables(np.zeros(N), np.zeros(N), N)
    return ReductionInstance(
        bqp=bqp,
        N=N,
        D=D,
        m=m,
        n=n,
        kappa=embedding_scale(N),
        family=family,
        signed_penalty=S,
        penalty_factor=factor,
        hamiltonian=ChainHamiltonian(projector_term(LEVELS, 6), n),
        fixed=fixed,
        free=free,
        padding=pad,
        provenance=dict(provenance or {}),
    )


# -- energies --------------------------------------------------------------


def shortcut_energy(x, y, instance: ReductionInstance) -> float:
    """kappa^2 * sum_{k,l} V_{kl}^2 x_l y_k with V the realized indicator values."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for v, name in ((x, "x"), (y, "y")):
        if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise ValueError(f"{name} leaves the unit box")
    V2 = instance.family.values**2
    return float(instance.kappa**2 * np.einsum("kl,l,k->", V2, x, y))


def window_energy_profile(instance: ReductionInstance, c, d_vec) -> list:
    """Per-window projector expectations of the chain with free sites embedding (c, d)."""
    return window_profile(instance.with_variables(c, d_vec), instance.hamiltonian)


def chain_energy(instance: ReductionInstance, x, y) -> float:
    psi = instance.with_variables(np.sqrt(np.asarray(x, float)), np.sqrt(np.asarray(y, float)))
    return energy(psi, instance.hamiltonian)


# -- solving ---------------------------------------------------------------


@dataclass
class Solution:
    b: tuple
    value: float  # b M b^T
    energy: float  # penalty objective at the witness of b
    chain_energy: float
    shortcut_energy: float
    mode: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "b": list(self.b),
            "value": self.value,
            "energy": self.energy,
            "chain_energy": self.chain_energy,
            "shortcut_energy": self.shortcut_energy,
            "mode": self.mode,
            "details": self.details,
        }


def _scan(instance: ReductionInstance):
    """Lexicographic-first minimizer of the penalty objective over witnesses."""
    M = instance.bqp.M
    best = None
    for b in binary_vectors(instance.N - 1):
        x, y = witness(b)
        score = big_objective(x, y, M)
        if best is None or score < best[1] - 1e-12 * max(1.0, abs(best[1])):
            best = (b, score)
    return best


def solve_instance(instance: ReductionInstance, mode: str = "enumerate", seed: int = 0) -> Solution:
    M = instance.bqp.M
    if mode == "enumerate":
        b, score = _scan(instance)
        details = {"candidates": 2 ** (instance.N - 1)}
    elif mode == "alternating":
        from .dmrg import optimize_site_set

        rng = np.random.default_rng(seed)
        N = instance.N
        c = rng.uniform(0, 1, N) * np.exp(2j * np.pi * rng.uniform(size=N))
        d = rng.uniform(0, 1, N) * np.exp(2j * np.pi * rng.uniform(size=N))
        start = instance.with_variables(c, d)
        psi, rep = optimize_site_set(start, instance.hamiltonian, instance.free_sites, "alternating")
        x, _ = extract_variables(psi, N, strict=False)
        b = tuple(int(v) for v in (x[:-1] > 0.5))
        score = big_objective(*witness(b), M)
        details = {"optimized_chain_energy": rep.final_energy, "relaxed_x": x.tolist()}
    else:
        raise ValueError(f"unsupported mode {mode!r}")
    x, y = witness(b)
    return Solution(
        b=tuple(int(v) for v in b),
        value=float(np.asarray(b, float) @ M @ np.asarray(b, float)),
        energy=score,
        chain_energy=chain_energy(instance, x, y),
        shortcut_energy=shortcut_energy(x, y, instance),
        mode=mode,
        details=details,
    )


def enumerate_free_sites(instance: ReductionInstance, sites, polish: bool = True):
    """Score every binary witness, keep the certified best and optionally
    polish it with gauge-constrained alternating solves."""
    from .dmrg import SetReport, optimize_site_set

    if tuple(sites) != instance.free_sites:
        from .dmrg import UnsupportedStrategy

        raise UnsupportedStrategy(f"enumerate needs exactly the free sites {instance.free_sites}")
    report = SetReport("enumerate", instance.free_sites, certified=True)
    M = instance.bqp.M
    chain, scores = [], []
    for b in binary_vectors(instance.N - 1):
        x, y = witness(b)
        scores.append(big_objective(x, y, M))
        chain.append(chain_energy(instance, x, y))
    best_b, best = _scan(instance)
    x, y = witness(best_b)
    psi = instance.with_variables(np.sqrt(x), np.sqrt(y))
    report.final_energy = best
    report.energies = [best]
    report.details = {"b": list(best_b), "scores": scores, "chain_energies": chain}
    if polish:
        polished, prep = optimize_site_set(psi, instance.hamiltonian, instance.free_sites, "alternating")
        report.details["polished_chain_energy"] = prep.final_energy
    return psi, report


# -- serialization ---------------------------------------------------------


def _sparse_tensor(site: int, t: np.ndarray) -> dict:
    idx = np.argwhere(t != 0)
    entries = [[int(i), int(a), int(b), float(t[i, a, b].real), float(t[i, a, b].imag)] for i, a, b in idx]
    return {"site": site, "shape": list(t.shape), "entries": entries}


def _dense_tensor(doc: dict) -> np.ndarray:
    t = np.zeros(tuple(doc["shape"]), dtype=complex)
    for i, a, b, re, im in doc["entries"]:
        t[i, a, b] = complex(re, im)
    return t


def instance_to_dict(inst: ReductionInstance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "N": inst.N,
        "D": inst.D,
        "m": inst.m,
        "n": inst.n,
        "kappa": inst.kappa,
        "gamma": inst.gamma,
        "layout": inst.layout,
        "hamiltonian": {"n": inst.n, "term": inst.hamiltonian.term.to_dict()},
        "fixed_sites": [_sparse_tensor(j, inst.fixed[j]) for j in sorted(inst.fixed)],
        "free_sites": [_sparse_tensor(j, inst.free[j]) for j in sorted(inst.free)],
        "bqp": inst.bqp.to_dict(),
        "indicator": {"Y": inst.family.Y.tolist(), "gamma": inst.gamma, "positions": inst.family.positions.tolist()},
        "penalty": {"signed": inst.signed_penalty.tolist(), "factor": inst.penalty_factor},
        "padding": inst.padding,
        "provenance": inst.provenance,
    }


def instance_from_dict(doc: dict) -> ReductionInstance:
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported instance format version {doc.get('version')!r}")
    N, D, m, n = doc["N"], doc["D"], doc["m"], doc["n"]
    fixed = {s["site"]: _dense_tensor(s) for s in doc["fixed_sites"]}
    free = {s["site"]: _dense_tensor(s) for s in doc["free_sites"]}
    L = N * N
    M1 = np.array([fixed[m + 6 + l][2] for l in range(1, L + 1)])
    M2 = np.array([fixed[m + 6 + l][3] for l in range(1, L + 1)])
    ind = doc["indicator"]
    family = IndicatorFamily(
        N=N,
        P=shift_operator(N),
        M1=M1,
        M2=M2,
        Y=np.array(ind["Y"], dtype=float),
        gamma=ind["gamma"],
        positions=np.array(ind["positions"], dtype=int),
    )
    term = LocalTerm.from_dict(doc["hamiltonian"]["term"])
    return ReductionInstance(
        bqp=BqpInstance.from_dict(doc["bqp"]),
        N=N,
        D=D,
        m=m,
        n=n,
        kappa=doc["kappa"],
        family=family,
        signed_penalty=np.array(doc["penalty"]["signed"], dtype=float),
        penalty_factor=doc["penalty"]["factor"],
        hamiltonian=ChainHamiltonian(term, doc["hamiltonian"]["n"]),
        fixed=fixed,
        free=free,
        padding=doc.get("padding", 0),
        provenance=doc.get("provenance", {}),
    )


def save_instance(inst: ReductionInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, sort_keys=True)


def load_instance(path) -> ReductionInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
