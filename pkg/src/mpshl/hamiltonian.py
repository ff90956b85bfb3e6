"""r-local translationally invariant chain Hamiltonians.

``H = sum_{i=1}^{n-r+1} h^(i)`` with the same ``d**r x d**r`` term on every
window.  Diagonal terms keep only their diagonal so that the 4096-dimensional
projector term stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .mps import DENSE_CAP, CapExceeded

HERMITIAN_TOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class NotHermitian(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LocalTerm:
    """Hermitian operator on ``r`` consecutive sites of local dimension ``d``.

    Exactly one of ``dense`` / ``diagonal`` is set.
    """

    r: int
    d: int
    dense: Optional[np.ndarray] = None
    diagonal: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("locality r must be >= 1")
        dim = self.d**self.r
        if (self.dense is None) == (self.diagonal is None):
            raise ValueError("give exactly one of dense or diagonal")
        if self.dense is not None:
            h = np.array(self.dense, dtype=complex)
            if h.shape != (dim, dim):
                raise ValueError(f"term must be {dim}x{dim}, got {h.shape}")
            if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise NotHermitian("local term is not Hermitian")
            h.flags.writeable = False
            object.__setattr__(self, "dense", h)
        else:
            diag = np.array(self.diagonal)
            if diag.shape != (dim,):
                raise ValueError(f"diagonal must have length {dim}")
            if np.max(np.abs(np.imag(diag)), initial=0.0) > HERMITIAN_TOL:
                raise NotHermitian("diagonal term has complex entries")
            diag = np.real(diag).astype(float)
            diag.flags.writeable = False
            object.__setattr__(self, "diagonal", diag)

    @classmethod
    def from_matrix(cls, h: np.ndarray, d: int) -> "LocalTerm":
        h = np.asarray(h)
        r = int(round(np.log(h.shape[0]) / np.log(d)))
        if d**r != h.shape[0]:
            raise ValueError(f"dimension {h.shape[0]} is not a power of d={d}")
        offdiag = h - np.diag(np.diagonal(h))
        if not np.any(offdiag):
            return cls(r=r, d=d, diagonal=np.diagonal(h))
        return cls(r=r, d=d, dense=h)

    @property
    def dim(self) -> int:
        return self.d**self.r

    @property
    def matrix(self) -> np.ndarray:
        """Dense matrix (materialized on demand for diagonal terms)."""
        if self.dense is not None:
            return self.dense
        return np.diag(self.diagonal).astype(complex)

    def sparse(self) -> sp.csr_matrix:
        if self.dense is not None:
            return sp.csr_matrix(self.dense)
        return sp.diags(self.diagonal.astype(complex), format="csr")

    def to_dict(self) -> dict:
        if self.diagonal is not None:
            nz = np.flatnonzero(self.diagonal)
            return {"r": self.r, "d": self.d, "diagonal": [[int(i), float(self.diagonal[i])] for i in nz]}
        return {"r": self.r, "d": self.d, "re": self.dense.real.tolist(), "im": self.dense.imag.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "LocalTerm":
        r, d = doc["r"], doc["d"]
        if "diagonal" in doc:
            diag = np.zeros(d**r)
            for i, v in doc["diagonal"]:
                diag[i] = v
            return cls(r=r, d=d, diagonal=diag)
        return cls(r=r, d=d, dense=np.array(doc["re"]) + 1j * np.array(doc["im"]))


@dataclass(frozen=True, eq=False)
class ChainHamiltonian:
    """``term`` on each of the ``n - r + 1`` windows, plus optional fixed-position
    ``boundary`` terms given as ``(first_site, LocalTerm)`` pairs."""

    term: LocalTerm
    n: int
    boundary: tuple = ()

    def __post_init__(self):
        if self.n < self.term.r:
            raise ValueError(f"chain length {self.n} shorter than locality {self.term.r}")
        for site, op in self.boundary:
            if op.d != self.term.d or not 1 <= site <= self.n - op.r + 1:
                raise ValueError(f"boundary term at site {site} does not fit the chain")

    @property
    def d(self) -> int:
        return self.term.d

    @property
    def r(self) -> int:
        return self.term.r

    @property
    def windows(self) -> int:
        return self.n - self.term.r + 1

    def placed_terms(self):
        for s in range(1, self.windows + 1):
            yield s, self.term
        yield from self.boundary


def term_from_basis_coefficients(coeffs: dict, basis: Sequence[np.ndarray]) -> LocalTerm:
    """sum over index tuples (alpha, ..., xi) of coeff * sigma_alpha (x) ... (x) sigma_xi.

    Indices into ``basis`` are 0-based.
    """
    if not coeffs:
        raise ValueError("no coefficients")
    basis = [np.asarray(b, dtype=complex) for b in basis]
    d = basis[0].shape[0]
    r = len(next(iter(coeffs)))
    h = np.zeros((d**r, d**r), dtype=complex)
    for idx, c in coeffs.items():
        if len(idx) != r:
            raise ValueError("all coefficient keys need the same length")
        h += c * reduce(np.kron, (basis[a] for a in idx))
    return LocalTerm(r=r, d=d, dense=h)


def projector_term(d: int = 4, r: int = 6) -> LocalTerm:
    """sum_k |k><k|^{(x) r}: one on the all-equal configurations, zero elsewhere."""
    diag = np.zeros(d**r)
    for k in range(d):
        diag[sum(k * d**p for p in range(r))] = 1.0
    return LocalTerm(r=r, d=d, diagonal=diag)


def tfi_term(g: float) -> LocalTerm:
    """-Z Z - (g/2)(X 1 + 1 X)."""
    X, Z, I = PAULI["X"], PAULI["Z"], PAULI["I"]
    h = -np.kron(Z, Z) - 0.5 * g * (np.kron(X, I) + np.kron(I, X))
    return LocalTerm(r=2, d=2, dense=h)


def tfi_chain(n: int, g: float, boundary_corrected: bool = True) -> ChainHamiltonian:
    """Transverse-field Ising chain; with the boundary correction the two end
    sites get the same field ``g`` as bulk sites."""
    boundary = ()
    if boundary_corrected:
        edge = LocalTerm(r=1, d=2, dense=-0.5 * g * PAULI["X"])
        boundary = ((1, edge), (n, edge))
    return ChainHamiltonian(tfi_term(g), n, boundary)


def identity_chain(n: int, d: int = 2, r: int = 2) -> ChainHamiltonian:
    return ChainHamiltonian(LocalTerm(r=r, d=d, diagonal=np.ones(d**r)), n)


def dense_hamiltonian(H: ChainHamiltonian, dense_cap: int = DENSE_CAP, sparse: bool = False):
    """Full ``d**n`` matrix in the big-endian site convention."""
    d, n = H.d, H.n
    dim = d**n
    if dim > dense_cap:
        raise CapExceeded(f"d^n = {d}^{n} exceeds dense cap {dense_cap}")
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for site, op in H.placed_terms():
        left = sp.identity(d ** (site - 1), dtype=complex, format="csr")
        right = sp.identity(d ** (n - site - op.r + 1), dtype=complex, format="csr")
        out = out + sp.kron(sp.kron(left, op.sparse()), right, format="csr")
    return out if sparse else out.toarray()


# -- MPO form, used by the variational optimizer ---------------------------


def _operator_train(op: LocalTerm, cutoff: float = 1e-14) -> list:
    """Cores C_k of shape (chi_{k-1}, chi_k, d, d) with op = C_1 ... C_r."""
    d, r = op.d, op.r
    if op.diagonal is not None:
        rest = op.diagonal.reshape((d,) * r).astype(complex)
        phys = 1
    else:
        t = op.dense.reshape((d,) * (2 * r))
        order = [x for k in range(r) for x in (k, r + k)]
        rest = t.transpose(order).reshape((d * d,) * r)
        phys = 2
    cores = []
    chi = 1
    mat = rest.reshape(1, -1)
    for k in range(r - 1):
        mat = mat.reshape(chi * d**phys, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, int(np.sum(s > cutoff * max(s[0], 1e-300))))
        cores.append(u[:, :keep].reshape(chi, d**phys, keep))
        mat = s[:keep, None] * vh[:keep]
        chi = keep
    cores.append(mat.reshape(chi, d**phys, 1))
    out = []
    for c in cores:
        a, _, b = c.shape
        if phys == 1:
            w = np.zeros((a, b, d, d), dtype=complex)
            for s in range(d):
                w[:, :, s, s] = c[:, s, :]
        else:
            w = c.reshape(a, d, d, b).transpose(0, 3, 1, 2)
        out.append(w)
    return out


def chain_mpo(H: ChainHamiltonian) -> list:
    """Finite-state MPO for H; every site tensor has shape (w, w, d, d).

    Bond index 0 means "no term started", index 1 "term finished"; the left
    boundary vector selects 0 and the right one selects 1.
    """
    d, n = H.d, H.n
    cores = _operator_train(H.term)
    r = H.r
    offsets = []
    w = 2
    for c in cores[:-1]:
        offsets.append(w)
        w += c.shape[1]
    eye = np.eye(d, dtype=complex)
    bulk = np.zeros((w, w, d, d), dtype=complex)
    bulk[0, 0] = eye
    bulk[1, 1] = eye
    if r == 1:
        bulk[0, 1] += cores[0][0, 0]
    else:
        bulk[0, offsets[0] : offsets[0] + cores[0].shape[1]] = cores[0][0]
        for k in range(1, r - 1):
            a0, b0 = offsets[k - 1], offsets[k]
            bulk[a0 : a0 + cores[k].shape[0], b0 : b0 + cores[k].shape[1]] = cores[k]
        a0 = offsets[r - 2]
        bulk[a0 : a0 + cores[-1].shape[0], 1] = cores[-1][:, 0]
    mpo = [bulk.copy() for _ in range(n)]
    # windows may not start after site n-r+1
    for j in range(H.windows, n):
        if r > 1:
            mpo[j][0, offsets[0] : offsets[0] + cores[0].shape[1]] = 0
        else:
            mpo[j][0, 1] = 0
    for site, op in H.boundary:
        if op.r != 1:
            raise NotImplementedError("MPO boundary terms must be single-site")
        mpo[site - 1][0, 1] += op.matrix
    return mpo


def mpo_left_env(env: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Absorb one site into a left environment of shape (bra, mpo, ket)."""
    t = np.tensordot(env, a.conj(), axes=(0, 1))  # x c s b
    t = np.tensordot(t, w, axes=([0, 2], [0, 2]))  # c b y t
    return np.tensordot(t, a, axes=([0, 3], [1, 0]))  # b y d


def mpo_expectation(psi, mpo: list) -> complex:
    env = np.zeros((1, mpo[0].shape[0], 1), dtype=complex)
    env[0, 0, 0] = 1.0
    for a, w in zip(psi.tensors, mpo):
        env = mpo_left_env(env, a, w)
    return complex(env[0, 1, 0])
