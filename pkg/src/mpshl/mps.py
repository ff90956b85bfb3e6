"""Finite open-boundary matrix product states.

A state on ``n`` sites with local dimension ``d`` is stored as a tuple of
site tensors ``A[j]`` of shape ``(d, D_j, D_{j+1})``, so ``A[j][i]`` is the
matrix attached to basis level ``i`` at site ``j``.  Bond dimensions at the
two open ends are 1.

Amplitudes are ordered big-endian: site 1 is the most significant digit of
the dense index, matching ``np.kron`` ordering of operators.

All functions are pure; tensors held by a :class:`MatrixProductState` are
marked read-only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DENSE_CAP = 2**20
TOL_GAUGE = 1e-10
TOL_NORM = 1e-10
RANK_CUTOFF = 1e-14


class ProfileError(ValueError):
    """Bond-dimension profile is not realizable."""


class CapExceeded(ValueError):
    """A dense object would exceed the configured size cap."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MatrixProductState:
    tensors: tuple
    orthogonality_center: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        tensors = tuple(_frozen(t) for t in self.tensors)
        if not tensors:
            raise ProfileError("an MPS needs at least one site")
        d = tensors[0].shape[0]
        for j, t in enumerate(tensors):
            if t.ndim != 3 or t.shape[0] != d:
                raise ProfileError(f"site {j + 1}: expected shape (d, Dl, Dr), got {t.shape}")
            if j and tensors[j - 1].shape[2] != t.shape[1]:
                raise ProfileError(f"bond {j + 1}: {tensors[j - 1].shape[2]} != {t.shape[1]}")
        if tensors[0].shape[1] != 1 or tensors[-1].shape[2] != 1:
            raise ProfileError("open boundary requires D_1 = D_{n+1} = 1")
        object.__setattr__(self, "tensors", tensors)

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def d(self) -> int:
        return self.tensors[0].shape[0]

    @property
    def bond_profile(self) -> tuple:
        return tuple(t.shape[1] for t in self.tensors) + (1,)

    @property
    def max_bond(self) -> int:
        return max(self.bond_profile)

    def site(self, j: int) -> np.ndarray:
        """Tensor of 1-based site ``j``."""
        return self.tensors[j - 1]

    def replace(self, updates: dict) -> "MatrixProductState":
        """New state with the given 1-based sites swapped out."""
        tensors = list(self.tensors)
        for j, t in updates.items():
            tensors[j - 1] = t
        return MatrixProductState(tuple(tensors))

    def scaled_site(self, j: int, factor: complex) -> "MatrixProductState":
        return self.replace({j: self.site(j) * factor})


def check_profile(n: int, d: int, bond_profile: Sequence[int]) -> tuple:
    prof = tuple(int(x) for x in bond_profile)
    if len(prof) != n + 1:
        raise ProfileError(f"profile needs n+1 = {n + 1} entries, got {len(prof)}")
    if prof[0] != 1 or prof[-1] != 1:
        raise ProfileError("open boundary requires D_1 = D_{n+1} = 1")
    for j in range(n):
        a, b = prof[j], prof[j + 1]
        if a < 1 or b < 1:
            raise ProfileError(f"bond dimensions must be positive (site {j + 1})")
        if b > d * a or a > d * b:
            raise ProfileError(f"site {j + 1}: {a} -> {b} exceeds the factor-d growth limit")
    return prof


def random_mps(n: int, d: int, bond_profile: Sequence[int], seed: int = 0) -> MatrixProductState:
    """Complex Gaussian MPS with the given bond profile (not normalized)."""
    prof = check_profile(n, d, bond_profile)
    rng = np.random.default_rng(seed)
    tensors = []
    for j in range(n):
        shape = (d, prof[j], prof[j + 1])
        tensors.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return MatrixProductState(tuple(tensors))


def product_state(levels: Sequence[int], d: int) -> MatrixProductState:
    """Computational basis product state; ``levels`` are 1-based."""
    tensors = []
    for lvl in levels:
        t = np.zeros((d, 1, 1), dtype=complex)
        t[lvl - 1, 0, 0] = 1.0
        tensors.append(t)
    return MatrixProductState(tuple(tensors))


def default_profile(n: int, d: int, D: int) -> tuple:
    return tuple(min(d**j, d ** (n - j), D) for j in range(n + 1))


def _positive_qr(m: np.ndarray):
    q, r = np.linalg.qr(m)
    diag = np.diagonal(r)
    phase = np.where(np.abs(diag) > 0, diag / np.where(diag == 0, 1, np.abs(diag)), 1.0)
    q = q * phase[None, :]
    r = np.conj(phase)[:, None] * r
    return q, r


def _left_factor(m: np.ndarray, cutoff: float = RANK_CUTOFF):
    """Isometry ``q`` and carry ``r`` with ``m = q @ r``, dropping null directions."""
    q, r = _positive_qr(m)
    diag = np.abs(np.diagonal(r))
    scale = np.max(np.abs(r)) if r.size else 0.0
    if scale == 0.0 or np.min(diag) > cutoff * scale:
        return q, r
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = max(1, int(np.sum(s > cutoff * s[0])))
    return u[:, :keep], s[:keep, None] * vh[:keep]


def left_canonicalize(psi: MatrixProductState) -> MatrixProductState:
    """Left-canonical, normalized copy of ``psi``.

    Each site is factored with a QR step whose diagonal is made real
    positive, so an already canonical state comes back unchanged.  Bonds
    whose rank is below the profile shrink.
    """
    d = psi.d
    carry = np.ones((1, 1), dtype=complex)
    out = []
    for t in psi.tensors:
        t = np.einsum("ab,ibc->iac", carry, t)
        dl, dr = t.shape[1], t.shape[2]
        q, r = _left_factor(t.reshape(d * dl, dr))
        out.append(q.reshape(d, dl, q.shape[1]))
        nrm = np.linalg.norm(r)
        carry = r / nrm if nrm > 0 else r
    # carry is a 1x1 unit-modulus number; fold it in so the state is unchanged up to norm
    out[-1] = out[-1] * carry[0, 0] if abs(carry[0, 0]) > 0 else out[-1]
    return MatrixProductState(tuple(out), orthogonality_center=psi.n)


def right_canonicalize(psi: MatrixProductState) -> MatrixProductState:
    """Copy with every site satisfying sum_i A_i A_i^dagger = 1, normalized."""
    d = psi.d
    carry = np.ones((1, 1), dtype=complex)
    out = []
    for t in reversed(psi.tensors):
        t = np.einsum("iab,bc->iac", t, carry)
        dl, dr = t.shape[1], t.shape[2]
        m = t.transpose(1, 0, 2).reshape(dl, d * dr)
        q, r = _left_factor(m.conj().T)
        k = q.shape[1]
        out.append(q.conj().T.reshape(k, d, dr).transpose(1, 0, 2))
        carry = r.conj().T
        nrm = np.linalg.norm(carry)
        carry = carry / nrm if nrm > 0 else carry
    out.reverse()
    out[0] = out[0] * carry[0, 0] if abs(carry[0, 0]) > 0 else out[0]
    return MatrixProductState(tuple(out), orthogonality_center=1)


def gauge_residuals(psi: MatrixProductState) -> list:
    """Per-site max-norm of sum_i A_i^dagger A_i - 1."""
    res = []
    for t in psi.tensors:
        g = np.einsum("iab,iac->bc", t.conj(), t)
        res.append(float(np.max(np.abs(g - np.eye(g.shape[0])))))
    return res


def transfer_left(env: np.ndarray, bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    """sum_i bra_i^dagger env ket_i."""
    return np.einsum("iab,ac,icd->bd", bra.conj(), env, ket, optimize=True)


def transfer_right(env: np.ndarray, bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    """sum_i ket_i env bra_i^dagger (bra index last)."""
    return np.einsum("iac,cd,ibd->ab", ket, env, bra.conj(), optimize=True)


def _check_pair(psi, phi):
    if psi.n != phi.n or psi.d != phi.d:
        raise ValueError(f"shape mismatch: (n={psi.n}, d={psi.d}) vs (n={phi.n}, d={phi.d})")


def overlap(psi: MatrixProductState, phi: MatrixProductState) -> complex:
    """<psi|phi>."""
    _check_pair(psi, phi)
    env = np.ones((1, 1), dtype=complex)
    for a, b in zip(psi.tensors, phi.tensors):
        env = transfer_left(env, a, b)
    return complex(env[0, 0])


def norm(psi: MatrixProductState) -> float:
    return float(np.sqrt(max(overlap(psi, psi).real, 0.0)))


def left_environments(psi: MatrixProductState) -> list:
    """``envs[j]`` is the norm environment on bond j+1 (0-based sites left of it)."""
    envs = [np.ones((1, 1), dtype=complex)]
    for t in psi.tensors:
        envs.append(transfer_left(envs[-1], t, t))
    return envs


def right_environments(psi: MatrixProductState) -> list:
    """``envs[j]`` is the environment of sites j..n-1 (0-based), on bond j."""
    envs = [np.ones((1, 1), dtype=complex)]
    for t in reversed(psi.tensors):
        envs.append(transfer_right(envs[-1], t, t))
    envs.reverse()
    return envs


def _window_value(tensors, left, right, term) -> float:
    r = term.r
    d = tensors[0].shape[0]
    if term.diagonal is not None:
        total = 0.0 + 0.0j
        for idx in np.flatnonzero(term.diagonal):
            digits = np.unravel_index(idx, (d,) * r)
            x = left
            for t, s in zip(tensors, digits):
                x = t[s].conj().T @ x @ t[s]
            total += term.diagonal[idx] * np.trace(x @ right)
        return float(total.real)
    theta = tensors[0]
    for t in tensors[1:]:
        theta = np.einsum("xab,ibc->xiac", theta, t).reshape(-1, theta.shape[1], t.shape[2])
    # value = sum_{s,t} h[s,t] tr(theta_s^dagger L theta_t R)
    x = np.einsum("ab,tbc,cd->tad", left, theta, right)
    gram = theta.conj().reshape(theta.shape[0], -1) @ x.reshape(x.shape[0], -1).T
    return float(np.sum(term.matrix * gram).real)


def window_expectation(psi: MatrixProductState, h, start: int, _envs=None) -> float:
    """<psi| h acting on sites start..start+r-1 |psi>, ``start`` 1-based.

    ``h`` is a :class:`mpshl.hamiltonian.LocalTerm` (or a Hermitian
    ``d**r`` matrix, which is wrapped).
    """
    from .hamiltonian import LocalTerm

    if not isinstance(h, LocalTerm):
        h = LocalTerm.from_matrix(np.asarray(h), psi.d)
    if h.d != psi.d:
        raise ValueError(f"term local dimension {h.d} != state dimension {psi.d}")
    if not 1 <= start <= psi.n - h.r + 1:
        raise ValueError(f"window start {start} outside 1..{psi.n - h.r + 1}")
    if _envs is None:
        lefts, rights = left_environments(psi), right_environments(psi)
    else:
        lefts, rights = _envs
    i = start - 1
    return _window_value(psi.tensors[i : i + h.r], lefts[i], rights[i + h.r], h)


def window_profile(psi: MatrixProductState, H) -> list:
    """(start, value) for every window of ``H.term``; boundary terms excluded."""
    envs = (left_environments(psi), right_environments(psi))
    return [(s, window_expectation(psi, H.term, s, envs)) for s in range(1, H.windows + 1)]


def energy(psi: MatrixProductState, H) -> float:
    """<psi|H|psi> (not divided by the norm)."""
    envs = (left_environments(psi), right_environments(psi))
    total = sum(window_expectation(psi, H.term, s, envs) for s in range(1, H.windows + 1))
    for site, op in H.boundary:
        total += window_expectation(psi, op, site, envs)
    return float(total)


def to_dense(psi: MatrixProductState, dense_cap: int = DENSE_CAP) -> np.ndarray:
    """Amplitude vector of length d**n, site 1 most significant."""
    if psi.d**psi.n > dense_cap:
        raise CapExceeded(f"d^n = {psi.d}^{psi.n} exceeds dense cap {dense_cap}")
    v = psi.tensors[0][:, 0, :]
    for t in psi.tensors[1:]:
        v = np.einsum("xa,iab->xib", v, t).reshape(-1, t.shape[2])
    return v[:, 0].copy()


def insert_gauge(psi: MatrixProductState, bond: int, g: np.ndarray) -> MatrixProductState:
    """Insert G G^-1 on the bond between sites ``bond`` and ``bond+1`` (1-based)."""
    a = np.einsum("iab,bc->iac", psi.site(bond), g)
    b = np.einsum("ab,ibc->iac", np.linalg.inv(g), psi.site(bond + 1))
    return psi.replace({bond: a, bond + 1: b})


# -- serialization ---------------------------------------------------------


def mps_to_dict(psi: MatrixProductState) -> dict:
    return {
        "n": psi.n,
        "d": psi.d,
        "bond_profile": list(psi.bond_profile),
        "sites": [{"re": t.real.tolist(), "im": t.imag.tolist()} for t in psi.tensors],
    }


def mps_from_dict(doc: dict) -> MatrixProductState:
    tensors = [np.array(s["re"], dtype=float) + 1j * np.array(s["im"], dtype=float) for s in doc["sites"]]
    psi = MatrixProductState(tuple(tensors))
    if list(psi.bond_profile) != list(doc["bond_profile"]) or psi.n != doc["n"] or psi.d != doc["d"]:
        raise ProfileError("serialized header does not match the tensors")
    return psi


def dumps_mps(psi: MatrixProductState) -> str:
    return json.dumps(mps_to_dict(psi))


def loads_mps(text: str) -> MatrixProductState:
    return mps_from_dict(json.loads(text))
