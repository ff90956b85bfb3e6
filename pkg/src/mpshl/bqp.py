"""Binary quadratic problems and the continuous penalty objective.

For a symmetric ``(N-1) x (N-1)`` matrix ``M`` with entries in ``[-1, 1]``,
the box objective

    f(x, y) = 2 sum_{k<N} x_k y_k - sum_{k<N} (x_k + y_k) - x_N y_N
              + x' M x' / (2 (N-1)^2),        x' = (x_1, ..., x_{N-1})

over ``x, y in [0, 1]^N`` is minimized exactly at binary ``x'`` minimizing
``b M b^T`` with ``y_k = 1 - x_k`` for ``k < N`` and ``x_N = y_N = 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

ENTRY_TOL = 1e-12


class BoxViolation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BqpInstance:
    """Minimize ``b M b^T`` over binary ``b``; ``M`` is symmetrized on ingestion.

    ``scale`` maps values back to the source problem: ``source = scale * value``.
    """

    M: np.ndarray
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.M, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise ValueError(f"M must be a nonempty square matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("M has non-finite entries")
        M = 0.5 * (M + M.T)
        if np.max(np.abs(M)) > 1 + ENTRY_TOL:
            raise ValueError("entries of M must lie in [-1, 1]")
        M.flags.writeable = False
        object.__setattr__(self, "M", M)

    @property
    def N(self) -> int:
        return self.M.shape[0] + 1

    @property
    def nvars(self) -> int:
        return self.M.shape[0]

    def value(self, b) -> float:
        b = np.asarray(b, dtype=float)
        return float(b @ self.M @ b)

    def to_dict(self) -> dict:
        return {"M": self.M.tolist(), "scale": self.scale, "meta": self.meta}

    @classmethod
    def from_dict(cls, doc: dict) -> "BqpInstance":
        return cls(np.array(doc["M"], dtype=float), doc.get("scale", 1.0), doc.get("meta", {}))


def _check_box(v, name):
    v = np.asarray(v, dtype=float)
    if np.any(v < -ENTRY_TOL) or np.any(v > 1 + ENTRY_TOL):
        raise BoxViolation(f"{name} leaves the unit box")
    return v


def big_objective(x, y, M) -> float:
    x = _check_box(x, "x")
    y = _check_box(y, "y")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = M.shape[0] + 1
    if x.shape != (N,) or y.shape != (N,):
        raise ValueError(f"x and y need length N = {N}")
    xb, yb = x[:-1], y[:-1]
    quad = xb @ M @ xb / (2.0 * (N - 1) ** 2)
    return float(2.0 * xb @ yb - xb.sum() - yb.sum() - x[-1] * y[-1] + quad)


def witness(b) -> tuple:
    """(x, y) attached to a binary vector by the minimizer conditions."""
    b = np.asarray(b, dtype=float)
    x = np.append(b, 1.0)
    y = np.append(1.0 - b, 1.0)
    return x, y


def satisfies_conditions(x, y, M, bqp_value: float, tol: float = 0.0) -> bool:
    """Minimizer conditions: binary x,y with y_k = 1 - x_k, x_N = y_N = 1,
    and x' attaining the binary minimum ``bqp_value``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    binary = np.all(np.isin(x, (0.0, 1.0))) and np.all(np.isin(y, (0.0, 1.0)))
    if not binary or x[-1] != 1.0 or y[-1] != 1.0:
        return False
    if np.any(y[:-1] != 1.0 - x[:-1]):
        return False
    xb = x[:-1]
    return abs(float(xb @ np.asarray(M) @ xb) - bqp_value) <= max(tol, 1e-12)


@dataclass
class BigMinimum:
    value: float
    witnesses: list  # list of (x, y)
    bqp_value: float


def big_minimum(M) -> BigMinimum:
    """Analytic minimum of :func:`big_objective` and all its minimizers."""
    from .oracles import bqp_min

    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = M.shape[0] + 1
    val, argmins = bqp_min(M)
    value = -N + val / (2.0 * (N - 1) ** 2)
    return BigMinimum(value=value, witnesses=[witness(b) for b in argmins], bqp_value=val)


def signed_penalty_matrix(M) -> np.ndarray:
    """Signed N x N table S with x S y^T = big_objective(x, y) on every witness.

    Uses x_N = y_N = 1 and y_k = 1 - x_k to turn the linear and x-x quadratic
    parts into bilinear x-y terms.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = M.shape[0] + 1
    s = 1.0 / (2.0 * (N - 1) ** 2)
    S = np.zeros((N, N))
    for k in range(N - 1):
        S[k, k] += 2.0
        S[k, N - 1] -= 1.0
        S[N - 1, k] -= 1.0
        for l in range(N - 1):
            if k == l:
                S[k, N - 1] += s * M[k, k]
            else:
                S[k, N - 1] += s * M[k, l]
                S[k, l] -= s * M[k, l]
    S[N - 1, N - 1] -= 1.0
    return S


def magnitude_table(S: np.ndarray) -> tuple:
    """Nonnegative table in [0, 1) proportional to |S|, and the factor used."""
    top = float(np.max(np.abs(S)))
    factor = 0.5 / top if top > 0 else 1.0
    return np.abs(S) * factor, factor


def binary_vectors(k: int):
    """All length-k 0/1 tuples in lexicographic order."""
    return itertools.product((0, 1), repeat=k)
