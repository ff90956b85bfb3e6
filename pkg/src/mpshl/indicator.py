"""Matrix families whose word products, shifted by P, are indicator matrices.

Bond index layout for D = 2N^2 + N (1-based):

* ``1..N``            idle states, never reached from a routed row,
* ``kN + l``          "waiting" state of the pair (k, l),
* ``N^2 + N + j``     "fired" state of the pair with position j = (k-1)N + l.

Reading letter 0 at position j keeps every waiting state except the one of
pair j, which dies; letter 1 moves the waiting state of pair j to its fired
state with weight ``gamma * Y[k, l]`` and kills every other waiting or
fired state.  So only one-hot words survive, each on exactly one routed
row, and ``P`` moves row ``kN + l`` to row ``k + 1``.  The leftover
columns are completed with unit entries so that
``M_1^dagger M_1 + M_2^dagger M_2 = 1`` holds exactly at every position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def shift_operator(N: int) -> np.ndarray:
    """P = sum_{k,l} E(k+1, kN+l), as a D x D real matrix."""
    D = 2 * N * N + N
    P = np.zeros((D, D))
    for k in range(1, N + 1):
        for l in range(1, N + 1):
            P[k, k * N + l - 1] = 1.0
    return P


def waiting_state(N: int, k: int, l: int) -> int:
    return k * N + l


def fired_state(N: int, k: int, l: int) -> int:
    return N * N + N + position(N, k, l)


def position(N: int, k: int, l: int) -> int:
    return (k - 1) * N + l


@dataclass(eq=False)
class IndicatorFamily:
    N: int
    P: np.ndarray
    M1: np.ndarray  # (N^2, D, D), letter 0
    M2: np.ndarray  # (N^2, D, D), letter 1
    Y: np.ndarray
    gamma: float
    positions: np.ndarray  # (N, N, 2), 1-based (row, col) of the surviving entry

    @property
    def D(self) -> int:
        return 2 * self.N**2 + self.N

    @property
    def values(self) -> np.ndarray:
        return self.gamma * self.Y

    def word_product(self, word) -> np.ndarray:
        out = self.P.astype(complex)
        for j, w in enumerate(word):
            out = out @ (self.M2[j] if w else self.M1[j])
        return out

    def designated_word(self, k: int, l: int) -> tuple:
        word = [0] * self.N**2
        word[position(self.N, k, l) - 1] = 1
        return tuple(word)

    def gauge_residuals(self) -> np.ndarray:
        eye = np.eye(self.D)
        g = np.einsum("jab,jac->jbc", self.M1.conj(), self.M1) + np.einsum("jab,jac->jbc", self.M2.conj(), self.M2)
        return np.max(np.abs(g - eye), axis=(1, 2))


def build_indicator_family(Y, N: int = None, gamma: float = 1.0) -> IndicatorFamily:
    """Family realizing ``gamma * Y[k, l]`` on the one-hot word of pair (k, l)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    N = Y.shape[0] if N is None else N
    if Y.shape != (N, N):
        raise ValueError(f"Y must be {N}x{N}")
    if np.any(Y < 0) or np.any(Y >= 1):
        raise ValueError("entries of Y must lie in [0, 1)")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    D = 2 * N * N + N
    L = N * N
    M1 = np.zeros((L, D, D), dtype=complex)
    M2 = np.zeros((L, D, D), dtype=complex)
    waiting = [waiting_state(N, k, l) - 1 for k in range(1, N + 1) for l in range(1, N + 1)]
    fired = [fired_state(N, k, l) - 1 for k in range(1, N + 1) for l in range(1, N + 1)]
    positions = np.zeros((N, N, 2), dtype=int)
    for k in range(1, N + 1):
        for l in range(1, N + 1):
            j = position(N, k, l) - 1
            s, t = waiting[j], fired[j]
            beta = gamma * Y[k - 1, l - 1]
            alpha = np.sqrt(1.0 - beta * beta)
            for s2 in waiting:
                if s2 != s:
                    M1[j, s2, s2] = 1.0
            for t2 in fired:
                M1[j, t2, t2] = 1.0 if t2 != t else alpha
            M1[j, 0, s] = 1.0
            M2[j, s, t] = beta
            for u in range(N):
                M2[j, u, u] = 1.0
            positions[k - 1, l - 1] = (k + 1, t + 1)
    return IndicatorFamily(N=N, P=shift_operator(N), M1=M1, M2=M2, Y=Y, gamma=float(gamma), positions=positions)
