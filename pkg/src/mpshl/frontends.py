"""Problem readers: DIMACS graphs (max clique) and QUBO triplet files."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .bqp import BqpInstance


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class Graph:
    V: int
    edges: frozenset  # of (u, v) with 1 <= u < v <= V

    def __post_init__(self):
        for u, v in self.edges:
            if not 1 <= u < v <= self.V:
                raise ValueError(f"bad edge ({u}, {v}) for V={self.V}")

    @classmethod
    def from_edges(cls, V: int, edges) -> "Graph":
        out = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            out.add((min(u, v), max(u, v)))
        return cls(V, frozenset(out))

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def is_clique(self, vertices) -> bool:
        return all(self.has_edge(u, v) for u, v in itertools.combinations(sorted(vertices), 2))


def _ints(parts, lineno, count):
    if len(parts) != count:
        raise ParseError(f"expected {count} fields, got {len(parts)}", lineno)
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ParseError("non-integer field", lineno) from None


def parse_dimacs(text: str) -> Graph:
    """DIMACS clique format: ``c`` comments, one ``p edge V E`` line, ``e u v`` edges."""
    V = None
    declared = None
    edges = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        tag = parts[0]
        if tag == "p":
            if V is not None:
                raise ParseError("second problem line", lineno)
            if len(parts) != 4 or parts[1] not in ("edge", "col"):
                raise ParseError("problem line must read 'p edge V E'", lineno)
            V, declared = _ints(parts[2:], lineno, 2)
            if V < 0 or declared < 0:
                raise ParseError("negative size", lineno)
        elif tag == "e":
            if V is None:
                raise ParseError("edge before problem line", lineno)
            u, v = _ints(parts[1:], lineno, 2)
            if u == v:
                raise ParseError(f"self-loop at vertex {u}", lineno)
            if not (1 <= u <= V and 1 <= v <= V):
                raise ParseError(f"vertex out of range 1..{V}", lineno)
            e = (min(u, v), max(u, v))
            if e in edges:
                warnings.warn(f"line {lineno}: duplicate edge {e} dropped", stacklevel=2)
            edges.add(e)
        else:
            raise ParseError(f"unknown line type {tag!r}", lineno)
    if V is None:
        raise ParseError("missing problem line")
    if declared != len(edges):
        warnings.warn(f"header declares {declared} edges, found {len(edges)}", stacklevel=2)
    return Graph(V, frozenset(edges))


def _normalized(Q: np.ndarray, meta: dict) -> BqpInstance:
    Q = 0.5 * (Q + Q.T)
    top = float(np.max(np.abs(Q)))
    scale = top if top > 0 else 1.0
    return BqpInstance(Q / scale, scale=scale, meta=meta)


def clique_to_bqp(g: Graph, penalty: float = 2.0) -> BqpInstance:
    """Minimize ``-sum b_i + penalty * sum_{non-edges} b_i b_j``.

    With ``penalty > 1`` every minimizer is the indicator of a maximum clique
    and the minimum equals ``-omega(g)``, up to the recorded scale.
    """
    if g.V == 0:
        raise ValueError("graph has no vertices")
    if not penalty > 1:
        raise ValueError("penalty must exceed 1")
    Q = np.zeros((g.V, g.V))
    np.fill_diagonal(Q, -1.0)
    for u, v in itertools.combinations(range(1, g.V + 1), 2):
        if not g.has_edge(u, v):
            Q[u - 1, v - 1] = Q[v - 1, u - 1] = penalty / 2.0
    return _normalized(Q, {"source": "clique", "V": g.V, "edges": len(g.edges), "penalty": penalty})


def clique_from_solution(b) -> list:
    """1-based vertices selected by a binary vector."""
    return [i + 1 for i, v in enumerate(b) if v]


def parse_qubo(text: str) -> BqpInstance:
    """Lines ``i j value`` (1-based); an optional header ``p qubo n`` fixes the size.

    Entries at (i, j) and (j, i) are summed, then the matrix is symmetrized
    and divided by its largest magnitude.
    """
    n = None
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] in ("c", "#"):
            continue
        if parts[0] == "p":
            if len(parts) != 3 or parts[1] != "qubo":
                raise ParseError("header must read 'p qubo n'", lineno)
            (n,) = _ints(parts[2:], lineno, 1)
            if n < 1:
                raise ParseError("size must be positive", lineno)
            continue
        if len(parts) != 3:
            raise ParseError(f"expected 'i j value', got {len(parts)} fields", lineno)
        i, j = _ints(parts[:2], lineno, 2)
        try:
            val = float(parts[2].replace("−", "-"))
        except ValueError:
            raise ParseError("bad value", lineno) from None
        if not np.isfinite(val):
            raise ParseError("non-finite value", lineno)
        if i < 1 or j < 1 or (n is not None and (i > n or j > n)):
            raise ParseError("index out of range", lineno)
        entries.append((i, j, val))
    if not entries and n is None:
        raise ParseError("no entries")
    size = n if n is not None else max(max(i, j) for i, j, _ in entries)
    Q = np.zeros((size, size))
    for i, j, val in entries:
        Q[i - 1, j - 1] += val
    return _normalized(Q, {"source": "qubo", "n": size, "entries": len(entries)})


def read_problem(path) -> BqpInstance:
    """Dispatch on content: a ``p edge`` header means DIMACS, anything else QUBO."""
    with open(path) as fh:
        text = fh.read()
    for raw in text.splitlines():
        parts = raw.split()
        if parts and parts[0] == "p":
            if len(parts) > 1 and parts[1] in ("edge", "col"):
                return clique_to_bqp(parse_dimacs(text))
            break
    return parse_qubo(text)
