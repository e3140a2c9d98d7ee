"""Ihara zeta functions of finite graphs, computed exactly.

Conventions: directed edges are indexed 2k (u->v) and 2k+1 (v->u) for the
k-th undirected edge (u, v).  Primitive cycles are counted up to rotation
only, so a cycle and its reversal are distinct classes.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "DegreeTooSmall",
    "RadiusViolation",
    "BudgetExceeded",
    "nb_operator",
    "nb_walk_counts",
    "bareiss_det",
    "nb_det",
    "ihara_inv_bass",
    "log_deriv_ihara",
    "primitive_cycle_census",
    "divisor_walk_counts",
    "tree_ball_fraction",
    "cycle_graph",
    "complete_graph",
    "petersen_graph",
    "random_regular_graph",
    "random_min_degree2_graph",
    "disjoint_union",
    "read_edge_list",
    "write_edge_list",
]


class DegreeTooSmall(ValueError):
    pass


class RadiusViolation(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class Graph:
    n: int
    edges: list[tuple[int, int]]

    def __post_init__(self):
        seen = set()
        clean = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"multi-edge {key}")
            seen.add(key)
            clean.append((u, v))
        self.edges = clean
        self.adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            self.adj[u].append(v)
            self.adj[v].append(u)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adj]

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def directed_edges(self) -> list[tuple[int, int]]:
        out = []
        for u, v in self.edges:
            out.append((u, v))
            out.append((v, u))
        return out

    def adjacency(self) -> list[list[int]]:
        A = [[0] * self.n for _ in range(self.n)]
        for u, v in self.edges:
            A[u][v] = A[v][u] = 1
        return A


def _require_min_degree(g: Graph):
    if g.n and min(g.degrees()) < 2:
        raise DegreeTooSmall("zeta operations need minimum degree >= 2")


def nb_operator(g: Graph) -> sp.csr_matrix:
    """Non-backtracking edge operator: (e -> f) iff head(e) = tail(f), f != reverse(e)."""
    _require_min_degree(g)
    dedges = g.directed_edges()
    out_of: list[list[int]] = [[] for _ in range(g.n)]
    for idx, (u, _) in enumerate(dedges):
        out_of[u].append(idx)
    rows, cols = [], []
    for e, (u, v) in enumerate(dedges):
        for f in out_of[v]:
            if f != (e ^ 1):
                rows.append(e)
                cols.append(f)
    size = len(dedges)
    data = np.ones(len(rows), dtype=np.int64)
    return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


def _walk_bound(g: Graph, m_max: int) -> float:
    dmax = max(g.degrees()) if g.n else 0
    return 2 * g.m * float(max(dmax - 1, 1)) ** m_max


def nb_walk_counts(g: Graph, m_max: int) -> list[int]:
    """[N_1, ..., N_m_max] with N_m = trace(B^m), in exact integer arithmetic."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    B = nb_operator(g)
    half = (m_max + 1) // 2
    if _walk_bound(g, half) ** 2 < 2 ** 62:
        powers = [sp.identity(B.shape[0], dtype=np.int64, format="csr")]
        for _ in range(half):
            powers.append((powers[-1] @ B).tocsr())
        out = []
        for m in range(1, m_max + 1):
            a = (m + 1) // 2
            b = m - a
            # trace(B^a B^b) = sum_ij (B^a)_ij (B^b)_ji
            out.append(int(powers[a].multiply(powers[b].T).sum()))
        return out
    # fall back to Python integers for huge counts
    Bd = B.toarray().astype(object)
    P = Bd.copy()
    out = [int(np.trace(P))]
    for _ in range(m_max - 1):
        P = P.dot(Bd)
        out.append(int(np.trace(P)))
    return out


def bareiss_det(M: Sequence[Sequence[int]]) -> int:
    """Fraction-free determinant of an integer matrix."""
    A = [list(map(int, row)) for row in M]
    n = len(A)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def nb_det(g: Graph, u) -> Fraction:
    """det(I - u B) exactly."""
    u = Fraction(u)
    p, q = u.numerator, u.denominator
    B = nb_operator(g).toarray()
    size = B.shape[0]
    M = [[(q if i == j else 0) - p * int(B[i, j]) for j in range(size)] for i in range(size)]
    return Fraction(bareiss_det(M), q ** size)


def ihara_inv_bass(g: Graph, u) -> Fraction:
    """1/zeta(u) = (1 - u^2)^(m - n) det(I - u A + u^2 (D - I)), exactly."""
    _require_min_degree(g)
    u = Fraction(u)
    p, q = u.numerator, u.denominator
    A = g.adjacency()
    deg = g.degrees()
    # scale by q^2: q^2 I - p q A + p^2 (D - I)
    M = [[(q * q + p * p * (deg[i] - 1) if i == j else 0) - p * q * A[i][j] for j in range(g.n)]
         for i in range(g.n)]
    det = Fraction(bareiss_det(M), q ** (2 * g.n))
    return (1 - u * u) ** (g.m - g.n) * det


@dataclass
class IharaLogDeriv:
    value: Fraction
    tail_bound: Fraction
    counts: list[int]

    def per_vertex(self, n: int) -> float:
        return float(self.value) / n


def log_deriv_ihara(g: Graph, u, m_max: int) -> IharaLogDeriv:
    """u d/du log zeta(u) = sum_m N_m u^m, truncated at m_max, with a tail bound."""
    u = Fraction(u)
    dmax = max(g.degrees())
    x = (dmax - 1) * abs(u)
    if not x < 1:
        raise RadiusViolation(f"|u| = {u} must be below 1/(d_max - 1) = 1/{dmax - 1}")
    counts = nb_walk_counts(g, m_max)
    value = sum((Fraction(c) * u ** (m + 1) for m, c in enumerate(counts)), Fraction(0))
    # N_m <= 2|E| (d_max - 1)^m
    tail = Fraction(2 * g.m) * x ** (m_max + 1) / (1 - x)
    return IharaLogDeriv(value, tail, counts)


def _min_rotation_is_identity(seq: tuple) -> bool:
    n = len(seq)
    return all(seq <= seq[k:] + seq[:k] for k in range(1, n))


def _is_primitive(seq: tuple) -> bool:
    n = len(seq)
    for d in range(1, n):
        if n % d == 0 and seq == seq[d:] + seq[:d]:
            return False
    return True


def primitive_cycle_census(g: Graph, m_max: int = 12, budget: int = 5_000_000) -> list[tuple[int, int]]:
    """Brute-force count of primitive non-backtracking cycle classes by length.

    Cycles are sequences of directed edges, closed and non-backtracking
    (cyclically too); a class is a rotation orbit.  Each class is counted by
    its lexicographically least rotation, which starts at its smallest edge.
    """
    _require_min_degree(g)
    dedges = g.directed_edges()
    out_of: list[list[int]] = [[] for _ in range(g.n)]
    for idx, (u, _) in enumerate(dedges):
        out_of[u].append(idx)
    counts = [0] * (m_max + 1)
    work = 0
    for start in range(len(dedges)):
        tail_start = dedges[start][0]
        stack = [(start, (start,))]
        while stack:
            e, path = stack.pop()
            work += 1
            if work > budget:
                raise BudgetExceeded("primitive_cycle_census exceeded its work budget")
            head = dedges[e][1]
            L = len(path)
            if head == tail_start and (start ^ 1) != e and L <= m_max:
                if _min_rotation_is_identity(path) and _is_primitive(path):
                    counts[L] += 1
            if L == m_max:
                continue
            for f in out_of[head]:
                if f == (e ^ 1) or f < start:
                    continue
                stack.append((f, path + (f,)))
    return [(m, c) for m, c in enumerate(counts) if m >= 1 and c]


def divisor_walk_counts(census: Iterable[tuple[int, int]], m_max: int) -> list[int]:
    """N_m = sum_{d | m} d * P_d from primitive class counts P_d."""
    P = dict(census)
    return [sum(d * P.get(d, 0) for d in range(1, m + 1) if m % d == 0) for m in range(1, m_max + 1)]


def tree_ball_fraction(g: Graph, R: int) -> float:
    """Fraction of vertices whose induced R-ball contains a cycle."""
    if R < 1:
        raise ValueError("R must be >= 1")
    bad = 0
    for v in range(g.n):
        dist = {v: 0}
        q = deque([v])
        while q:
            x = q.popleft()
            if dist[x] == R:
                continue
            for y in g.adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        # induced subgraph on a connected ball: a tree iff |E| = |V| - 1
        e2 = sum(1 for x in dist for y in g.adj[x] if y in dist)
        if e2 // 2 >= len(dist):
            bad += 1
    return bad / g.n


# graph constructors


def cycle_graph(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph(10, outer + spokes + inner)


def disjoint_union(g1: Graph, g2: Graph) -> Graph:
    return Graph(g1.n + g2.n, g1.edges + [(u + g1.n, v + g1.n) for u, v in g2.edges])


def random_regular_graph(n: int, d: int, seed: int, max_tries: int = 10000) -> Graph:
    """Pairing model; draws with loops or multi-edges are rejected."""
    if (n * d) % 2:
        raise ValueError("n * d must be even")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        key = np.sort(pairs, axis=1)
        codes = key[:, 0].astype(np.int64) * n + key[:, 1]
        if len(np.unique(codes)) != len(codes):
            continue
        return Graph(n, [tuple(map(int, p)) for p in key])
    raise BudgetExceeded("pairing model rejection budget exhausted")


def random_min_degree2_graph(n: int, extra_edges: int, seed: int) -> Graph:
    """Connected graph of minimum degree 2: a random Hamiltonian cycle plus chords."""
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    edges = {tuple(sorted((order[i], order[(i + 1) % n]))) for i in range(n)}
    candidates = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
    rng.shuffle(candidates)
    edges.update(candidates[:extra_edges])
    return Graph(n, sorted(edges))


def read_edge_list(path) -> Graph:
    edges = []
    nmax = -1
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        u, v = int(parts[0]), int(parts[1])
        edges.append((u, v))
        nmax = max(nmax, u, v)
    return Graph(nmax + 1, edges)


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in g.edges))
