"""Undirected communication topology, Laplacian and consensus residuals.

Robot indices are 0-based in code; scenario files use 1-based pairs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Topology:
    N: int
    edges: tuple[tuple[int, int], ...]
    _nbrs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("topology needs at least one robot")
        norm = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on robot {i}")
            if not (0 <= i < self.N and 0 <= j < self.N):
                raise ValueError(f"edge ({i}, {j}) out of range for N={self.N}")
            norm.append((min(i, j), max(i, j)))
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edge in topology")
        norm = tuple(sorted(norm))
        object.__setattr__(self, "edges", norm)
        nbrs = [[] for _ in range(self.N)]
        for i, j in norm:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "_nbrs", tuple(tuple(sorted(a)) for a in nbrs))

    @classmethod
    def ring(cls, N: int) -> "Topology":
        if N == 1:
            return cls(1, ())
        if N == 2:
            return cls(2, ((0, 1),))
        return cls(N, tuple((i, (i + 1) % N) for i in range(N)))

    @classmethod
    def complete(cls, N: int) -> "Topology":
        return cls(N, tuple((i, j) for i in range(N) for j in range(i + 1, N)))

    @classmethod
    def circulant(cls, N: int, offsets: Iterable[int]) -> "Topology":
        """Each robot links to the robots ``s`` places ahead of it, for every ``s`` in ``offsets``."""
        edges = set()
        for s in offsets:
            for i in range(N):
                j = (i + int(s)) % N
                if i != j:
                    edges.add((min(i, j), max(i, j)))
        return cls(N, tuple(sorted(edges)))

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._nbrs[i]

    def degree(self) -> np.ndarray:
        return np.array([len(a) for a in self._nbrs], dtype=float)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.N, self.N))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A

    def components(self) -> list[list[int]]:
        seen = [False] * self.N
        comps = []
        for s in range(self.N):
            if seen[s]:
                continue
            seen[s] = True
            comp, queue = [], deque([s])
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in self._nbrs[u]:
                    if not seen[v]:
                        seen[v] = True
                        queue.append(v)
            comps.append(sorted(comp))
        return comps


def laplacian(t: Topology) -> np.ndarray:
    """``L = D - A``."""
    A = t.adjacency()
    return np.diag(A.sum(axis=1)) - A


def is_connected(t: Topology) -> bool:
    return len(t.components()) == 1


@dataclass(frozen=True)
class OffsetTable:
    """Reference configurations ``w1*``, ``w2*``; per-edge offsets are their differences."""

    w1_star: np.ndarray
    w2_star: np.ndarray

    def __post_init__(self):
        w1 = np.asarray(self.w1_star, dtype=float).copy()
        w2 = np.asarray(self.w2_star, dtype=float).copy()
        if w1.shape != w2.shape or w1.ndim != 1:
            raise ValueError("w1_star and w2_star must be vectors of equal length")
        w1.flags.writeable = False
        w2.flags.writeable = False
        object.__setattr__(self, "w1_star", w1)
        object.__setattr__(self, "w2_star", w2)

    def delta1(self, i: int, j: int) -> float:
        return float(self.w1_star[i] - self.w1_star[j])

    def delta2(self, i: int, j: int) -> float:
        return float(self.w2_star[i] - self.w2_star[j])

    def edge_offsets(self, t: Topology) -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``(Delta1*, Delta2*)`` over ``t.edges``."""
        d1 = np.array([self.delta1(i, j) for i, j in t.edges])
        d2 = np.array([self.delta2(i, j) for i, j in t.edges])
        return d1, d2


def coordination_residuals(
    t: Topology, o: OffsetTable, w1: Sequence[float], w2: Sequence[float], i: int
) -> tuple[float, float]:
    """Consensus terms ``(c1, c2)`` for robot ``i``.

    Reads ``w1[i]``, ``w2[i]`` and the entries of ``i``'s neighbors, nothing else.
    """
    wi1, wi2 = w1[i], w2[i]
    c1 = 0.0
    c2 = 0.0
    for j in t.neighbors(i):
        c1 -= wi1 - w1[j] - o.delta1(i, j)
        c2 -= wi2 - w2[j] - o.delta2(i, j)
    return c1, c2


def edge_errors(t: Topology, o: OffsetTable, w1: np.ndarray, w2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge coordination errors ``w_i - w_j - Delta^{[i,j]}`` (edges with i < j)."""
    if not t.edges:
        return np.zeros(0), np.zeros(0)
    e = np.asarray(t.edges)
    i, j = e[:, 0], e[:, 1]
    e1 = (w1[i] - w1[j]) - (o.w1_star[i] - o.w1_star[j])
    e2 = (w2[i] - w2[j]) - (o.w2_star[i] - o.w2_star[j])
    return e1, e2
