"""Finite graphs for the dynamics: periodic tori plus a few hand-built graphs.

Vertices are integers ``0..n_vertices-1``.  On a torus they are row-major
indices of the coordinate vector (first axis most significant).  Edges are
stored once each, as ``(u, v)`` with ``u < v``, sorted lexicographically; that
order is the canonical edge order used by every other module.
"""

from __future__ import annotations

import itertools
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from swcutoff.errors import SizingError

# Largest vertex count we are willing to materialise.
MAX_VERTICES = 1 << 26


def as_vertex_set(vertices: Iterable[int]) -> np.ndarray:
    """Sorted, deduplicated int64 array of vertex ids."""
    return np.unique(np.asarray(list(vertices), dtype=np.int64))


class Graph:
    """Simple undirected graph with a canonical edge list."""

    def __init__(self, n_vertices: int, edges: Iterable[tuple[int, int]]):
        if n_vertices < 1:
            raise ValueError("a graph needs at least one vertex")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n_vertices):
            raise IndexError("edge endpoint out of range")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ValueError("self-loops are not allowed")
        arr = np.unique(np.sort(arr, axis=1), axis=0).reshape(-1, 2)
        arr.setflags(write=False)
        self.n_vertices = int(n_vertices)
        self.edges = arr

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def eu(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def ev(self) -> np.ndarray:
        return self.edges[:, 1]

    @cached_property
    def _edge_lookup(self) -> dict[tuple[int, int], int]:
        return {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}

    @cached_property
    def _incidence(self) -> list[np.ndarray]:
        inc: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for i, (u, v) in enumerate(self.edges):
            inc[u].append(i)
            inc[v].append(i)
        return [np.array(x, dtype=np.int64) for x in inc]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n_edges else 0

    def edge_index(self, u: int, v: int) -> int:
        """Index of edge {u, v} in canonical order; KeyError if absent."""
        return self._edge_lookup[(min(u, v), max(u, v))]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_lookup

    def incident_edges(self, v: int) -> np.ndarray:
        self._check_vertex(v)
        return self._incidence[v]

    def neighbors(self, v: int) -> list[int]:
        self._check_vertex(v)
        out = []
        for i in self._incidence[v]:
            u, w = self.edges[i]
            out.append(int(w if u == v else u))
        return out

    def descriptor(self) -> dict:
        return {"kind": "graph", "n_vertices": self.n_vertices,
                "edges": [[int(u), int(v)] for u, v in self.edges]}

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex {v} out of range [0, {self.n_vertices})")

    def __repr__(self) -> str:
        return f"Graph(n_vertices={self.n_vertices}, n_edges={self.n_edges})"


class TorusLattice(Graph):
    """Periodic box with sides ``shape``; cubic tori come from :func:`build_torus`.

    A side of 2 produces the doubled adjacency ``x -> x+1 = x-1``, which is
    collapsed to a single edge.  ``collapsed`` reports that case.
    """

    def __init__(self, shape: Sequence[int]):
        shape = tuple(int(s) for s in shape)
        if len(shape) < 1:
            raise ValueError("dim must be >= 1")
        if min(shape) < 2:
            raise ValueError("every side must be >= 2")
        count = 1
        for s in shape:
            count *= s
            if count > MAX_VERTICES:
                raise SizingError(f"torus {shape} has more than {MAX_VERTICES} vertices")
        self.shape = shape
        self.dim = len(shape)
        self._strides = np.array([int(np.prod(shape[k + 1:])) for k in range(self.dim)], dtype=np.int64)
        coords = np.array(np.unravel_index(np.arange(count), shape)).T
        edges = []
        for k, s in enumerate(shape):
            nxt = coords.copy()
            nxt[:, k] = (nxt[:, k] + 1) % s
            edges.append(np.stack([np.arange(count), nxt @ self._strides], axis=1))
        super().__init__(count, np.concatenate(edges))
        self._coords = coords
        self._coords.setflags(write=False)

    @property
    def side(self) -> int:
        if len(set(self.shape)) != 1:
            raise AttributeError("side is only defined for cubic tori; use shape")
        return self.shape[0]

    @property
    def collapsed(self) -> bool:
        return min(self.shape) == 2

    def coords(self, v: int) -> tuple[int, ...]:
        self._check_vertex(v)
        return tuple(int(c) for c in self._coords[v])

    @property
    def all_coords(self) -> np.ndarray:
        return self._coords

    def index(self, coords: Sequence[int]) -> int:
        c = np.mod(np.asarray(coords, dtype=np.int64), self.shape)
        return int(c @ self._strides)

    def neighbors(self, v: int) -> list[int]:
        """Neighbors in the order +e_1, -e_1, +e_2, -e_2, ...; duplicates removed."""
        self._check_vertex(v)
        out: list[int] = []
        base = self._coords[v]
        for k, s in enumerate(self.shape):
            for step in (1, -1):
                c = base.copy()
                c[k] = (c[k] + step) % s
                w = int(c @ self._strides)
                if w not in out:
                    out.append(w)
        return out

    def translate(self, v: int, shift: Sequence[int]) -> int:
        return self.index(self._coords[v] + np.asarray(shift))

    def linf_distance(self, u: int, v: int) -> int:
        self._check_vertex(u)
        self._check_vertex(v)
        d = np.abs(self._coords[u] - self._coords[v])
        return int(np.max(np.minimum(d, np.asarray(self.shape) - d)))

    def linf_distance_matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pairwise wraparound l-infinity distances between vertex arrays."""
        ca = self._coords[np.asarray(a, dtype=np.int64)][:, None, :]
        cb = self._coords[np.asarray(b, dtype=np.int64)][None, :, :]
        d = np.abs(ca - cb)
        return np.max(np.minimum(d, np.asarray(self.shape) - d), axis=-1)

    def box(self, center: int, radius: int) -> np.ndarray:
        self._check_vertex(center)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        offsets = itertools.product(*[range(-min(radius, s // 2), min(radius, s // 2) + 1)
                                      for s in self.shape])
        base = self._coords[center]
        pts = (base + np.array(list(offsets), dtype=np.int64)) % np.asarray(self.shape)
        return np.unique(pts @ self._strides)

    def descriptor(self) -> dict:
        return {"kind": "torus", "shape": list(self.shape)}

    def __repr__(self) -> str:
        return f"TorusLattice(shape={self.shape})"


def build_torus(dim: int, side: int) -> TorusLattice:
    """The d-dimensional torus (Z/side)^dim with nearest-neighbor edges."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if side < 2:
        raise ValueError("side must be >= 2")
    if side ** dim > MAX_VERTICES:
        raise SizingError(f"side**dim = {side}**{dim} exceeds {MAX_VERTICES} vertices")
    return TorusLattice((side,) * dim)


def neighbors(lattice: Graph, v: int) -> list[int]:
    return lattice.neighbors(v)


def linf_distance(lattice: TorusLattice, u: int, v: int) -> int:
    return lattice.linf_distance(u, v)


def box(lattice: TorusLattice, center: int, radius: int) -> np.ndarray:
    """All vertices within l-infinity distance ``radius`` of ``center``."""
    return lattice.box(center, radius)


def single_vertex() -> Graph:
    return Graph(1, [])


def single_edge() -> Graph:
    return Graph(2, [(0, 1)])


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    """Plain n-cycle as a generic graph (n >= 3); same edges as build_torus(1, n)."""
    if n < 3:
        raise ValueError("a simple cycle needs n >= 3")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph(n, itertools.combinations(range(n), 2))


def graph_from_descriptor(desc: dict) -> Graph:
    if desc["kind"] == "torus":
        return TorusLattice(desc["shape"])
    return Graph(desc["n_vertices"], [tuple(e) for e in desc["edges"]])
