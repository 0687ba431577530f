"""History diagrams, information-percolation clusters and update supports.

Times are stored in half-steps: integer time t is layer ``2t`` and the
half-integer time t - 1/2 is the odd layer ``2t - 1``.  Step ``t - 1`` of the
update sequence acts between layers ``2t`` and ``2t - 2``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from swcutoff import _fast
from swcutoff.dynamics import (BarrierWindow, UpdateSequence, UpdateStep, coupled_sw_step,
                               sample_update_step)
from swcutoff.lattice import Graph, TorusLattice, as_vertex_set
from swcutoff.measures import ModelParams
from swcutoff.rng import step_stream
from swcutoff.stats import Estimate, binomial_estimate


class SpaceTimePoint(NamedTuple):
    vertex: int
    half_time: int


RED, BLUE, GREEN = "Red", "Blue", "Green"


# ------------------------------------------------------------ per-step structure


class StepComponents:
    """Components of a step's full percolation, with member lists."""

    __slots__ = ("comp", "sizes", "_order", "_starts", "step")

    def __init__(self, graph: Graph, step: UpdateStep):
        k, comp = _fast.component_labels(graph.n_vertices, graph.eu, graph.ev, step.percolation)
        self.step = step
        self.comp = comp
        self.sizes = np.bincount(comp, minlength=k)
        self._order = np.argsort(comp, kind="stable")
        self._starts = np.r_[0, np.cumsum(self.sizes)]

    def members(self, c: int) -> np.ndarray:
        return self._order[self._starts[c]:self._starts[c + 1]]

    def oblivious(self, v: int) -> bool:
        return self.sizes[self.comp[v]] == 1

    def descend(self, current: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Half-layer set and next integer-layer set reached from ``current``."""
        if len(current) == 0:
            return current, current
        comps = np.unique(self.comp[current])
        live = comps[self.sizes[comps] >= 2]
        below = (np.concatenate([self.members(c) for c in live]) if len(live)
                 else np.empty(0, np.int64))
        half = np.union1d(current, below)
        return half, np.sort(below)


def is_oblivious(graph: Graph, step: UpdateStep, v: int) -> bool:
    """True iff every edge at v is closed in the step's full percolation."""
    return not bool(np.any(step.percolation[graph.incident_edges(v)]))


# ------------------------------------------------------------ history diagrams


@dataclass
class HistoryDiagram:
    points: frozenset
    edges: frozenset
    roots: np.ndarray
    t_star: int

    def to_text(self, path: str | Path) -> None:
        lines = [f"# history t_star={self.t_star} roots={' '.join(map(str, self.roots))}"]
        for pt in sorted(self.points, key=lambda x: (-x.half_time, x.vertex)):
            lines.append(f"P {pt.vertex} {pt.half_time}")
        for a, b in sorted(self.edges, key=lambda e: (-e[0].half_time, e[0].vertex, e[1].vertex)):
            lines.append(f"E {a.vertex} {a.half_time} {b.vertex} {b.half_time}")
        Path(path).write_text("\n".join(lines) + "\n")


def _edge(a: SpaceTimePoint, b: SpaceTimePoint) -> tuple[SpaceTimePoint, SpaceTimePoint]:
    return (a, b) if (a.half_time, a.vertex) >= (b.half_time, b.vertex) else (b, a)


def build_history(graph: Graph, updates: Sequence[UpdateStep], seeds, t_star: int | None = None
                  ) -> HistoryDiagram:
    """Backward history diagram of ``seeds`` over steps ``0..t_star-1``."""
    t_star = len(updates) if t_star is None else t_star
    if t_star > len(updates):
        raise ValueError("updates do not cover the window")
    seeds = as_vertex_set(seeds)
    points = {SpaceTimePoint(int(v), 2 * t_star) for v in seeds}
    edges = set()
    current = seeds
    for t in range(t_star, 0, -1):
        info = StepComponents(graph, updates[t - 1])
        top, half, bottom = 2 * t, 2 * t - 1, 2 * t - 2
        for v in current:
            edges.add(_edge(SpaceTimePoint(int(v), top), SpaceTimePoint(int(v), half)))
        half_set, below = info.descend(current)
        points.update(SpaceTimePoint(int(v), half) for v in half_set)
        open_edges = np.flatnonzero(updates[t - 1].percolation)
        in_half = np.zeros(graph.n_vertices, bool)
        in_half[below] = True
        for e in open_edges:
            u, w = graph.edges[e]
            if in_half[u]:
                edges.add(_edge(SpaceTimePoint(int(u), half), SpaceTimePoint(int(w), half)))
        for v in below:
            points.add(SpaceTimePoint(int(v), bottom))
            edges.add(_edge(SpaceTimePoint(int(v), half), SpaceTimePoint(int(v), bottom)))
        current = below
    return HistoryDiagram(frozenset(points), frozenset(edges), seeds, t_star)


def history_slice(diagram: HistoryDiagram, half_time: int) -> np.ndarray:
    if not 0 <= half_time <= 2 * diagram.t_star:
        raise ValueError(f"layer {half_time} outside [0, {2 * diagram.t_star}]")
    return as_vertex_set(pt.vertex for pt in diagram.points if pt.half_time == half_time)


def _root_histories(infos: list[StepComponents], roots: np.ndarray
                    ) -> tuple[list[list[np.ndarray]], list[np.ndarray]]:
    """Per-root half-layer sets (top layer first) and bottom sets."""
    halves, bottoms = [], []
    for v in roots:
        cur = np.array([v], dtype=np.int64)
        layers = []
        for info in reversed(infos):
            half, cur = info.descend(cur)
            layers.append(half)
        halves.append(layers)
        bottoms.append(cur)
    return halves, bottoms


# ------------------------------------------------------------ clusters


@dataclass
class ClusterClassification:
    clusters: list[np.ndarray]
    marks: list[str]
    bottoms: list[np.ndarray] = field(repr=False)

    @property
    def red(self) -> list[np.ndarray]:
        return [c for c, m in zip(self.clusters, self.marks) if m == RED]

    def to_csv(self, path: str | Path) -> None:
        rows = ["cluster_id,size,mark"]
        rows += [f"{i},{len(c)},{m}" for i, (c, m) in enumerate(zip(self.clusters, self.marks))]
        Path(path).write_text("\n".join(rows) + "\n")


def _cluster_roots(infos: list[StepComponents], roots: np.ndarray) -> ClusterClassification:
    halves, bottoms = _root_histories(infos, roots)
    parent = list(range(len(roots)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[tuple[int, int], int] = {}
    for i, layers in enumerate(halves):
        for depth, half in enumerate(layers):
            for w in half.tolist():
                j = owner.setdefault((w, depth), i)
                if j != i:
                    parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(roots)):
        groups.setdefault(find(i), []).append(i)
    clusters, marks, bots = [], [], []
    for members in sorted(groups.values(), key=lambda m: roots[m[0]]):
        bottom = np.unique(np.concatenate([bottoms[i] for i in members]))
        clusters.append(roots[members])
        bots.append(bottom)
        if len(bottom):
            marks.append(RED)
        elif len(members) == 1:
            marks.append(BLUE)
        else:
            marks.append(GREEN)
    return ClusterClassification(clusters, marks, bots)


def cluster_partition(graph: Graph, updates: Sequence[UpdateStep], t_star: int | None = None
                      ) -> ClusterClassification:
    """Information-percolation clusters of all vertices for the window [0, t_star]."""
    t_star = len(updates) if t_star is None else t_star
    infos = [StepComponents(graph, s) for s in updates[:t_star]]
    return _cluster_roots(infos, np.arange(graph.n_vertices))


# ------------------------------------------------------------ Monte Carlo


def _lazy_steps(graph: Graph, params: ModelParams, seed: int, replica: int):
    cache: dict[int, StepComponents] = {}

    def get(t: int) -> StepComponents:
        if t not in cache:
            cache[t] = StepComponents(graph, sample_update_step(graph, params, step_stream(seed, t, replica)))
        return cache[t]
    return get


def survival_depth(graph: Graph, params: ModelParams, seed: int, replica: int, t_top: int,
                   vertex: int = 0) -> int:
    """Number of layers the history of ``vertex`` survives below time ``t_top``."""
    get = _lazy_steps(graph, params, seed, replica)
    cur = np.array([vertex], dtype=np.int64)
    for depth in range(t_top):
        _, cur = get(t_top - 1 - depth).descend(cur)
        if len(cur) == 0:
            return depth
    return t_top


def red_survival_curve(graph: Graph, params: ModelParams, t_max: int, replicas: int, seed: int = 0,
                       vertex: int = 0) -> list[Estimate]:
    """P(H_v(0) nonempty) for windows of length 1..t_max, from one window per replica."""
    depths = np.array([survival_depth(graph, params, seed, r, t_max, vertex) for r in range(replicas)])
    return [binomial_estimate(int(np.sum(depths >= t)), replicas) for t in range(1, t_max + 1)]


def red_survival_mc(graph: Graph, params: ModelParams, t: int, replicas: int, seed: int = 0,
                    vertex: int = 0) -> Estimate:
    """Monte Carlo estimate of P(H_v(0) nonempty) with a Wilson interval."""
    if replicas < 100:
        raise ValueError("red_survival_mc needs at least 100 replicas")
    hits = sum(survival_depth(graph, params, seed, r, t, vertex) >= t for r in range(replicas))
    return binomial_estimate(int(hits), replicas)


def red_set_event(graph: Graph, params: ModelParams, A: np.ndarray, t: int, seed: int, replica: int) -> bool:
    """Histories of A form one class under intersection and reach time 0."""
    A = as_vertex_set(A)
    if len(A) == 1:
        return survival_depth(graph, params, seed, replica, t, int(A[0])) >= t
    get = _lazy_steps(graph, params, seed, replica)
    infos = [get(s) for s in range(t)]
    cls = _cluster_roots(infos, A)
    return len(cls.clusters) == 1 and len(cls.bottoms[0]) > 0


def red_set_prob_mc(graph: Graph, params: ModelParams, A, t: int, replicas: int, seed: int = 0) -> Estimate:
    A = as_vertex_set(A)
    if len(A) > 4:
        raise ValueError("red_set_prob_mc supports |A| <= 4")
    hits = sum(red_set_event(graph, params, A, t, seed, r) for r in range(replicas))
    return binomial_estimate(int(hits), replicas)


def steiner_size(graph: Graph, A) -> int:
    """Vertex count of a smallest connected subgraph containing A (Dreyfus-Wagner)."""
    A = list(as_vertex_set(A))
    k = len(A)
    if k <= 1:
        return k
    n = graph.n_vertices
    adj = [graph.neighbors(v) for v in range(n)]
    dist = np.full((n, n), np.iinfo(np.int64).max // 4, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for w in adj[u]:
                if dist[s, w] > dist[s, u] + 1:
                    dist[s, w] = dist[s, u] + 1
                    dq.append(w)
    full = (1 << k) - 1
    cost = np.full((1 << k, n), np.iinfo(np.int64).max // 4, dtype=np.int64)
    for i, a in enumerate(A):
        cost[1 << i] = dist[a]
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        best = cost[mask].copy()
        sub = (mask - 1) & mask
        while sub:
            if sub < (mask ^ sub):
                best = np.minimum(best, cost[sub] + cost[mask ^ sub])
            sub = (sub - 1) & mask
        cost[mask] = np.min(best[None, :] + dist, axis=1)
    return int(cost[full].min()) + 1


# ------------------------------------------------------------ update support


@dataclass
class SupportResult:
    support: np.ndarray
    history_support: np.ndarray
    exact: bool


def _exact_support(graph: Graph, steps: Sequence[UpdateStep], outputs: np.ndarray,
                   q: int, cap: int) -> SupportResult:
    if len(steps) == 0:
        return SupportResult(outputs, outputs, True)
    infos = [StepComponents(graph, s) for s in steps]
    cls = _cluster_roots(infos, outputs)
    support, hist, exact = [], [], True
    for cluster, bottom in zip(cls.clusters, cls.bottoms):
        if len(bottom) == 0:
            continue
        hist.append(bottom)
        n_cfg = q ** len(bottom)
        if n_cfg > cap:
            support.append(bottom)
            exact = False
            continue
        table = np.empty((n_cfg, len(cluster)), dtype=np.int64)
        x = np.zeros(graph.n_vertices, dtype=np.int64)
        for i, digits in enumerate(itertools.product(range(q), repeat=len(bottom))):
            x[bottom] = digits
            y = x
            for s in steps:
                y = coupled_sw_step(graph, y, s)
            table[i] = y[cluster]
        table = table.reshape((q,) * len(bottom) + (len(cluster),))
        for j, v in enumerate(bottom):
            ref = np.take(table, [0], axis=j)
            if np.any(table != ref):
                support.append(np.array([v]))
    as_set = lambda parts: as_vertex_set(np.concatenate(parts)) if parts else np.empty(0, np.int64)
    return SupportResult(as_set(support), as_set(hist), exact)


def support_details(window, graph: Graph | None = None, q: int | None = None, cap: int = 1 << 14
                    ) -> SupportResult:
    """Exact update support plus the history bound H_V(0) it refines.

    H_V(0) always contains the support, but a vertex in it can be inert when
    candidate colours collide.  Each Red cluster's output depends only on its
    own H_C(0), so the support is found by enumerating x on H_C(0) per
    cluster; clusters with more than ``cap`` configurations fall back to
    H_C(0) and the result is flagged inexact.
    """
    if isinstance(window, BarrierWindow):
        parts, hist, exact = [], [], True
        for b in window.blocks:
            r = _exact_support(b.torus, b.steps, b.inner, window.params.q, cap)
            parts.append(b.vertex_map[r.support])
            hist.append(b.vertex_map[r.history_support])
            exact &= r.exact
        return SupportResult(as_vertex_set(np.concatenate(parts)), as_vertex_set(np.concatenate(hist)), exact)
    if isinstance(window, UpdateSequence):
        graph, q = window.graph, window.params.q
    if graph is None or q is None:
        raise ValueError("a plain list of steps needs its graph and q")
    return _exact_support(graph, list(window), np.arange(graph.n_vertices), q, cap)


def update_support(window, graph: Graph | None = None, q: int | None = None, cap: int = 1 << 14
                   ) -> np.ndarray:
    """Smallest vertex set whose initial colours determine the window's output.

    ``window`` is an :class:`UpdateSequence`, a :class:`BarrierWindow`, or a
    list of steps together with ``graph`` and ``q``.
    """
    return support_details(window, graph, q, cap).support


def history_support(graph: Graph, steps: Sequence[UpdateStep]) -> np.ndarray:
    """H_V(0): union of all histories at the bottom of the window."""
    infos = [StepComponents(graph, s) for s in steps]
    cur = np.arange(graph.n_vertices)
    for info in reversed(infos):
        _, cur = info.descend(cur)
    return cur


# ------------------------------------------------------------ sparsity


def is_sparse(delta, lattice: TorusLattice, max_components: int, max_diameter: int,
              min_separation: int) -> tuple[bool, list[np.ndarray]]:
    """Greedy check that delta splits into few small, well-separated groups.

    Vertices closer than ``min_separation`` must share a group, so the finest
    admissible partition is single linkage at that threshold.  Groups are then
    merged first-fit while the diameter allows, to meet ``max_components``.
    """
    if max_components < 1 or max_diameter < 0 or min_separation < 1:
        raise ValueError("sparse parameters must be positive")
    delta = as_vertex_set(delta)
    if len(delta) == 0:
        return True, []
    d = lattice.linf_distance_matrix(delta, delta)
    n = len(delta)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(d < min_separation)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    parts = [np.array(g) for g in groups.values()]
    diam = lambda idx: int(d[np.ix_(idx, idx)].max())
    if any(diam(g) > max_diameter for g in parts):
        return False, [delta[g] for g in parts]
    merged: list[np.ndarray] = []
    for g in sorted(parts, key=len, reverse=True):
        for k, m in enumerate(merged):
            cand = np.concatenate([m, g])
            if diam(cand) <= max_diameter:
                merged[k] = cand
                break
        else:
            merged.append(g)
    out = [np.sort(delta[g]) for g in merged]
    return len(out) <= max_components, out


def psi_bound(max_degree: int, p: float, t: int, steiner: int, theta: float, M: float = 1.0) -> float:
    """M (3eDp)^(t - 1/2) exp(-theta * steiner), the bound on red-set probabilities."""
    return M * (3 * math.e * max_degree * p) ** (t - 0.5) * math.exp(-theta * steiner)
