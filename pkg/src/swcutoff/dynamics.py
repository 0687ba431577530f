"""Swendsen-Wang steps, update sequences, the grand coupling and barrier dynamics."""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from swcutoff import _fast
from swcutoff.errors import GeometryError
from swcutoff.lattice import Graph, TorusLattice, graph_from_descriptor
from swcutoff.measures import ModelParams, components
from swcutoff.rng import FRESH, step_stream, stream

# ------------------------------------------------------------ update steps


@dataclass(eq=False)
class UpdateStep:
    """Randomness of one step of the grand coupling.

    ``percolation`` holds a Bernoulli(p) bit for every edge of the graph and
    ``colors`` a uniform candidate colour per vertex.  ``labels`` ranks the
    vertices inside each percolation component (1..|K|); ``None`` means the
    default ranking by ascending vertex index.
    """

    percolation: np.ndarray
    colors: np.ndarray
    labels: np.ndarray | None = None

    def label_array(self, graph: Graph) -> np.ndarray:
        if self.labels is not None:
            return self.labels
        _, comp = components(graph, self.percolation)
        return index_order_labels(comp)

    def same_as(self, other: "UpdateStep", graph: Graph) -> bool:
        return (np.array_equal(self.percolation, other.percolation)
                and np.array_equal(self.colors, other.colors)
                and np.array_equal(self.label_array(graph), other.label_array(graph)))


def index_order_labels(comp: np.ndarray) -> np.ndarray:
    """Rank of each vertex inside its component, by ascending vertex index (1-based)."""
    comp = np.asarray(comp)
    order = np.argsort(comp, kind="stable")
    sorted_comp = comp[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_comp)) + 1]
    ranks = np.arange(len(comp)) - np.repeat(starts, np.diff(np.r_[starts, len(comp)]))
    out = np.empty(len(comp), dtype=np.int64)
    out[order] = ranks + 1
    return out


def sample_update_step(graph: Graph, params: ModelParams, rng: np.random.Generator) -> UpdateStep:
    """Edge bits first (canonical edge order), then vertex colours (vertex order)."""
    perc = rng.random(graph.n_edges) < params.p
    colors = rng.integers(0, params.q, graph.n_vertices)
    return UpdateStep(perc, colors)


@dataclass
class UpdateSequence:
    """Steps 0..t*-1 of one replica, replayable from ``(seed, replica)``."""

    steps: list[UpdateStep]
    seed: int
    params: ModelParams
    graph: Graph
    replica: int = 0

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, t: int) -> UpdateStep:
        return self.steps[t]

    def to_bytes(self) -> bytes:
        meta = json.dumps({"seed": int(self.seed), "replica": int(self.replica), "q": self.params.q,
                           "p": self.params.p, "beta": self.params.beta,
                           "graph": self.graph.descriptor()}).encode()
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<II", len(meta), len(self.steps)))
        buf.write(meta)
        for s in self.steps:
            has = s.labels is not None
            buf.write(struct.pack("<B", int(has)))
            buf.write(np.packbits(s.percolation.astype(np.uint8)).tobytes())
            buf.write(s.colors.astype("<u2").tobytes())
            if has:
                buf.write(s.labels.astype("<u4").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "UpdateSequence":
        if data[:len(_MAGIC)] != _MAGIC:
            raise ValueError("not an update-sequence record")
        pos = len(_MAGIC)
        meta_len, n_steps = struct.unpack_from("<II", data, pos)
        pos += 8
        meta = json.loads(data[pos:pos + meta_len])
        pos += meta_len
        graph = graph_from_descriptor(meta["graph"])
        params = ModelParams(meta["q"], float(meta["beta"]), float(meta["p"]))
        n_e, n_v = graph.n_edges, graph.n_vertices
        n_bits = (n_e + 7) // 8
        steps = []
        for _ in range(n_steps):
            has = data[pos]
            pos += 1
            perc = np.unpackbits(np.frombuffer(data, np.uint8, n_bits, pos))[:n_e].astype(bool)
            pos += n_bits
            colors = np.frombuffer(data, "<u2", n_v, pos).astype(np.int64)
            pos += 2 * n_v
            labels = None
            if has:
                labels = np.frombuffer(data, "<u4", n_v, pos).astype(np.int64)
                pos += 4 * n_v
            steps.append(UpdateStep(perc, colors, labels))
        return cls(steps, meta["seed"], params, graph, meta["replica"])

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "UpdateSequence":
        return cls.from_bytes(Path(path).read_bytes())


_MAGIC = b"SWUSEQ1\x00"


def generate_updates(graph: Graph, params: ModelParams, seed: int, t_star: int,
                     replica: int = 0) -> UpdateSequence:
    steps = [sample_update_step(graph, params, step_stream(seed, t, replica)) for t in range(t_star)]
    return UpdateSequence(steps, seed, params, graph, replica)


# ------------------------------------------------------------ SW steps


def sw_step(graph: Graph, sigma: np.ndarray, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """One Swendsen-Wang step; ``sigma`` may be one configuration or a batch (rows)."""
    sig = np.atleast_2d(np.asarray(sigma, dtype=np.int64))
    reps = sig.shape[0]
    u = rng.random((reps, graph.n_edges))
    new_colors = rng.integers(0, params.q, (reps, graph.n_vertices))
    out = _fast.sw_sweep_batch(sig, graph.eu, graph.ev, u, params.p, new_colors)
    return out[0] if np.ndim(sigma) == 1 else out


def edge_sw_step(graph: Graph, omega: np.ndarray, params: ModelParams,
                 rng: np.random.Generator) -> np.ndarray:
    """Recolour the components of omega, then re-percolate monochromatic edges."""
    om = np.atleast_2d(np.asarray(omega, dtype=np.bool_))
    reps = om.shape[0]
    new_colors = rng.integers(0, params.q, (reps, graph.n_vertices))
    u = rng.random((reps, graph.n_edges))
    out = _fast.edge_sweep_batch(om, graph.eu, graph.ev, u, params.p, new_colors)
    return out[0] if np.ndim(omega) == 1 else out


def coupled_sw_step(graph: Graph, sigma: np.ndarray, step: UpdateStep) -> np.ndarray:
    """Grand-coupling step: deterministic in (sigma, step).

    omega = step percolation restricted to monochromatic edges of sigma; every
    omega-component takes the candidate colour of its lowest-labelled vertex.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    if step.labels is None:
        return _fast.coupled_step_min_vertex(sigma, graph.eu, graph.ev, step.percolation, step.colors)
    mask = step.percolation & (sigma[graph.eu] == sigma[graph.ev])
    _, comp = components(graph, mask)
    order = np.lexsort((step.labels, comp))
    first = order[np.r_[0, np.flatnonzero(np.diff(comp[order])) + 1]]
    return step.colors[first][comp]


def coupled_edge_step(graph: Graph, omega: np.ndarray, step: UpdateStep) -> np.ndarray:
    """Edge-chain version of the grand coupling (recolour, then re-percolate)."""
    omega = np.asarray(omega, dtype=np.bool_)
    _, comp = components(graph, omega)
    labels = step.label_array(graph)
    order = np.lexsort((labels, comp))
    first = order[np.r_[0, np.flatnonzero(np.diff(comp[order])) + 1]]
    sigma = step.colors[first][comp]
    return step.percolation & (sigma[graph.eu] == sigma[graph.ev])


def hamming(sigma: np.ndarray, sigma_prime: np.ndarray) -> int:
    a, b = np.asarray(sigma), np.asarray(sigma_prime)
    if a.shape != b.shape:
        raise ValueError("configurations have different lengths")
    return int(np.count_nonzero(a != b))


# ------------------------------------------------------------ trajectories


_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


def config_to_string(sigma: np.ndarray) -> str:
    return "".join(_DIGITS[int(c)] for c in sigma)


@dataclass
class Trajectory:
    """Configurations X_0..X_T of one chain (row t is X_t)."""

    configs: np.ndarray

    @property
    def start(self) -> np.ndarray:
        return self.configs[0]

    @property
    def n_steps(self) -> int:
        return len(self.configs) - 1

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "configuration"])
            for t, c in enumerate(self.configs):
                w.writerow([t, config_to_string(c)])


def run_coupled(graph: Graph, sigma: np.ndarray, updates: Sequence[UpdateStep]) -> Trajectory:
    configs = [np.asarray(sigma, dtype=np.int64)]
    for step in updates:
        configs.append(coupled_sw_step(graph, configs[-1], step))
    return Trajectory(np.array(configs))


def run_coupled_pair(graph: Graph, sigma_a: np.ndarray, sigma_b: np.ndarray,
                     updates: Sequence[UpdateStep]) -> tuple[Trajectory, Trajectory, int | None]:
    """Drive two chains with the same updates; also return the first meeting time."""
    ta = run_coupled(graph, sigma_a, updates)
    tb = run_coupled(graph, sigma_b, updates)
    equal = np.all(ta.configs == tb.configs, axis=1)
    hit = np.flatnonzero(equal)
    return ta, tb, (int(hit[0]) if len(hit) else None)


# ------------------------------------------------------------ induced updates


def induced_update(step: UpdateStep, source: Graph, target: Graph, vertex_map: np.ndarray,
                   params: ModelParams, rng: np.random.Generator) -> UpdateStep:
    """Transport ``step`` from ``source`` to ``target`` through ``vertex_map``.

    ``vertex_map[a]`` is the source vertex identified with target vertex ``a``.
    Target edges whose image is a source edge copy its bit; the others get a
    fresh Bernoulli(p) bit.  Target components that coincide with a source
    component keep colours and labels; the others get fresh colours and
    index-order labels.
    """
    phi = np.asarray(vertex_map, dtype=np.int64)
    if phi.shape != (target.n_vertices,):
        raise ValueError("vertex map must have one entry per target vertex")
    if phi.min() < 0 or phi.max() >= source.n_vertices or len(np.unique(phi)) != len(phi):
        raise ValueError("vertex map must be an injection into the source vertices")

    su, sv = phi[target.eu], phi[target.ev]
    lookup = source._edge_lookup
    src_idx = np.array([lookup.get((min(a, b), max(a, b)), -1) for a, b in zip(su.tolist(), sv.tolist())],
                       dtype=np.int64)
    shared = src_idx >= 0
    fresh_bits = rng.random(target.n_edges) < params.p
    fresh_colors = rng.integers(0, params.q, target.n_vertices)
    perc = np.where(shared, step.percolation[np.maximum(src_idx, 0)], fresh_bits)

    k_t, comp_t = components(target, perc)
    k_s, comp_s = components(source, step.percolation)
    size_t = np.bincount(comp_t, minlength=k_t)
    size_s = np.bincount(comp_s, minlength=k_s)
    image = comp_s[phi]
    lo = np.full(k_t, np.iinfo(np.int64).max)
    hi = np.full(k_t, -1)
    np.minimum.at(lo, comp_t, image)
    np.maximum.at(hi, comp_t, image)
    keep = (lo == hi) & (size_s[np.minimum(lo, k_s - 1)] == size_t)
    keep_v = keep[comp_t]

    src_labels = step.label_array(source)
    colors = np.where(keep_v, step.colors[phi], fresh_colors)
    labels = np.where(keep_v, src_labels[phi], index_order_labels(comp_t))
    return UpdateStep(perc, colors, labels)


# ------------------------------------------------------------ barrier dynamics


@dataclass(frozen=True)
class BlockGeometry:
    """Blocks of side ``block_side`` (or one less), padded by ``halo_width``."""

    block_side: int
    halo_width: int

    def __post_init__(self):
        if self.block_side < 1:
            raise GeometryError("block_side must be >= 1")
        if self.halo_width < 0:
            raise GeometryError("halo_width must be >= 0")


@dataclass
class Block:
    """One block B_i with its padded periodic copy C_i^+."""

    vertices: np.ndarray          # B_i, source ids
    torus: TorusLattice           # C_i^+
    vertex_map: np.ndarray        # C_i^+ vertex -> source vertex
    inner: np.ndarray             # C_i^+ vertices that form C_i
    steps: list[UpdateStep] = field(default_factory=list)


def partition_blocks(lattice: TorusLattice, geometry: BlockGeometry) -> list[Block]:
    n_axes = []
    for s in lattice.shape:
        n_blocks = -(-s // geometry.block_side)
        n_axes.append(np.array_split(np.arange(s), n_blocks))
    h = geometry.halo_width
    blocks = []
    for pieces in np.ndindex(*[len(a) for a in n_axes]):
        intervals = [n_axes[k][i] for k, i in enumerate(pieces)]
        shape = []
        for iv, s in zip(intervals, lattice.shape):
            if len(iv) + 2 * h > s:
                raise GeometryError(f"block of side {len(iv)} with halo {h} wraps around a side of {s}")
            shape.append(len(iv) + 2 * h)
        if min(shape) < 2:
            raise GeometryError("padded blocks need side >= 2")
        torus = TorusLattice(shape)
        start = np.array([iv[0] for iv in intervals]) - h
        phi = np.array([lattice.index(start + c) for c in torus.all_coords], dtype=np.int64)
        inside = np.all((torus.all_coords >= h) & (torus.all_coords < np.array(shape) - h), axis=1)
        inner = np.flatnonzero(inside)
        blocks.append(Block(np.sort(phi[inner]), torus, phi, inner))
    return blocks


@dataclass
class BarrierWindow:
    """Blocks with their induced update sequences for a window of ``len(steps)`` steps."""

    lattice: TorusLattice
    blocks: list[Block]
    n_steps: int
    params: ModelParams


def barrier_window(lattice: TorusLattice, updates: Sequence[UpdateStep], geometry: BlockGeometry,
                   params: ModelParams, seed: int, replica: int = 0) -> BarrierWindow:
    """Induced updates on every padded block; fresh bits come from keyed streams."""
    blocks = partition_blocks(lattice, geometry)
    for i, b in enumerate(blocks):
        for t, step in enumerate(updates):
            rng = stream(seed, FRESH + i, replica, t)
            b.steps.append(induced_update(step, lattice, b.torus, b.vertex_map, params, rng))
    return BarrierWindow(lattice, blocks, len(updates), params)


def barrier_run(window: BarrierWindow, sigma: np.ndarray) -> np.ndarray:
    """Barrier-dynamics configurations G_0(x), ..., G_T(x) pulled back to the lattice."""
    sigma = np.asarray(sigma, dtype=np.int64)
    out = np.empty((window.n_steps + 1, len(sigma)), dtype=np.int64)
    out[0] = sigma
    for b in window.blocks:
        x = sigma[b.vertex_map]
        for t, step in enumerate(b.steps):
            x = coupled_sw_step(b.torus, x, step)
            out[t + 1, b.vertex_map[b.inner]] = x[b.inner]
    return out


def barrier_step(lattice: TorusLattice, sigma: np.ndarray, step: UpdateStep, geometry: BlockGeometry,
                 params: ModelParams, seed: int = 0) -> np.ndarray:
    """Barrier-dynamics operator applied once."""
    window = barrier_window(lattice, [step], geometry, params, seed)
    return barrier_run(window, sigma)[1]
