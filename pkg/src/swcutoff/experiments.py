"""Drivers for mixing, cutoff, propagation, sparsity and gap-scan experiments.

Every Monte Carlo driver draws replica ``r`` from keyed streams, so results
do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from swcutoff.dynamics import (BlockGeometry, barrier_window, coupled_edge_step, coupled_sw_step,
                               generate_updates, sample_update_step, sw_step)
from swcutoff.errors import SizingError
from swcutoff.infoperc import is_sparse, support_details
from swcutoff.lattice import Graph, TorusLattice, build_torus
from swcutoff.measures import ModelParams, components, decode_states, exact_potts_dist, l2_array
from swcutoff.rng import MISC, STARTS, step_stream, stream
from swcutoff.spectral import (GapMCConfig, GapReport, exact_sw_kernel, factored_gap, gamma_star,
                               spectral_gap, worst_tv_curve)
from swcutoff.stats import Estimate, binomial_estimate, mean_estimate

# ------------------------------------------------------------ coupling bounds


def dependent_vertices_curve(graph: Graph, params: ModelParams, t_max: int, seed: int = 0,
                             replica: int = 0) -> np.ndarray:
    """|S_t| for t = 0..t_max, where S_t contains every vertex whose colour may depend on X_0.

    S_0 = V and S_{t+1} is the union of the nonsingleton full-percolation
    components meeting S_t.  Vertices outside S_t carry the same colour for
    every start under the grand coupling, so |S_t| bounds the Hamming
    distance between any two coupled chains.
    """

    dep = np.ones(graph.n_vertices, dtype=bool)
    out = np.zeros(t_max + 1, dtype=np.int64)
    out[0] = graph.n_vertices
    for t in range(t_max):
        if not dep.any():
            break
        step = sample_update_step(graph, params, step_stream(seed, t, replica))
        k, comp = components(graph, step.percolation)
        size = np.bincount(comp, minlength=k)
        hit = np.zeros(k, dtype=bool)
        hit[comp[dep]] = True
        dep = hit[comp] & (size[comp] >= 2)
        out[t + 1] = dep.sum()
    return out


def tv_upper_via_coupling(graph: Graph, params: ModelParams, t_max: int, replicas: int,
                          seed: int = 0) -> list[tuple[int, Estimate]]:
    """Monte Carlo estimate of E[max_(x,y) hamming(X_t^x, X_t^y)] under the grand coupling.

    Uses the dependent-vertex count, which dominates the Hamming distance of
    every coupled pair of starts; its mean is therefore >= d(t).
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas")
    curves = np.array([dependent_vertices_curve(graph, params, t_max, seed, r) for r in range(replicas)],
                      dtype=float)
    return [(t, mean_estimate(curves[:, t])) for t in range(t_max + 1)]


def coupled_hamming_curve(graph: Graph, params: ModelParams, x0: np.ndarray, y0: np.ndarray, t_max: int,
                          replicas: int, seed: int = 0) -> list[tuple[int, Estimate]]:
    """E[hamming(X_t, Y_t)] for two given starts under shared updates."""
    ham = np.zeros((replicas, t_max + 1))
    for r in range(replicas):
        x, y = np.asarray(x0, np.int64), np.asarray(y0, np.int64)
        ham[r, 0] = np.count_nonzero(x != y)
        for t in range(t_max):
            step = sample_update_step(graph, params, step_stream(seed, t, r))
            x, y = coupled_sw_step(graph, x, step), coupled_sw_step(graph, y, step)
            ham[r, t + 1] = np.count_nonzero(x != y)
    return [(t, mean_estimate(ham[:, t])) for t in range(t_max + 1)]


def coupling_tv_bound(n_vertices: int, max_degree: int, p: float, t: int) -> float:
    """n (2eDp)^t."""
    return n_vertices * (2 * math.e * max_degree * p) ** t


def path_coupling_estimate(graph: Graph, params: ModelParams, replicas: int, seed: int = 0,
                           start: str = "monochromatic") -> Estimate:
    """E[hamming after one coupled step] for pairs at hamming distance 1.

    ``start="monochromatic"`` uses the all-0 configuration with one vertex
    recoloured; ``"uniform"`` draws the base configuration uniformly.  The
    recoloured vertex is chosen uniformly in each replica.
    """
    out = np.empty(replicas)
    for r in range(replicas):
        rng = stream(seed, STARTS, r)
        x = (np.zeros(graph.n_vertices, np.int64) if start == "monochromatic"
             else rng.integers(0, params.q, graph.n_vertices))
        v = rng.integers(graph.n_vertices)
        y = x.copy()
        y[v] = (x[v] + rng.integers(1, params.q)) % params.q
        step = sample_update_step(graph, params, step_stream(seed, 0, r))
        out[r] = np.count_nonzero(coupled_sw_step(graph, x, step) != coupled_sw_step(graph, y, step))
    return mean_estimate(out)


# ------------------------------------------------------------ TV estimation


STATISTICS = ("mono_edges", "color_hist")


def statistic_codes(graph: Graph, sigmas: np.ndarray, q: int, statistics=("mono_edges",)) -> np.ndarray:
    """Integer code of the joint summary statistic for each configuration (row)."""
    sigmas = np.atleast_2d(sigmas)
    code = np.zeros(len(sigmas), dtype=np.int64)
    for name in statistics:
        if name == "mono_edges":
            val, base = (sigmas[:, graph.eu] == sigmas[:, graph.ev]).sum(axis=1), graph.n_edges + 1
        elif name == "color_hist":
            val, base = np.zeros(len(sigmas), np.int64), 1
            for c in range(q):
                val = val * (graph.n_vertices + 1) + (sigmas == c).sum(axis=1)
                base *= graph.n_vertices + 1
        else:
            raise ValueError(f"unknown statistic {name!r}; choose from {STATISTICS}")
        code = code * base + val
    return code


def _empirical_tv(a: np.ndarray, b: np.ndarray) -> float:
    cats, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
    pa = np.bincount(inv[: len(a)], minlength=len(cats)) / len(a)
    pb = np.bincount(inv[len(a):], minlength=len(cats)) / len(b)
    return 0.5 * float(np.abs(pa - pb).sum())


@dataclass(frozen=True)
class ProjStatConfig:
    """Settings for statistic-projected TV estimates."""

    samples: int = 20000
    reference_samples: int = 20000
    statistics: tuple = ("mono_edges",)
    start: str = "monochromatic"
    overshoot: int = 20
    min_burn: int = 5
    bootstrap: int = 100
    seed: int = 0
    min_reference: int = 100


def start_config(graph: Graph, q: int, start: str, rng: np.random.Generator | None = None) -> np.ndarray:
    if start in ("monochromatic", "ones"):
        return np.full(graph.n_vertices, 1 if start == "ones" else 0, np.int64)
    if start == "zeros":
        return np.zeros(graph.n_vertices, np.int64)
    if start == "alternating":
        return np.arange(graph.n_vertices, dtype=np.int64) % q
    if start == "random":
        return rng.integers(0, q, graph.n_vertices)
    raise ValueError(f"unknown start {start!r}")


def predicted_mixing_steps(graph: Graph, params: ModelParams) -> int:
    """Steps after which n(2eDp)^t <= 1/4, or ``None`` when 2eDp >= 1."""
    a = 2 * math.e * graph.max_degree * params.p
    if a >= 1:
        return None
    if a == 0:
        return 1
    return max(1, math.ceil(math.log(4 * graph.n_vertices) / math.log(1 / a)))


def reference_samples(graph: Graph, params: ModelParams, config: ProjStatConfig) -> tuple[np.ndarray, int]:
    """Approximately stationary configurations: random starts run for overshoot x predicted t_mix."""
    if config.reference_samples < config.min_reference:
        raise ValueError(f"need at least {config.min_reference} reference samples")
    t_pred = predicted_mixing_steps(graph, params)
    burn = max(config.min_burn, config.overshoot * (t_pred if t_pred else config.min_burn))
    rng = stream(config.seed, MISC, 1)
    x = rng.integers(0, params.q, (config.reference_samples, graph.n_vertices))
    for _ in range(burn):
        x = sw_step(graph, x, params, rng)
    return x, burn


def tv_curve_projected(graph: Graph, params: ModelParams, t_max: int, config: ProjStatConfig
                       ) -> tuple[list[Estimate], dict]:
    """Statistic-projected TV distance from the configured start, t = 0..t_max."""
    ref, burn = reference_samples(graph, params, config)
    ref_codes = statistic_codes(graph, ref, params.q, config.statistics)
    rng = stream(config.seed, MISC, 2)
    x0 = start_config(graph, params.q, config.start, rng)
    x = np.tile(x0, (config.samples, 1))
    boot_rng = stream(config.seed, MISC, 3)
    out = []
    for t in range(t_max + 1):
        codes = statistic_codes(graph, x, params.q, config.statistics)
        value = _empirical_tv(codes, ref_codes)
        boots = [_empirical_tv(codes[boot_rng.integers(0, len(codes), len(codes))],
                               ref_codes[boot_rng.integers(0, len(ref_codes), len(ref_codes))])
                 for _ in range(config.bootstrap)]
        se = float(np.std(boots)) if boots else 0.0
        out.append(Estimate(value, se, max(0.0, value - 3 * se), min(1.0, value + 3 * se), config.samples))
        if t < t_max:
            x = sw_step(graph, x, params, rng)
    return out, {"reference_burn": burn, "overshoot": config.overshoot}


def exact_statistic_law(graph: Graph, params: ModelParams, statistics=("mono_edges",)
                        ) -> dict[int, float]:
    """Law of the statistic under pi by enumeration."""
    pi = exact_potts_dist(graph, params).probs
    codes = statistic_codes(graph, decode_states(np.arange(len(pi)), graph.n_vertices, params.q),
                            params.q, statistics)
    law: dict[int, float] = {}
    for c, w in zip(codes.tolist(), pi):
        law[c] = law.get(c, 0.0) + float(w)
    return law


def tv_estimate(graph: Graph, params: ModelParams, t: int, method: str = "exact",
                config: ProjStatConfig = ProjStatConfig()) -> Estimate:
    """Worst-case TV d(t) exactly, or a statistic-projected lower estimate from one start."""
    if method == "exact":
        d = float(worst_tv_curve(exact_sw_kernel(graph, params), t)[t])
        return Estimate(d, 0.0, d, d, 0)
    if method == "proj-stat":
        return tv_curve_projected(graph, params, t, config)[0][t]
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ projected L2 curves


def mt_curve(graph: Graph, params: ModelParams, window, t_max: int) -> np.ndarray:
    """max_x || law of X_t restricted to the window - pi restricted ||_{L^2}, exactly."""
    window = np.unique(np.asarray(window, dtype=np.int64))
    k = exact_sw_kernel(graph, params)
    states = decode_states(np.arange(k.n_states), graph.n_vertices, params.q)
    sub = states[:, window] @ (params.q ** np.arange(len(window) - 1, -1, -1))
    proj = np.zeros((k.n_states, params.q ** len(window)))
    proj[np.arange(k.n_states), sub] = 1.0
    pi_w = k.stationary @ proj
    out = []
    M = proj.copy()
    for _ in range(t_max + 1):
        out.append(max(l2_array(row, pi_w) for row in M))
        M = k.matrix @ M
    return np.array(out)


# ------------------------------------------------------------ cutoff


@dataclass
class MixingProfile:
    n: int
    tv: list[Estimate]
    t_mix: dict[float, int | None]
    midpoint: float | None
    predicted: float
    gamma_star: float
    meta: dict = field(default_factory=dict)


@dataclass
class CutoffScan:
    profiles: list[MixingProfile]
    ratios: dict[int, dict[float, float | None]]
    gamma_star: float
    slope: float | None
    predicted_slope: float
    flags: list[str]


def mixing_times(tv: list[float], eps_list) -> dict[float, int | None]:
    """First integer t with TV(t) <= eps; ``None`` if the curve never gets there."""
    out = {}
    for eps in eps_list:
        hit = [t for t, v in enumerate(tv) if v <= eps]
        out[eps] = hit[0] if hit else None
    return out


def crossing_time(tv: list[float], level: float = 0.5) -> float | None:
    """Linearly interpolated first time the curve falls to ``level``."""
    if not tv:
        return None
    if tv[0] <= level:
        return 0.0
    for t in range(1, len(tv)):
        if tv[t] <= level:
            return (t - 1) + (tv[t - 1] - level) / (tv[t - 1] - tv[t])
    return None


@dataclass(frozen=True)
class CutoffConfig:
    dim: int = 1
    t_max: int = 12
    gap_side: int = 8
    eps: tuple = (0.25, 0.75)
    proj: ProjStatConfig = ProjStatConfig()


def cutoff_scan(n_grid, params: ModelParams, config: CutoffConfig = CutoffConfig()) -> CutoffScan:
    """TV profiles along a grid of sides, compared with (dim/2) log n / gamma_star(r)."""
    grid = list(n_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n-grid must be strictly increasing")
    gref = factored_gap(build_torus(config.dim, config.gap_side), params)
    gs = gref.gamma_star
    eps_all = sorted(set(config.eps) | {1 - e for e in config.eps})
    profiles, flags = [], []
    for n in grid:
        lat = build_torus(config.dim, n)
        tv, meta = tv_curve_projected(lat, params, config.t_max, config.proj)
        vals = [e.value for e in tv]
        tm = mixing_times(vals, eps_all)
        mid = crossing_time(vals, 0.5)
        if any(v is None for v in tm.values()) or mid is None:
            flags.append(f"n={n}: curve does not cross every level within t_max={config.t_max}")
        profiles.append(MixingProfile(n, tv, tm, mid, (config.dim / 2) * math.log(n) / gs, gs, meta))
    ratios = {}
    for prof in profiles:
        ratios[prof.n] = {}
        for e in config.eps:
            if e < 0.5:
                a, b = prof.t_mix.get(e), prof.t_mix.get(1 - e)
                ratios[prof.n][e] = (a / b) if (a is not None and b) else None
    slope = None
    if len(profiles) >= 2 and profiles[-1].midpoint is not None and profiles[-2].midpoint is not None:
        slope = ((profiles[-1].midpoint - profiles[-2].midpoint)
                 / (math.log(profiles[-1].n) - math.log(profiles[-2].n)))
    return CutoffScan(profiles, ratios, gs, slope, (config.dim / 2) / gs, flags)


# ------------------------------------------------------------ propagation and sparsity


def propagation_test(lattice: TorusLattice, params: ModelParams, center: int, radius: int, halo: int,
                     t_max: int, replicas: int, seed: int = 0) -> Estimate:
    """P(chains agreeing on the padded box at t=0 agree on the box up to t_max)."""
    if halo < 1:
        raise ValueError("halo must be >= 1")
    B = lattice.box(center, radius)
    Bp = lattice.box(center, radius + halo)
    hits = 0
    for r in range(replicas):
        rng = stream(seed, STARTS, r)
        x = rng.integers(0, params.q, lattice.n_vertices)
        y = rng.integers(0, params.q, lattice.n_vertices)
        y[Bp] = x[Bp]
        ok = True
        for t in range(t_max):
            step = sample_update_step(lattice, params, step_stream(seed, t, r))
            x, y = coupled_sw_step(lattice, x, step), coupled_sw_step(lattice, y, step)
            if np.any(x[B] != y[B]):
                ok = False
                break
        hits += ok
    return binomial_estimate(hits, replicas)


@dataclass(frozen=True)
class SparseParams:
    max_components: int
    max_diameter: int
    min_separation: int

    @classmethod
    def scaled(cls, lattice: TorusLattice, components_frac: float = 0.25, diameter_frac: float = 0.25,
               separation_frac: float = 0.125) -> "SparseParams":
        """Desk-scale defaults expressed as fractions of the side."""
        n = max(lattice.shape)
        return cls(max(1, int(components_frac * n) ** lattice.dim), max(0, int(diameter_frac * n)),
                   max(1, int(separation_frac * n)))


def support_sparsity_test(lattice: TorusLattice, params: ModelParams, s: int, sparse: SparseParams,
                          geometry: BlockGeometry, replicas: int, seed: int = 0) -> dict:
    """Fraction of barrier windows of length s whose update support is sparse."""
    if s < 1:
        raise ValueError("s must be >= 1")
    sparse_hits, sizes, exact = 0, [], 0
    for r in range(replicas):
        ups = generate_updates(lattice, params, seed, s, replica=r)
        window = barrier_window(lattice, ups.steps, geometry, params, seed, replica=r)
        res = support_details(window)
        ok, _ = is_sparse(res.support, lattice, sparse.max_components, sparse.max_diameter,
                          sparse.min_separation)
        sparse_hits += ok
        sizes.append(len(res.support) / lattice.n_vertices)
        exact += res.exact
    return {"fraction_sparse": binomial_estimate(sparse_hits, replicas),
            "mean_support_fraction": mean_estimate(np.array(sizes)),
            "exact_fraction": exact / replicas}


# ------------------------------------------------------------ gap scans


def gap_report(lattice: Graph, params: ModelParams, method: str = "auto",
               mc_config: GapMCConfig = GapMCConfig()) -> GapReport:
    """Exact gap when the factors fit in memory, Monte Carlo otherwise (or when forced)."""
    from swcutoff.spectral import gap_mc_estimate
    if method in ("auto", "exact"):
        try:
            return factored_gap(lattice, params)
        except SizingError:
            if method == "exact":
                raise
    return gap_mc_estimate(lattice, params, mc_config)


def gap_convergence_scan(r_grid, params: ModelParams, dim: int = 1, method: str = "mc",
                         mc_config: GapMCConfig = GapMCConfig()) -> tuple[list[tuple[int, GapReport]], list[float]]:
    """gamma(r) along the grid and the successive differences |gamma(r_{i+1}) - gamma(r_i)|."""
    reports = [(r, gap_report(build_torus(dim, r), params, method, mc_config)) for r in r_grid]
    diffs = [abs(b.gamma - a.gamma) for (_, a), (_, b) in zip(reports, reports[1:])]
    return reports, diffs


def edge_coupling_persistence(graph: Graph, params: ModelParams, t_max: int, replicas: int,
                              seed: int = 0, edge: int = 0) -> list[tuple[int, Estimate, Estimate | None]]:
    """Edge chains from all-open and all-closed under shared updates.

    Tracks D_t = {edge open in the first chain, endpoints not joined in the
    second}.  Returns (t, P(D_t), P(D_{t+1} | D_t)); the ratio is ``None``
    when D_t never occurred.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas")
    u, v = graph.edges[edge]
    events = np.zeros((replicas, t_max + 1), dtype=bool)

    for r in range(replicas):
        w1 = np.ones(graph.n_edges, bool)
        w0 = np.zeros(graph.n_edges, bool)
        for t in range(t_max + 1):
            _, comp = components(graph, w0)
            events[r, t] = w1[edge] and comp[u] != comp[v]
            if t == t_max:
                break
            step = sample_update_step(graph, params, step_stream(seed, t, r))
            w1, w0 = coupled_edge_step(graph, w1, step), coupled_edge_step(graph, w0, step)
    out = []
    for t in range(t_max + 1):
        est = binomial_estimate(int(events[:, t].sum()), replicas)
        ratio = None
        if t < t_max and events[:, t].sum() > 0:
            ratio = binomial_estimate(int((events[:, t] & events[:, t + 1]).sum()), int(events[:, t].sum()))
        out.append((t, est, ratio))
    return out
