"""Potts, random-cluster and Edwards-Sokal weights, exact laws, and distances.

Colours are stored 0-based (``0..q-1``).  Configurations of a graph with V
vertices are enumerated lexicographically with vertex 0 most significant, so
state index ``s`` has colour ``(s // q**(V-1-v)) % q`` at vertex ``v``.  Bond
configurations are enumerated the same way over the canonical edge list
(edge 0 is the most significant bit).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from swcutoff import _fast
from swcutoff.errors import SizingError
from swcutoff.lattice import Graph

DEFAULT_STATE_CAP = 1 << 24
_CHUNK = 1 << 18


@dataclass(frozen=True)
class ModelParams:
    """Potts parameters; build with :meth:`from_p` or :meth:`from_beta`.

    ``p = 1 - exp(-beta)``.  ``p = 1`` (``beta = inf``) is allowed as a
    degenerate value for the dynamics.
    """

    q: int
    beta: float
    p: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative (ferromagnetic model)")
        if self.p < 1.0 and not math.isclose(-math.expm1(-self.beta), self.p, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError(f"inconsistent p={self.p} and beta={self.beta}")

    @classmethod
    def from_p(cls, q: int, p: float) -> "ModelParams":
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        beta = math.inf if p == 1.0 else -math.log1p(-p)
        return cls(int(q), beta, float(p))

    @classmethod
    def from_beta(cls, q: int, beta: float) -> "ModelParams":
        return cls(int(q), float(beta), float(-math.expm1(-beta)))


@dataclass
class FiniteDist:
    """Probability vector indexed by enumerated state; ``space`` tags the state space."""

    probs: np.ndarray
    space: str = ""
    tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1:
            raise ValueError("probabilities must be a 1-d array")
        if np.any(self.probs < 0):
            raise ValueError("negative probability")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > max(self.tol, 1e-15 * len(self.probs)):
            raise ValueError(f"probabilities sum to {total!r}, not 1")

    def __len__(self) -> int:
        return len(self.probs)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state_index", "probability"])
            for i, pr in enumerate(self.probs):
                w.writerow([i, repr(float(pr))])

    @classmethod
    def from_csv(cls, path: str | Path, space: str = "") -> "FiniteDist":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        probs = np.zeros(len(rows))
        for r in rows:
            probs[int(r["state_index"])] = float(r["probability"])
        return cls(probs, space)


def potts_space(graph: Graph, q: int) -> str:
    return f"potts:V={graph.n_vertices}:q={q}"


def bond_space(graph: Graph) -> str:
    return f"bonds:E={graph.n_edges}"


# ---------------------------------------------------------------- weights


def mono_edges(graph: Graph, sigma: np.ndarray) -> np.ndarray:
    """Indices of monochromatic edges."""
    sigma = np.asarray(sigma)
    return np.flatnonzero(sigma[graph.eu] == sigma[graph.ev])


def potts_weight(graph: Graph, sigma: np.ndarray, params: ModelParams) -> float:
    return math.exp(params.beta * len(mono_edges(graph, sigma)))


def components(graph: Graph, omega: np.ndarray) -> tuple[int, np.ndarray]:
    """Component count and per-vertex component id (ids ordered by minimum vertex)."""
    omega = np.asarray(omega, dtype=np.bool_)
    if omega.shape != (graph.n_edges,):
        raise ValueError("bond configuration has the wrong length")
    k, labels = _fast.component_labels(graph.n_vertices, graph.eu, graph.ev, omega)
    return int(k), labels


def rc_weight(graph: Graph, omega: np.ndarray, params: ModelParams) -> float:
    omega = np.asarray(omega, dtype=np.bool_)
    k, _ = components(graph, omega)
    n_open = int(omega.sum())
    return params.p ** n_open * (1 - params.p) ** (graph.n_edges - n_open) * params.q ** k


def es_weight(graph: Graph, sigma: np.ndarray, omega: np.ndarray, params: ModelParams) -> float:
    omega = np.asarray(omega, dtype=np.bool_)
    sigma = np.asarray(sigma)
    if np.any(omega & (sigma[graph.eu] != sigma[graph.ev])):
        return 0.0
    n_open = int(omega.sum())
    return params.p ** n_open * (1 - params.p) ** (graph.n_edges - n_open)


# ------------------------------------------------------------ enumeration


def check_state_cap(n_states: int, cap: int = DEFAULT_STATE_CAP) -> None:
    if n_states > cap:
        raise SizingError(f"{n_states} states exceed the enumeration cap {cap}")


def decode_states(indices: np.ndarray, n_vertices: int, q: int) -> np.ndarray:
    """Colour arrays (rows) for the given state indices."""
    idx = np.asarray(indices, dtype=np.int64)[:, None]
    powers = q ** np.arange(n_vertices - 1, -1, -1, dtype=np.int64)
    return ((idx // powers) % q).astype(np.int64)


def encode_states(sigmas: np.ndarray, q: int) -> np.ndarray:
    sigmas = np.atleast_2d(np.asarray(sigmas, dtype=np.int64))
    powers = q ** np.arange(sigmas.shape[1] - 1, -1, -1, dtype=np.int64)
    return sigmas @ powers


def decode_bonds(indices: np.ndarray, n_edges: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)[:, None]
    shifts = np.arange(n_edges - 1, -1, -1, dtype=np.int64)
    return ((idx >> shifts) & 1).astype(np.bool_)


def encode_bonds(omegas: np.ndarray) -> np.ndarray:
    omegas = np.atleast_2d(np.asarray(omegas, dtype=np.int64))
    shifts = np.arange(omegas.shape[1] - 1, -1, -1, dtype=np.int64)
    return (omegas << shifts).sum(axis=1)


def mono_counts(graph: Graph, q: int, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """|E_m(sigma)| for every enumerated configuration."""
    n_states = q ** graph.n_vertices
    check_state_cap(n_states, cap)
    out = np.empty(n_states, dtype=np.int64)
    for start in range(0, n_states, _CHUNK):
        stop = min(n_states, start + _CHUNK)
        s = decode_states(np.arange(start, stop), graph.n_vertices, q)
        out[start:stop] = (s[:, graph.eu] == s[:, graph.ev]).sum(axis=1)
    return out


def exact_potts_dist(graph: Graph, params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> FiniteDist:
    """Potts measure over all q^V configurations."""
    counts = mono_counts(graph, params.q, cap)
    w = np.exp(params.beta * (counts - graph.n_edges))
    return FiniteDist(w / np.sum(w), potts_space(graph, params.q))


def bond_stats(graph: Graph, cap: int = 1 << 20) -> tuple[np.ndarray, np.ndarray]:
    """(open-edge count, component count) for every enumerated bond configuration."""
    n_bonds = 1 << graph.n_edges
    if n_bonds > cap:
        raise SizingError(f"2^{graph.n_edges} bond configurations exceed the cap {cap}")
    omegas = decode_bonds(np.arange(n_bonds), graph.n_edges)
    counts, _ = _fast.component_labels_batch(graph.n_vertices, graph.eu, graph.ev, omegas)
    return omegas.sum(axis=1), counts


def exact_rc_dist(graph: Graph, params: ModelParams, cap: int = 1 << 20) -> FiniteDist:
    """Random-cluster measure over all 2^E bond configurations."""
    n_open, k = bond_stats(graph, cap)
    p, q = params.p, params.q
    n_closed = graph.n_edges - n_open
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = (np.where(n_open > 0, n_open * np.log(p), 0.0)
                + np.where(n_closed > 0, n_closed * np.log1p(-p), 0.0) + k * math.log(q))
    w = np.exp(logw - logw.max())
    return FiniteDist(w / np.sum(w), bond_space(graph))


# -------------------------------------------------------------- distances


def _check_same_space(mu: FiniteDist, nu: FiniteDist) -> None:
    if len(mu) != len(nu) or (mu.space and nu.space and mu.space != nu.space):
        raise ValueError("distributions live on different state spaces")


def tv_distance(mu: FiniteDist, nu: FiniteDist) -> float:
    _check_same_space(mu, nu)
    return tv_array(mu.probs, nu.probs)


def l2_distance(mu: FiniteDist, nu: FiniteDist) -> float:
    """||mu - nu||_{L^2(nu)}; ``inf`` if mu charges a state nu does not."""
    _check_same_space(mu, nu)
    return l2_array(mu.probs, nu.probs)


def tv_array(mu: np.ndarray, nu: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(mu) - np.asarray(nu)).sum())


def l2_array(mu: np.ndarray, nu: np.ndarray) -> float:
    """sqrt(sum mu^2/nu - 1), evaluated as sqrt(sum (mu-nu)^2/nu) for accuracy."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    zero = nu == 0
    if np.any(mu[zero] > 0):
        return math.inf
    d = mu[~zero] - nu[~zero]
    return float(math.sqrt(np.sum(d * d / nu[~zero])))


def product_dist(factors: list[np.ndarray]) -> np.ndarray:
    """Product measure of the factors, flattened with the first factor most significant."""
    out = np.array([1.0])
    for f in factors:
        out = np.outer(out, np.asarray(f, dtype=float)).ravel()
    return out
