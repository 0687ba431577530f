"""Exact SW kernels, spectral and Dirichlet gaps, decay curves, Monte Carlo gaps.

Both kernels factor through the Edwards-Sokal joint law.  With
``A[x, w] = p^|w| (1-p)^(|E_m(x)|-|w|) 1{w in E_m(x)}`` (percolate the
monochromatic edges) and ``B[w, y] = q^-k(w) 1{y constant on components of w}``
(recolour), the vertex kernel is ``A @ B`` and the edge kernel is ``B @ A``.
The symmetrised vertex kernel equals ``K K^T`` with
``K[x, w] = nu(x, w) / sqrt(pi(x) phi(w))``, which gives exact gaps for state
spaces too large for a dense matrix.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from swcutoff import _fast
from swcutoff.dynamics import sw_step
from swcutoff.errors import NonReversibleError, SizingError
from swcutoff.lattice import Graph
from swcutoff.measures import (ModelParams, bond_space, check_state_cap, decode_bonds, decode_states,
                               exact_potts_dist, exact_rc_dist, l2_array, mono_counts, potts_space)
from swcutoff.rng import stream

DENSE_STATE_CAP = 1 << 12
BOND_CAP = 1 << 18
TOL = 1e-10


@dataclass
class TransitionKernel:
    """Row-stochastic matrix with its stationary law."""

    matrix: np.ndarray
    stationary: np.ndarray
    space: str = ""
    reversible: bool = True

    @property
    def n_states(self) -> int:
        return len(self.stationary)

    def row_residual(self) -> float:
        return float(np.max(np.abs(self.matrix.sum(axis=1) - 1.0)))

    def balance_residual(self) -> float:
        flow = self.stationary[:, None] * self.matrix
        return float(np.max(np.abs(flow - flow.T)))

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.stationary @ self.matrix - self.stationary)))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "prob"])
            for i, j in zip(*np.nonzero(self.matrix)):
                w.writerow([i, j, repr(float(self.matrix[i, j]))])


@dataclass
class GapReport:
    gamma: float
    lambda2: float
    lambda_min: float | None
    method: str
    ci: tuple[float, float] | None = None
    low_confidence: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def gamma_star(self) -> float:
        return gamma_star(self.gamma)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma_star"] = self.gamma_star if math.isfinite(self.gamma_star) else None
        return d

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def gamma_star(gamma: float) -> float:
    """log(1/(1-gamma)), the exponential decay rate per step."""
    return math.inf if gamma >= 1.0 else -math.log1p(-gamma)


# ------------------------------------------------------------ gap bounds


def lower_gap_bound(max_degree: int, p: float) -> float | None:
    """1 - 2eDp, valid when eDp <= 1 - 1/sqrt(2)."""
    if math.e * max_degree * p > 1 - 1 / math.sqrt(2):
        return None
    return 1 - 2 * math.e * max_degree * p


def upper_gap_bound(dim: int, p: float, q: int) -> float | None:
    """1 - p(1 - 1/q - 2 dim p^2/q) on tori, valid when p < (2 dim)^(-5/2)."""
    if p >= (2 * dim) ** -2.5:
        return None
    return 1 - p * (1 - 1 / q - 2 * dim * p * p / q)


def low_temperature_upper_bound(p: float, q: int) -> float | None:
    """1 - p + 1/q, valid when p > 1/q."""
    if p <= 1 / q:
        return None
    return 1 - p + 1 / q


# ------------------------------------------------------------ Edwards-Sokal factors


@dataclass
class ESFactors:
    """Sparse percolation (A) and recolouring (B) factors with both marginals."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    pi: np.ndarray
    phi: np.ndarray
    K: sp.csr_matrix


def es_factors(graph: Graph, params: ModelParams, state_cap: int = 1 << 16,
               bond_cap: int = BOND_CAP) -> ESFactors:
    V, E, q, p = graph.n_vertices, graph.n_edges, params.q, params.p
    n_states = q ** V
    check_state_cap(n_states, state_cap)
    n_bonds = 1 << E
    if n_bonds > bond_cap:
        raise SizingError(f"2^{E} bond configurations exceed the cap {bond_cap}")
    omegas = decode_bonds(np.arange(n_bonds), E)
    ks, labels = _fast.component_labels_batch(V, graph.eu, graph.ev, omegas)
    n_open = omegas.sum(axis=1)
    powers = q ** np.arange(V - 1, -1, -1, dtype=np.int64)
    colorings = {}
    rows, cols = [], []
    for w in range(n_bonds):
        k = int(ks[w])
        if k not in colorings:
            colorings[k] = decode_states(np.arange(q ** k), k, q)
        weights = np.bincount(labels[w], weights=powers, minlength=k).astype(np.int64)
        rows.append(colorings[k] @ weights)
        cols.append(np.full(q ** k, w, dtype=np.int64))
    x = np.concatenate(rows)
    w = np.concatenate(cols)
    m = mono_counts(graph, q, state_cap)
    a_val = p ** n_open[w] * (1 - p) ** (m[x] - n_open[w])
    b_val = float(q) ** -ks[w].astype(float)
    A = sp.csr_matrix((a_val, (x, w)), shape=(n_states, n_bonds))
    B = sp.csr_matrix((b_val, (w, x)), shape=(n_bonds, n_states))
    pi = exact_potts_dist(graph, params).probs
    # nu(x, w) = pi(x) A[x, w] = phi(w) B[w, x]
    nu = pi[x] * a_val
    phi = np.bincount(w, weights=nu, minlength=n_bonds)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_val = np.where(nu > 0, nu / np.sqrt(pi[x] * phi[w]), 0.0)
    K = sp.csr_matrix((k_val, (x, w)), shape=(n_states, n_bonds))
    return ESFactors(A, B, pi, phi, K)


def exact_sw_kernel(graph: Graph, params: ModelParams, state_cap: int = DENSE_STATE_CAP,
                    bond_cap: int = 1 << 16) -> TransitionKernel:
    """Dense SW kernel over all q^V configurations."""
    f = es_factors(graph, params, state_cap, bond_cap)
    P = (f.A @ f.B).toarray()
    return TransitionKernel(P, f.pi, potts_space(graph, params.q))


def exact_edge_sw_kernel(graph: Graph, params: ModelParams, bond_cap: int = DENSE_STATE_CAP,
                         state_cap: int = 1 << 16) -> TransitionKernel:
    """Dense kernel of the edge chain (recolour, then re-percolate) over 2^E bond sets."""
    f = es_factors(graph, params, state_cap, bond_cap)
    P = (f.B @ f.A).toarray()
    phi = exact_rc_dist(graph, params).probs
    return TransitionKernel(P, phi, bond_space(graph))


# ------------------------------------------------------------ gaps


def _support(kernel: TransitionKernel) -> np.ndarray:
    return np.flatnonzero(kernel.stationary > 0)


def _symmetrized(kernel: TransitionKernel, tol: float) -> tuple[np.ndarray, np.ndarray]:
    keep = _support(kernel)
    P = kernel.matrix[np.ix_(keep, keep)]
    pi = kernel.stationary[keep]
    flow = pi[:, None] * P
    resid = float(np.max(np.abs(flow - flow.T)))
    if resid > tol:
        raise NonReversibleError(f"detailed balance residual {resid:.3e} exceeds {tol:.1e}")
    s = np.sqrt(pi)
    S = s[:, None] * P / s[None, :]
    return 0.5 * (S + S.T), s


def spectral_gap(kernel: TransitionKernel, tol: float = TOL) -> GapReport:
    """1 - max(lambda_2, |lambda_min|) of the pi-symmetrised kernel."""
    S, _ = _symmetrized(kernel, tol)
    eig = np.linalg.eigvalsh(S)
    if len(eig) == 1:
        return GapReport(1.0, 0.0, 0.0, "exact", note="single state")
    lam2, lmin = float(eig[-2]), float(eig[0])
    return GapReport(1.0 - max(lam2, abs(lmin)), lam2, lmin, "exact")


def dirichlet_gap(kernel: TransitionKernel, tol: float = TOL) -> GapReport:
    """Smallest Dirichlet-form eigenvalue on functions orthogonal to constants."""
    S, s = _symmetrized(kernel, tol)
    if len(s) == 1:
        return GapReport(1.0, 0.0, 0.0, "dirichlet", note="single state")
    Q = sla.null_space(s[None, :])
    T = Q.T @ S @ Q
    T = 0.5 * (T + T.T)
    lam = np.linalg.eigvalsh(T)
    if lam[0] < -tol:
        raise NonReversibleError(f"kernel not positive semidefinite: min eigenvalue {lam[0]:.3e}")
    L = Q.T @ (np.eye(len(s)) - S) @ Q
    gamma = float(np.linalg.eigvalsh(0.5 * (L + L.T))[0])
    return GapReport(gamma, float(lam[-1]), float(lam[0]), "dirichlet")


def factored_gap(graph: Graph, params: ModelParams, dense_cap: int = DENSE_STATE_CAP,
                 state_cap: int = 1 << 16, bond_cap: int = BOND_CAP, tol: float = 1e-13) -> GapReport:
    """Exact gap from the Edwards-Sokal factor K without forming the dense kernel.

    The kernel is K K^T, hence positive semidefinite, so the gap is 1 - lambda_2.
    The Gram matrix is formed on whichever side of K is smaller.
    """
    f = es_factors(graph, params, state_cap, bond_cap)
    K = f.K
    keep_r = np.flatnonzero(f.pi > 0)
    keep_c = np.flatnonzero(f.phi > 0)
    K = K[keep_r][:, keep_c]
    if K.shape[0] <= K.shape[1]:
        top = np.sqrt(f.pi[keep_r])
        gram = lambda M: M @ M.T
        apply = lambda v: K @ (K.T @ v)
    else:
        top = np.sqrt(f.phi[keep_c])
        gram = lambda M: M.T @ M
        apply = lambda v: K.T @ (K @ v)
    dim = len(top)
    if dim == 1:
        return GapReport(1.0, 0.0, 0.0, "exact-factored", note="single state")
    if dim <= dense_cap:
        G = gram(K).toarray()
        eig = np.linalg.eigvalsh(0.5 * (G + G.T))
        return GapReport(1.0 - float(eig[-2]), float(eig[-2]), float(eig[0]), "exact-factored")
    op = LinearOperator((dim, dim), matvec=lambda v: apply(v) - top * (top @ v), dtype=float)
    v0 = np.ones(dim) - top * top.sum()
    vals = eigsh(op, k=2, which="LA", tol=tol, v0=v0, return_eigenvectors=False)
    lam2 = float(np.max(vals))
    return GapReport(1.0 - lam2, lam2, None, "exact-factored",
                     note="positive semidefinite by construction; lambda_min not computed")


# ------------------------------------------------------------ decay curves


def _powers(kernel: TransitionKernel, t_max: int):
    M = np.eye(kernel.n_states)
    for t in range(t_max + 1):
        yield t, M
        M = M @ kernel.matrix


def worst_tv_curve(kernel: TransitionKernel, t_max: int) -> np.ndarray:
    """d(t) = max_x TV(P^t(x, .), pi) for t = 0..t_max."""
    pi = kernel.stationary
    return np.array([0.5 * np.abs(M - pi).sum(axis=1).max() for _, M in _powers(kernel, t_max)])


def worst_l2_curve(kernel: TransitionKernel, t_max: int) -> np.ndarray:
    """max_x ||P^t(x, .) - pi||_{L^2(pi)} for t = 0..t_max."""
    pi = kernel.stationary
    return np.array([max(l2_array(row, pi) for row in M) for _, M in _powers(kernel, t_max)])


def write_curve(path: str | Path, values, header: str = "value") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", header])
        for t, v in enumerate(values):
            w.writerow([t, repr(float(v))])


# ------------------------------------------------------------ Monte Carlo gap


@dataclass(frozen=True)
class GapMCConfig:
    """Settings for :func:`gap_mc_estimate`.

    ``estimator="rao-blackwell"`` replaces f(X_{s+1}) by its exact conditional
    mean given X_s; ``"autocorr"`` uses the raw time series.
    """

    chains: int = 256
    burn_in: int = 50
    steps: int = 200
    max_lag: int = 4
    estimator: str = "rao-blackwell"
    bootstrap: int = 200
    seed: int = 0
    exact_edge_cap: int = 16
    inner_samples: int = 512


def mono_count(graph: Graph, sigma: np.ndarray) -> np.ndarray:
    sigma = np.atleast_2d(sigma)
    return (sigma[:, graph.eu] == sigma[:, graph.ev]).sum(axis=1)


def connection_probs(graph: Graph, sigma: np.ndarray, p: float, cap: int = 16,
                     inner_samples: int = 512, rng: np.random.Generator | None = None) -> np.ndarray:
    """P(endpoints of e joined after percolating the monochromatic edges), per edge.

    Edges in acyclic monochromatic clusters give p; clusters with cycles are
    enumerated when they have at most ``cap`` edges and sampled otherwise.
    """
    sigma = np.asarray(sigma)
    mono = sigma[graph.eu] == sigma[graph.ev]
    k, comp = _fast.component_labels(graph.n_vertices, graph.eu, graph.ev, mono)
    R = np.where(mono, p, 0.0)
    ce = comp[graph.eu]
    n_e = np.bincount(ce[mono], minlength=k)
    n_v = np.bincount(comp, minlength=k)
    for c in np.flatnonzero(n_e > n_v - 1):
        eidx = np.flatnonzero(mono & (ce == c))
        verts = np.flatnonzero(comp == c)
        local = np.full(graph.n_vertices, -1, np.int64)
        local[verts] = np.arange(len(verts))
        lu, lv = local[graph.eu[eidx]], local[graph.ev[eidx]]
        m = len(eidx)
        if m <= cap:
            masks = decode_bonds(np.arange(1 << m), m)
            n_open = masks.sum(axis=1)
            wts = p ** n_open * (1 - p) ** (m - n_open)
        else:
            rng = rng if rng is not None else stream(0, 0)
            masks = rng.random((inner_samples, m)) < p
            wts = np.full(inner_samples, 1.0 / inner_samples)
        _, labs = _fast.component_labels_batch(len(verts), lu, lv, masks)
        joined = labs[:, lu] == labs[:, lv]
        R[eidx] = wts @ joined
    return R


def _lag_ratio(f: np.ndarray, h: np.ndarray, shift: int) -> float:
    """Cov(f_s, h_{s+shift}) / Var(f), pooled over chains (rows)."""
    mu = f.mean()
    var = np.mean((f - mu) ** 2)
    if var == 0:
        return 0.0
    a = f[:, : f.shape[1] - shift] - mu
    b = h[:, shift:] - h.mean()
    return float(np.mean(a * b) / var)


def _fit_rate(rho: np.ndarray, lags: np.ndarray, se: np.ndarray | None = None) -> tuple[float, bool]:
    """Rate of rho_k = exp(-rate k) on the selected lags; flag a non-monotone tail.

    Weighted least squares through the origin in log space, each lag weighted
    by the inverse variance of log rho_k (delta method on its standard error).
    """
    sel = rho[lags - 1]
    if len(lags) == 0 or np.any(sel <= 0):
        return math.inf, True
    if se is None:
        var = np.ones(len(lags))
    else:
        var = np.maximum((se[lags - 1] / sel) ** 2, 1e-24)
    rate = -float(np.sum(lags * np.log(sel) / var) / np.sum(lags * lags / var))
    return rate, not bool(np.all(np.diff(sel) < 0))


def gap_mc_estimate(graph: Graph, params: ModelParams, config: GapMCConfig = GapMCConfig()) -> GapReport:
    """Spectral gap from the lag correlations of the monochromatic-edge count."""
    rng = stream(config.seed, 0)
    x = rng.integers(0, params.q, (config.chains, graph.n_vertices))
    for _ in range(config.burn_in):
        x = sw_step(graph, x, params, rng)
    f = np.empty((config.chains, config.steps))
    g = np.empty_like(f)
    rb = config.estimator == "rao-blackwell"
    if config.estimator not in ("rao-blackwell", "autocorr"):
        raise ValueError(f"unknown estimator {config.estimator!r}")
    q = params.q
    for s in range(config.steps):
        f[:, s] = mono_count(graph, x)
        if rb:
            for c in range(config.chains):
                R = connection_probs(graph, x[c], params.p, config.exact_edge_cap, config.inner_samples, rng)
                g[c, s] = np.sum((1 - 1 / q) * R + 1 / q)
        x = sw_step(graph, x, params, rng)
    if not rb:
        g = f
    if np.all(f == f[0, 0]):
        return GapReport(1.0, 0.0, None, "mc-fit", (1.0, 1.0), False,
                         "constant observable; lag correlations taken as 0")

    # g_s = E[f_{s+1} | X_s] under Rao-Blackwellisation, so lag k uses shift k-1.
    offset = 1 if rb else 0

    def estimate(rows):
        ff, hh = f[rows], g[rows]
        return np.array([_lag_ratio(ff, hh, k - offset) for k in range(1, config.max_lag + 1)])

    rho = estimate(np.arange(config.chains))
    boot_rho = np.array([estimate(rng.integers(0, config.chains, config.chains))
                         for _ in range(config.bootstrap)])
    se = boot_rho.std(axis=0) if config.bootstrap > 1 else np.zeros_like(rho)
    # keep consecutive lags from 1 whose ratio is clearly positive
    n_sig = 0
    while n_sig < len(rho) and rho[n_sig] > 0 and rho[n_sig] > 3 * se[n_sig]:
        n_sig += 1
    lags = np.arange(1, max(n_sig, 1) + 1)
    rate, flag = _fit_rate(rho, lags, se)
    to_gamma = lambda r: -math.expm1(-r) if math.isfinite(r) else 1.0
    gamma = to_gamma(rate)
    boot = [to_gamma(_fit_rate(b, lags, se)[0]) for b in boot_rho]
    lo, hi = np.percentile(boot, [0.135, 99.865]) if boot else (gamma, gamma)
    return GapReport(gamma, 1 - gamma, None, "mc-fit", (float(lo), float(hi)), flag or n_sig == 0,
                     f"estimator={config.estimator}",
                     {"lag_ratios": rho.tolist(), "lag_stderr": se.tolist(), "lags_used": int(len(lags)),
                      "stderr": float(np.std(boot)) if boot else 0.0})
