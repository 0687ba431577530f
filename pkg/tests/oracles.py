"""Brute-force reference implementations that share no code with the package."""

from __future__ import annotations

import itertools
import math

import numpy as np


def components_dfs(n: int, edges: list[tuple[int, int]]) -> list[int]:
    """Component id per vertex, ids assigned in order of the smallest vertex."""
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    comp = [-1] * n
    k = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = k
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if comp[w] < 0:
                    comp[w] = k
                    stack.append(w)
        k += 1
    return comp


def states(n: int, q: int):
    """All colourings, vertex 0 most significant."""
    return list(itertools.product(range(q), repeat=n))


def potts_probs(n: int, edges, q: int, beta: float) -> np.ndarray:
    w = np.array([math.exp(beta * sum(s[u] == s[v] for u, v in edges)) for s in states(n, q)])
    return w / w.sum()


def sw_kernel(n: int, edges, q: int, p: float) -> np.ndarray:
    """Dense SW kernel: percolate monochromatic edges, recolour components uniformly."""
    S = states(n, q)
    index = {s: i for i, s in enumerate(S)}
    P = np.zeros((len(S), len(S)))
    for i, s in enumerate(S):
        mono = [e for e in edges if s[e[0]] == s[e[1]]]
        for bits in itertools.product((0, 1), repeat=len(mono)):
            w = math.prod(p if b else 1 - p for b in bits)
            comp = components_dfs(n, [e for e, b in zip(mono, bits) if b])
            k = max(comp) + 1
            for cols in itertools.product(range(q), repeat=k):
                P[i, index[tuple(cols[c] for c in comp)]] += w / q ** k
    return P


def coupled_step(n: int, edges, sigma, percolation, colors) -> tuple:
    """Grand-coupling step with index-order labels: each cluster takes its minimum vertex's colour."""
    open_mono = [e for e, b in zip(edges, percolation) if b and sigma[e[0]] == sigma[e[1]]]
    comp = components_dfs(n, open_mono)
    rep = {}
    for v in range(n):
        rep.setdefault(comp[v], v)
    return tuple(int(colors[rep[comp[v]]]) for v in range(n))


def brute_support(n: int, edges, steps, q: int) -> set[int]:
    """Vertices whose initial colour can change the output of the window (exhaustive flipping)."""
    def run(x):
        for perc, cols in steps:
            x = coupled_step(n, edges, x, perc, cols)
        return x

    S = states(n, q)
    out = {s: run(s) for s in S}
    support = set()
    for s in S:
        for v in range(n):
            for c in range(q):
                if c != s[v]:
                    t = list(s)
                    t[v] = c
                    if out[tuple(t)] != out[s]:
                        support.add(v)
    return support


def l2_sq(mu: np.ndarray, nu: np.ndarray) -> float:
    """sum mu^2/nu - 1, summed over the support of nu."""
    return float(np.sum(mu ** 2 / nu) - 1.0)


def tv(mu: np.ndarray, nu: np.ndarray) -> float:
    return 0.5 * float(np.abs(mu - nu).sum())
