"""Numba kernels: union-find component labelling and batched SW sweeps."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(cache=True)
def _label_into(n, eu, ev, mask, parent, size, root_comp, labels):
    for v in range(n):
        parent[v] = v
        size[v] = 1
        root_comp[v] = -1
    for i in range(eu.shape[0]):
        if mask[i]:
            _union(parent, size, eu[i], ev[i])
    k = 0
    for v in range(n):
        r = _find(parent, v)
        if root_comp[r] < 0:
            root_comp[r] = k
            k += 1
        labels[v] = root_comp[r]
    return k


@njit(cache=True)
def component_labels(n, eu, ev, mask):
    """Components of the open edges; ids 0..k-1 ordered by minimum vertex."""
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    root_comp = np.empty(n, np.int64)
    labels = np.empty(n, np.int64)
    k = _label_into(n, eu, ev, mask, parent, size, root_comp, labels)
    return k, labels


@njit(cache=True)
def component_labels_batch(n, eu, ev, masks):
    reps = masks.shape[0]
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    root_comp = np.empty(n, np.int64)
    labels = np.empty((reps, n), np.int64)
    counts = np.empty(reps, np.int64)
    for r in range(reps):
        counts[r] = _label_into(n, eu, ev, masks[r], parent, size, root_comp, labels[r])
    return counts, labels


@njit(cache=True)
def sw_sweep_batch(sigma, eu, ev, uniforms, p, new_colors):
    """One SW step for each row of ``sigma``.

    ``uniforms[r, e] < p`` opens a monochromatic edge; component ``c`` (in
    minimum-vertex order) receives colour ``new_colors[r, c]``.
    """
    reps, n = sigma.shape
    out = np.empty_like(sigma)
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    root_comp = np.empty(n, np.int64)
    labels = np.empty(n, np.int64)
    mask = np.empty(eu.shape[0], np.bool_)
    for r in range(reps):
        for i in range(eu.shape[0]):
            mask[i] = sigma[r, eu[i]] == sigma[r, ev[i]] and uniforms[r, i] < p
        _label_into(n, eu, ev, mask, parent, size, root_comp, labels)
        for v in range(n):
            out[r, v] = new_colors[r, labels[v]]
    return out


@njit(cache=True)
def edge_sweep_batch(omega, eu, ev, uniforms, p, new_colors):
    """One edge-SW step (recolour components of omega, then re-percolate)."""
    reps = omega.shape[0]
    n = new_colors.shape[1]
    out = np.empty_like(omega)
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    root_comp = np.empty(n, np.int64)
    labels = np.empty(n, np.int64)
    for r in range(reps):
        _label_into(n, eu, ev, omega[r], parent, size, root_comp, labels)
        for i in range(eu.shape[0]):
            same = new_colors[r, labels[eu[i]]] == new_colors[r, labels[ev[i]]]
            out[r, i] = same and uniforms[r, i] < p
    return out


@njit(cache=True)
def coupled_step_min_vertex(sigma, eu, ev, perc, colors):
    """Grand-coupling step with index-order labels (representative = min vertex)."""
    n = sigma.shape[0]
    mask = np.empty(eu.shape[0], np.bool_)
    for i in range(eu.shape[0]):
        mask[i] = perc[i] and sigma[eu[i]] == sigma[ev[i]]
    k, labels = component_labels(n, eu, ev, mask)
    rep = np.full(k, -1, np.int64)
    for v in range(n):
        if rep[labels[v]] < 0:
            rep[labels[v]] = v
    out = np.empty_like(sigma)
    for v in range(n):
        out[v] = colors[rep[labels[v]]]
    return out
