import numpy as np
import pytest
from hypothesis import given, strategies as st

from swcutoff.errors import SizingError
from swcutoff.lattice import (Graph, TorusLattice, box, build_torus, complete_graph, cycle_graph,
                              graph_from_descriptor, linf_distance, neighbors, path_graph, single_edge,
                              single_vertex)


@pytest.mark.parametrize("dim,side,nv,ne", [(1, 4, 4, 4), (2, 3, 9, 18), (3, 4, 64, 192)])
def test_torus_sizes(dim, side, nv, ne):
    lat = build_torus(dim, side)
    assert (lat.n_vertices, lat.n_edges) == (nv, ne)


def test_neighbors_examples():
    assert set(neighbors(build_torus(1, 4), 0)) == {1, 3}
    assert len(neighbors(build_torus(2, 3), 0)) == 4
    assert neighbors(build_torus(1, 2), 0) == [1]
    assert build_torus(1, 2).n_edges == 1


def test_neighbors_out_of_range():
    with pytest.raises(IndexError):
        neighbors(build_torus(1, 4), 4)
    with pytest.raises(IndexError):
        neighbors(build_torus(1, 4), -1)


def test_linf_examples():
    assert linf_distance(build_torus(1, 8), 0, 3) == 3
    assert linf_distance(build_torus(1, 8), 0, 5) == 3
    lat = build_torus(2, 5)
    assert linf_distance(lat, lat.index((0, 0)), lat.index((2, 4))) == 2


def test_box_examples():
    assert len(box(build_torus(2, 9), 40, 1)) == 9
    assert box(build_torus(1, 9), 4, 0).tolist() == [4]
    assert len(box(build_torus(3, 9), 0, 1)) == 27


def test_sizing_error():
    with pytest.raises(SizingError):
        build_torus(3, 10 ** 4)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_torus(0, 3)
    with pytest.raises(ValueError):
        Graph(2, [(0, 0)])
    with pytest.raises(IndexError):
        Graph(2, [(0, 2)])


def test_small_graph_factories():
    assert single_vertex().n_edges == 0
    assert single_edge().edges.tolist() == [[0, 1]]
    assert path_graph(3).n_edges == 2
    assert cycle_graph(5).n_edges == 5
    assert complete_graph(4).n_edges == 6


def test_descriptor_round_trip():
    for g in (build_torus(2, 3), cycle_graph(5), TorusLattice((2, 3))):
        h = graph_from_descriptor(g.descriptor())
        assert h.n_vertices == g.n_vertices
        assert np.array_equal(h.edges, g.edges)


@given(st.integers(1, 3), st.integers(3, 7))
def test_torus_invariants(dim, side):
    lat = build_torus(dim, side)
    assert lat.n_edges == dim * side ** dim
    assert np.all(lat.degrees == 2 * dim)
    for v in range(0, lat.n_vertices, max(1, lat.n_vertices // 7)):
        for w in lat.neighbors(v):
            assert v in lat.neighbors(w)
            assert lat.linf_distance(v, w) == 1


@given(st.integers(1, 3), st.integers(2, 6), st.data())
def test_translation_invariance(dim, side, data):
    lat = build_torus(dim, side)
    u = data.draw(st.integers(0, lat.n_vertices - 1))
    v = data.draw(st.integers(0, lat.n_vertices - 1))
    shift = data.draw(st.lists(st.integers(-side, side), min_size=dim, max_size=dim))
    tu, tv = lat.translate(u, shift), lat.translate(v, shift)
    assert lat.linf_distance(u, v) == lat.linf_distance(tu, tv)
    if u != v:
        assert lat.has_edge(u, v) == lat.has_edge(tu, tv)


@given(st.integers(2, 9), st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), max_size=20))
def test_edge_canonicalization(n, pairs):
    pairs = [(a % n, b % n) for a, b in pairs if a % n != b % n]
    g = Graph(n, pairs)
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    h = Graph(n, [tuple(e) for e in g.edges] + [(b, a) for a, b in g.edges])
    assert np.array_equal(g.edges, h.edges)
    for a, b in pairs:
        assert g.edge_index(a, b) == g.edge_index(b, a)
