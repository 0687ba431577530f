import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_support, states
from swcutoff.dynamics import (BlockGeometry, UpdateStep, barrier_window, coupled_sw_step, generate_updates,
                               run_coupled, sample_update_step)
from swcutoff.infoperc import (BLUE, GREEN, RED, build_history, cluster_partition, history_slice, history_support,
                               is_oblivious, is_sparse, psi_bound, red_set_prob_mc, red_survival_curve,
                               red_survival_mc, steiner_size, support_details, update_support)
from swcutoff.lattice import build_torus, cycle_graph, path_graph
from swcutoff.measures import ModelParams
from swcutoff.rng import stream

SEED = 11
C4 = cycle_graph(4)


def _steps(graph, p, q, t, seed=SEED, replica=0):
    return generate_updates(graph, ModelParams.from_p(q, p), seed, t, replica).steps


def test_oblivious_extremes():
    g = build_torus(2, 3)
    s0 = sample_update_step(g, ModelParams.from_p(2, 0.0), stream(SEED, 0))
    s1 = sample_update_step(g, ModelParams.from_p(2, 1.0), stream(SEED, 0))
    assert all(is_oblivious(g, s0, v) for v in range(9))
    assert not any(is_oblivious(g, s1, v) for v in range(9))


def test_oblivious_frequency():
    g = build_torus(2, 3)
    p, n = 0.15, 100_000
    pr = ModelParams.from_p(2, p)
    rng = stream(SEED, 1)
    hits = sum(is_oblivious(g, sample_update_step(g, pr, rng), 4) for _ in range(n))
    target = (1 - p) ** 4
    assert abs(hits / n - target) <= 3 * math.sqrt(target * (1 - target) / n)


def test_history_trivial_cases():
    g = build_torus(2, 4)
    d = build_history(g, _steps(g, 0.3, 2, 3), [1, 5], t_star=0)
    assert {(pt.vertex, pt.half_time) for pt in d.points} == {(1, 0), (5, 0)}
    d = build_history(g, _steps(g, 0.0, 2, 4), [3])
    assert {(pt.vertex, pt.half_time) for pt in d.points} == {(3, 8), (3, 7)}
    assert len(history_slice(d, 0)) == 0
    with pytest.raises(ValueError):
        build_history(g, _steps(g, 0.3, 2, 2), [0], t_star=3)


def test_history_slices():
    g = build_torus(2, 4)
    steps = _steps(g, 0.25, 2, 4)
    d = build_history(g, steps, [0, 9])
    assert history_slice(d, 8).tolist() == [0, 9]
    assert sum(len(history_slice(d, k)) for k in range(9)) == len(d.points)
    with pytest.raises(ValueError):
        history_slice(d, 9)
    for a, b in d.edges:
        if a.half_time == b.half_time:
            assert a.half_time % 2 == 1 and g.has_edge(a.vertex, b.vertex)
        else:
            assert a.vertex == b.vertex and abs(a.half_time - b.half_time) == 1


def test_history_text_export(tmp_path):
    g = cycle_graph(6)
    d = build_history(g, _steps(g, 0.4, 2, 2), [0])
    d.to_text(tmp_path / "h.txt")
    lines = (tmp_path / "h.txt").read_text().splitlines()
    assert lines[0].startswith("# history t_star=2")
    assert sum(ln.startswith("P ") for ln in lines) == len(d.points)
    assert sum(ln.startswith("E ") for ln in lines) == len(d.edges)


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 0.6), st.integers(1, 4))
def test_history_of_set_is_union(seed, p, t):
    g = build_torus(2, 4)
    steps = _steps(g, p, 2, t, seed)
    A = [0, 5, 10]
    whole = build_history(g, steps, A)
    parts = [build_history(g, steps, [v]) for v in A]
    assert whole.points == frozenset().union(*(h.points for h in parts))
    assert whole.edges == frozenset().union(*(h.edges for h in parts))


def test_one_step_survival():
    g = build_torus(2, 5)
    p = 0.1
    est = red_survival_mc(g, ModelParams.from_p(2, p), 1, 20_000, seed=SEED)
    target = 1 - (1 - p) ** 4
    assert abs(est.value - target) <= 3 * math.sqrt(target * (1 - target) / 20_000)


def test_survival_examples():
    g = build_torus(2, 5)
    assert red_survival_mc(g, ModelParams.from_p(2, 0.0), 3, 200).value == 0.0
    p = 0.02
    curve = red_survival_curve(g, ModelParams.from_p(2, p), 4, 4000, seed=SEED)
    for t, est in enumerate(curve, start=1):
        assert est.value <= (3 * math.e * 4 * p) ** t + 3 * est.stderr
    with pytest.raises(ValueError):
        red_survival_mc(g, ModelParams.from_p(2, p), 1, 50)


def test_cluster_extremes():
    g = build_torus(2, 3)
    cls = cluster_partition(g, _steps(g, 0.0, 2, 3))
    assert len(cls.clusters) == 9 and set(cls.marks) == {BLUE}
    cls = cluster_partition(g, _steps(g, 1.0, 2, 3))
    assert len(cls.clusters) == 1 and cls.marks == [RED]


def test_blue_iff_isolated_exhaustive():
    colors = np.zeros(4, dtype=np.int64)
    for bits in itertools.product((False, True), repeat=4):
        step = UpdateStep(np.array(bits), colors)
        cls = cluster_partition(C4, [step])
        blue = {int(c[0]) for c, m in zip(cls.clusters, cls.marks) if m == BLUE}
        assert blue == {v for v in range(4) if is_oblivious(C4, step, v)}


@settings(max_examples=60)
@given(st.integers(0, 10 ** 6), st.floats(0.0, 1.0), st.integers(1, 3))
def test_classification_invariants(seed, p, t):
    g = build_torus(2, 4)
    cls = cluster_partition(g, _steps(g, p, 2, t, seed))
    assert np.array_equal(np.sort(np.concatenate(cls.clusters)), np.arange(16))
    for c, m, bot in zip(cls.clusters, cls.marks, cls.bottoms):
        assert m in (RED, BLUE, GREEN)
        assert (m == RED) == (len(bot) > 0)
        if m == BLUE:
            assert len(c) == 1
        if m == GREEN:
            assert len(c) >= 2


def test_non_red_clusters_ignore_initial_colours():
    q = 2
    rng = stream(SEED, 2)
    for trial in range(40):
        g = C4 if trial % 2 else path_graph(4)
        t = 1 + trial % 2
        steps = [sample_update_step(g, ModelParams.from_p(q, 0.5), rng) for _ in range(t)]
        cls = cluster_partition(g, steps)
        outs = {s: run_coupled(g, np.array(s), steps).configs[-1] for s in states(4, q)}
        for c, m in zip(cls.clusters, cls.marks):
            if m != RED:
                assert len({tuple(o[c]) for o in outs.values()}) == 1


def test_no_red_means_coalescence():
    g = build_torus(1, 8)
    pr = ModelParams.from_p(3, 0.2)
    checked = 0
    for r in range(300):
        ups = generate_updates(g, pr, SEED, 3, replica=r)
        cls = cluster_partition(g, ups.steps)
        if cls.red:
            continue
        checked += 1
        x = stream(SEED, 3, r).integers(0, 3, (2, 8))
        a = run_coupled(g, x[0], ups.steps).configs[-1]
        b = run_coupled(g, x[1], ups.steps).configs[-1]
        assert np.array_equal(a, b)
    assert checked > 50


def test_classification_csv(tmp_path):
    g = build_torus(2, 3)
    cls = cluster_partition(g, _steps(g, 0.3, 2, 2))
    cls.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "cluster_id,size,mark" and len(lines) == len(cls.clusters) + 1


def test_support_trivial_cases():
    g = build_torus(2, 3)
    assert len(update_support(_steps(g, 0.0, 2, 2), g, 2)) == 0
    assert update_support([], g, 2).tolist() == list(range(9))
    with pytest.raises(ValueError):
        update_support(_steps(g, 0.2, 2, 1))


def test_support_within_history_support():
    g = build_torus(2, 4)
    for r in range(20):
        ups = generate_updates(g, ModelParams.from_p(2, 0.1), SEED, 2, replica=r)
        det = support_details(ups)
        assert set(det.support.tolist()) <= set(det.history_support.tolist())
        assert np.array_equal(det.history_support, history_support(g, ups.steps))


def test_support_minimality_on_path_exhaustive():
    g = path_graph(3)
    edges = [(0, 1), (1, 2)]
    q = 2
    outcomes = [UpdateStep(np.array(b), np.array(c)) for b in itertools.product((False, True), repeat=2)
                for c in itertools.product(range(q), repeat=3)]
    for t in (1, 2):
        for window in itertools.product(outcomes, repeat=t):
            got = set(update_support(list(window), g, q).tolist())
            ref = brute_support(3, edges, [(w.percolation, w.colors) for w in window], q)
            assert got == ref


def test_barrier_window_support():
    lat = build_torus(1, 16)
    pr = ModelParams.from_p(2, 0.05)
    ups = generate_updates(lat, pr, SEED, 3)
    win = barrier_window(lat, ups.steps, BlockGeometry(4, 2), pr, SEED)
    det = support_details(win)
    assert set(det.support.tolist()) <= set(det.history_support.tolist())
    win0 = barrier_window(lat, generate_updates(lat, ModelParams.from_p(2, 0.0), SEED, 2).steps,
                          BlockGeometry(4, 2), ModelParams.from_p(2, 0.0), SEED)
    assert len(update_support(win0)) == 0


def test_is_sparse_examples():
    lat = build_torus(2, 10)
    assert is_sparse([], lat, 1, 0, 1)[0]
    assert is_sparse([lat.index((3, 3))], lat, 1, 0, 5)[0]
    a, b = lat.index((0, 0)), lat.index((0, 3))
    ok, parts = is_sparse([a, b], lat, 5, 2, 4)
    assert not ok and len(parts) == 1
    ok, parts = is_sparse([a, b], lat, 2, 0, 3)
    assert ok and len(parts) == 2
    assert not is_sparse([a, b], lat, 1, 0, 3)[0]
    with pytest.raises(ValueError):
        is_sparse([a], lat, 0, 1, 1)


def test_steiner_size():
    lat = build_torus(1, 8)
    assert steiner_size(lat, []) == 0
    assert steiner_size(lat, [2]) == 1
    assert steiner_size(lat, [0, 3]) == 4
    assert steiner_size(lat, [0, 7]) == 2
    sq = build_torus(2, 5)
    corners = [sq.index((0, 0)), sq.index((0, 2)), sq.index((2, 0))]
    assert steiner_size(sq, corners) == 5


def test_red_set_examples():
    g = build_torus(1, 16)
    assert red_set_prob_mc(g, ModelParams.from_p(2, 0.0), [0, 1], 2, 200).value == 0.0
    pr = ModelParams.from_p(2, 0.1)
    single = red_set_prob_mc(g, pr, [3], 2, 500, seed=SEED)
    assert single.value == red_survival_mc(g, pr, 2, 500, seed=SEED, vertex=3).value
    with pytest.raises(ValueError):
        red_set_prob_mc(g, pr, [0, 1, 2, 3, 4], 1, 100)


@pytest.mark.parametrize("A", [[0], [0, 1], [0, 2], [0, 1, 3]])
def test_red_set_below_psi_bound(A):
    g = build_torus(1, 16)
    p, t = 0.02, 2
    est = red_set_prob_mc(g, ModelParams.from_p(2, p), A, t, 4000, seed=SEED)
    bound = psi_bound(g.max_degree, p, t, steiner_size(g, A), theta=1.0, M=1.0)
    assert est.value <= bound + 3 * est.stderr
