import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swcutoff.dynamics import BlockGeometry
from swcutoff.experiments import (CutoffConfig, ProjStatConfig, SparseParams, coupled_hamming_curve,
                                  coupling_tv_bound, crossing_time, cutoff_scan, edge_coupling_persistence,
                                  exact_statistic_law, gap_convergence_scan, gap_report, mixing_times, mt_curve,
                                  path_coupling_estimate, predicted_mixing_steps, propagation_test,
                                  reference_samples, statistic_codes, support_sparsity_test, tv_curve_projected,
                                  tv_estimate, tv_upper_via_coupling)
from swcutoff.lattice import build_torus, cycle_graph, single_edge
from swcutoff.measures import ModelParams
from swcutoff.spectral import (GapMCConfig, exact_sw_kernel, gamma_star, lower_gap_bound, spectral_gap,
                               upper_gap_bound, worst_l2_curve, worst_tv_curve)

SEED = 5
C4 = cycle_graph(4)


def test_coupling_curve_examples():
    pr = ModelParams.from_p(2, 0.1)
    curve = tv_upper_via_coupling(C4, pr, 6, 2000, seed=SEED)
    assert curve[0][1].value == 4
    exact = worst_tv_curve(exact_sw_kernel(C4, pr), 6)
    for t, est in curve:
        # rule of three: all-zero replicas still allow a mean up to 3 n / R
        assert est.value + 3 * est.stderr + 3 * 4 / est.n >= exact[t]
        if math.e * 2 * 0.1 <= 1 - 1 / math.sqrt(2):
            assert est.value <= coupling_tv_bound(4, 2, 0.1, t) + 3 * est.stderr
    with pytest.raises(ValueError):
        tv_upper_via_coupling(C4, pr, 2, 50)


def test_coupled_hamming_below_dependent_set():
    lat = build_torus(1, 12)
    pr = ModelParams.from_p(2, 0.08)
    ham = coupled_hamming_curve(lat, pr, np.zeros(12, int), np.ones(12, int), 4, 300, seed=SEED)
    dep = tv_upper_via_coupling(lat, pr, 4, 300, seed=SEED)
    for (t, h), (_, d) in zip(ham, dep):
        assert h.value <= d.value + 1e-12


def test_path_coupling_contraction():
    lat = build_torus(2, 6)
    p = 0.02
    est = path_coupling_estimate(lat, ModelParams.from_p(2, p), 4000, seed=SEED)
    assert 0.0 <= est.value <= 2 * math.e * 4 * p + 3 * est.stderr


def test_tv_exact_matches_worst_curve():
    pr = ModelParams.from_p(2, 0.3)
    curve = worst_tv_curve(exact_sw_kernel(single_edge(), pr), 4)
    for t in range(5):
        assert tv_estimate(single_edge(), pr, t).value == pytest.approx(curve[t], abs=1e-15)
    with pytest.raises(ValueError):
        tv_estimate(single_edge(), pr, 1, method="bogus")


def test_proj_stat_at_zero_matches_statistic_law():
    pr = ModelParams.from_p(2, 0.15)
    cfg = ProjStatConfig(samples=500, reference_samples=20000, bootstrap=100, seed=SEED, start="ones")
    est = tv_estimate(C4, pr, 0, "proj-stat", cfg)
    law = exact_statistic_law(C4, pr)
    start_code = statistic_codes(C4, np.ones((1, 4), int), 2)[0]
    exact = 1 - law[start_code]
    assert abs(est.value - exact) <= 3 * est.stderr + 1e-12


def test_proj_stat_below_exact_tv():
    pr = ModelParams.from_p(3, 0.2)
    cfg = ProjStatConfig(samples=20000, reference_samples=20000, bootstrap=50, seed=SEED,
                         statistics=("mono_edges", "color_hist"))
    proj, meta = tv_curve_projected(C4, pr, 4, cfg)
    exact = worst_tv_curve(exact_sw_kernel(C4, pr), 4)
    for t, est in enumerate(proj):
        assert 0.0 <= est.value <= 1.0
        # the plug-in TV of two finite samples is biased upward; 0.01 covers it at 20000 samples
        assert est.value <= exact[t] + 3 * est.stderr + 0.01
    assert meta["overshoot"] == 20 and meta["reference_burn"] >= 20


def test_reference_sample_guard():
    with pytest.raises(ValueError):
        reference_samples(C4, ModelParams.from_p(2, 0.1), ProjStatConfig(reference_samples=10))
    with pytest.raises(ValueError):
        statistic_codes(C4, np.zeros((1, 4), int), 2, ("nope",))


def test_predicted_mixing_steps():
    lat = build_torus(1, 64)
    steps = predicted_mixing_steps(lat, ModelParams.from_p(2, 0.05))
    a = 2 * math.e * 2 * 0.05
    assert 64 * a ** steps <= 0.25 < 64 * a ** (steps - 1)
    assert predicted_mixing_steps(lat, ModelParams.from_p(2, 0.5)) is None


def test_mt_curve_full_window_and_contraction():
    pr = ModelParams.from_p(2, 0.25)
    k = exact_sw_kernel(C4, pr)
    full = mt_curve(C4, pr, np.arange(4), 8)
    l2 = worst_l2_curve(k, 8)
    assert np.allclose(full, l2, rtol=1e-10, atol=1e-14)
    part = mt_curve(C4, pr, [0, 1], 8)
    assert np.all(part <= l2 + 1e-12)


def test_mt_curve_tail_rate():
    pr = ModelParams.from_p(2, 0.3)
    g = build_torus(1, 6)
    m = mt_curve(g, pr, [0, 1], 40)
    rate = gamma_star(spectral_gap(exact_sw_kernel(g, pr)).gamma)
    t = np.arange(len(m))
    keep = np.flatnonzero(m > 1e-10)[-5:]
    slope = np.polyfit(t[keep], np.log(m[keep]), 1)[0]
    assert abs(-slope - rate) <= 0.10 * rate


def test_mixing_time_helpers():
    tv = [1.0, 0.8, 0.4, 0.1]
    assert mixing_times(tv, [0.25, 0.75, 0.05]) == {0.25: 3, 0.75: 2, 0.05: None}
    assert crossing_time(tv, 0.5) == pytest.approx(1.75)
    assert crossing_time([0.3], 0.5) == 0.0
    assert crossing_time([1.0, 0.9], 0.5) is None
    assert crossing_time([], 0.5) is None


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
def test_mixing_times_monotone_in_eps(vals):
    tv = sorted(vals, reverse=True)
    tm = mixing_times(tv, [0.1, 0.25, 0.5, 0.75])
    finite = [tm[e] for e in (0.1, 0.25, 0.5, 0.75) if tm[e] is not None]
    assert finite == sorted(finite, reverse=True)


def test_cutoff_scan_single_n():
    cfg = CutoffConfig(dim=1, t_max=4, gap_side=6,
                       proj=ProjStatConfig(samples=2000, reference_samples=2000, bootstrap=10, seed=SEED))
    scan = cutoff_scan([16], ModelParams.from_p(2, 0.05), cfg)
    assert list(scan.ratios) == [16]
    assert scan.slope is None
    prof = scan.profiles[0]
    assert prof.predicted == pytest.approx(0.5 * math.log(16) / scan.gamma_star)
    assert all(0 <= e.value <= 1 for e in prof.tv)
    with pytest.raises(ValueError):
        cutoff_scan([16, 8], ModelParams.from_p(2, 0.05), cfg)


def test_propagation_trivial_cases():
    lat = build_torus(1, 12)
    assert propagation_test(lat, ModelParams.from_p(2, 0.3), 0, 1, 6, 5, 100, seed=SEED).value == 1.0
    assert propagation_test(lat, ModelParams.from_p(2, 0.0), 0, 1, 1, 5, 100, seed=SEED).value == 1.0
    with pytest.raises(ValueError):
        propagation_test(lat, ModelParams.from_p(2, 0.1), 0, 1, 0, 5, 100)


def test_propagation_increases_with_halo():
    lat = build_torus(1, 40)
    pr = ModelParams.from_p(2, 0.3)
    est = [propagation_test(lat, pr, 0, 1, h, 6, 1500, seed=SEED) for h in (1, 2, 4)]
    for a, b in zip(est, est[1:]):
        assert b.value + 3 * b.stderr >= a.value
    assert est[-1].value > est[0].value


def test_sparsity_p0_always_sparse():
    lat = build_torus(1, 24)
    res = support_sparsity_test(lat, ModelParams.from_p(2, 0.0), 1, SparseParams(1, 0, 1), BlockGeometry(6, 2),
                                20, seed=SEED)
    assert res["fraction_sparse"].value == 1.0
    assert res["mean_support_fraction"].value == 0.0
    with pytest.raises(ValueError):
        support_sparsity_test(lat, ModelParams.from_p(2, 0.0), 0, SparseParams(1, 0, 1), BlockGeometry(6, 2), 5)


def test_sparsity_trend_in_s():
    lat = build_torus(1, 32)
    p = 0.05
    pr = ModelParams.from_p(2, p)
    sparse = SparseParams.scaled(lat)
    res = [support_sparsity_test(lat, pr, s, sparse, BlockGeometry(8, 3), 300, seed=SEED) for s in (1, 2, 3)]
    frac = [r["fraction_sparse"] for r in res]
    for a, b in zip(frac, frac[1:]):
        assert b.value + 3 * b.stderr >= a.value
    sizes = [r["mean_support_fraction"].value for r in res]
    assert sizes[0] > sizes[1] > sizes[2] > 0
    slope = math.log(sizes[2] / sizes[0]) / 2
    assert slope <= math.log(3 * math.e * 2 * p) + 0.1


def test_gap_scan_examples():
    pr = ModelParams.from_p(2, 0.05)
    reports, diffs = gap_convergence_scan([4], pr, method="exact")
    assert len(reports) == 1 and diffs == []
    reports, diffs = gap_convergence_scan([3, 6, 12], pr, method="exact")
    assert diffs[1] < diffs[0]
    for r, rep in reports:
        lo = lower_gap_bound(2, 0.05)
        hi = upper_gap_bound(1, 0.05, 2)
        assert (lo is None or rep.gamma >= lo - 1e-12) and (hi is None or rep.gamma <= hi + 1e-12)


def test_gap_report_methods():
    pr = ModelParams.from_p(2, 0.1)
    lat = build_torus(1, 4)
    exact = gap_report(lat, pr, "exact")
    mc = gap_report(lat, pr, "mc", GapMCConfig(seed=SEED))
    assert exact.method == "exact-factored" and mc.method == "mc-fit"
    assert mc.gamma == pytest.approx(exact.gamma, abs=0.01)


def test_edge_persistence_examples():
    lat = build_torus(1, 8)
    p, q = 0.1, 2
    rows = edge_coupling_persistence(lat, ModelParams.from_p(q, p), 3, 3000, seed=SEED)
    assert rows[0][1].value == 1.0
    bound = p * (1 - 1 / q - 2 * p * p / q)
    for t, est, ratio in rows[:-1]:
        if ratio is not None and ratio.n >= 30:
            assert ratio.value >= bound - 3 * ratio.stderr
    p = 0.9
    rows = edge_coupling_persistence(lat, ModelParams.from_p(q, p), 3, 1000, seed=SEED)
    for t, est, ratio in rows[:-1]:
        if ratio is not None and ratio.n >= 30:
            assert ratio.value >= p - 1 / q - 3 * ratio.stderr
    with pytest.raises(ValueError):
        edge_coupling_persistence(lat, ModelParams.from_p(q, p), 3, 10)
