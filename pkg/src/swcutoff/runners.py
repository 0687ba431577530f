"""Named experiments: each maps an :class:`ExperimentConfig` to CSV rows, a summary and bound checks."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from swcutoff import __version__
from swcutoff import experiments as ex
from swcutoff.config import ExperimentConfig
from swcutoff.dynamics import BlockGeometry
from swcutoff.errors import ConfigError
from swcutoff.infoperc import red_survival_curve
from swcutoff.lattice import build_torus
from swcutoff.spectral import (GapMCConfig, exact_sw_kernel, gap_mc_estimate, lower_gap_bound,
                               spectral_gap, upper_gap_bound, worst_l2_curve, worst_tv_curve)

SCHEMA_VERSION = 1

# CSV schemas per experiment; plot kinds rely on the leading columns.
SCHEMAS = {
    "gap-exact": ("r", "gamma", "gamma_star", "lambda2", "lower", "upper"),
    "gap-mc": ("r", "gamma", "lo", "hi", "lower", "upper"),
    "gap-scan": ("r", "gamma", "lo", "hi", "lower", "upper"),
    "tv-exact": ("t", "tv", "lower", "upper"),
    "l2-exact": ("t", "l2"),
    "tv-coupling": ("t", "tv", "stderr", "lo", "hi", "bound"),
    "tv-projected": ("t", "tv", "stderr", "lo", "hi"),
    "cutoff-scan": ("n", "t", "tv", "stderr", "predicted"),
    "path-coupling": ("n", "mean_hamming", "stderr", "bound"),
    "red-survival": ("t", "prob", "stderr", "lo", "hi", "bound"),
    "propagation": ("halo", "prob", "stderr", "lo", "hi"),
    "support-sparsity": ("s", "fraction_sparse", "stderr", "mean_support_fraction", "support_stderr"),
    "edge-persistence": ("t", "prob", "stderr", "ratio", "ratio_stderr", "bound"),
    "mt-curve": ("t", "mt", "l2"),
}


@dataclass
class ExperimentResult:
    rows: list[tuple]
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    advisory: tuple = ()

    @property
    def passed(self) -> bool:
        """All checks whose preconditions hold passed; advisory checks are reported only."""
        return all(v for k, v in self.checks.items() if k not in self.advisory)


def _sigma(cfg: ExperimentConfig) -> float:
    return cfg.tolerances.get("sigma", 3.0)


def _lattice(cfg: ExperimentConfig):
    if cfg.side is None:
        raise ConfigError("[lattice] side: required for this experiment")
    return build_torus(cfg.dim, cfg.side)


def _grid(cfg: ExperimentConfig) -> tuple:
    if not cfg.grid:
        raise ConfigError("[lattice] grid: required for this experiment")
    return cfg.grid


def _bounds(lat, cfg):
    """Both gap-bound formulas and whether their preconditions hold."""
    p, q, D = cfg.resolved_p, cfg.q, lat.max_degree
    lower = lower_gap_bound(D, p)
    upper = upper_gap_bound(cfg.dim, p, q)
    raw_lower = 1 - 2 * math.e * D * p
    raw_upper = 1 - p * (1 - 1 / q - 2 * cfg.dim * p * p / q)
    return raw_lower, raw_upper, lower is not None, upper is not None


def _gap_checks(lo, hi, bounds, slack, suffix=""):
    lower, upper, ok_lower, ok_upper = bounds
    checks = {f"gap_lower_bound{suffix}": bool(hi >= lower - slack),
              f"gap_upper_bound{suffix}": bool(lo <= upper + slack)}
    advisory = tuple(k for k, ok in zip(checks, (ok_lower, ok_upper)) if not ok)
    return checks, advisory


def _bound_summary(bounds):
    lower, upper, ok_lower, ok_upper = bounds
    return {"lower_bound": lower, "lower_bound_applicable": ok_lower,
            "upper_bound": upper, "upper_bound_applicable": ok_upper}


def _nan(v):
    return "" if v is None else v


def run_gap_exact(cfg, pool_map=map):
    lat = _lattice(cfg)
    rep = ex.gap_report(lat, cfg.params, "exact")
    b = _bounds(lat, cfg)
    checks, advisory = _gap_checks(rep.gamma, rep.gamma, b, cfg.tolerances.get("slack", 1e-9))
    return ExperimentResult(
        [(cfg.side, rep.gamma, rep.gamma_star, rep.lambda2, b[0], b[1])],
        {"gamma": rep.gamma, "gamma_star": rep.gamma_star, "method": rep.method, **_bound_summary(b)},
        checks, advisory)


def _mc_config(cfg, seed):
    return GapMCConfig(chains=cfg.replicas, steps=max(cfg.t_max, 20), seed=seed)


def run_gap_mc(cfg, pool_map=map):
    lat = _lattice(cfg)
    rep = gap_mc_estimate(lat, cfg.params, _mc_config(cfg, cfg.seed))
    lo, hi = rep.ci if rep.ci else (rep.gamma, rep.gamma)
    b = _bounds(lat, cfg)
    checks, advisory = _gap_checks(lo, hi, b, 0.0)
    return ExperimentResult([(cfg.side, rep.gamma, lo, hi, b[0], b[1])],
                            {"gamma": rep.gamma, "ci": [lo, hi], "low_confidence": rep.low_confidence,
                             **_bound_summary(b)}, checks, advisory)


def _scan_one(args):
    cfg, r = args
    lat = build_torus(cfg.dim, r)
    method = "mc" if cfg.tolerances.get("force_mc", 0) else "auto"
    return r, ex.gap_report(lat, cfg.params, method, _mc_config(cfg, cfg.seed))


def run_gap_scan(cfg, pool_map=map):
    grid = _grid(cfg)
    reports = list(pool_map(_scan_one, [(cfg, r) for r in grid]))
    rows, checks, advisory = [], {}, ()
    for r, rep in reports:
        lat = build_torus(cfg.dim, r)
        lo, hi = rep.ci if rep.ci else (rep.gamma, rep.gamma)
        b = _bounds(lat, cfg)
        rows.append((r, rep.gamma, lo, hi, b[0], b[1]))
        c, a = _gap_checks(lo, hi, b, 1e-9, f"_r{r}")
        checks.update(c)
        advisory += a
    diffs = [abs(b[1].gamma - a[1].gamma) for a, b in zip(reports, reports[1:])]
    if len(diffs) >= 2:
        checks["differences_decrease"] = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    return ExperimentResult(rows, {"differences": diffs, "methods": [rep.method for _, rep in reports]},
                            checks, advisory)


def run_tv_exact(cfg, pool_map=map):
    lat = _lattice(cfg)
    k = exact_sw_kernel(lat, cfg.params)
    gamma = spectral_gap(k).gamma
    d = worst_tv_curve(k, cfg.t_max)
    pimin = float(k.stationary[k.stationary > 0].min())
    slack = cfg.tolerances.get("slack", 1e-9)
    rows, ok = [], True
    for t, v in enumerate(d):
        lo, hi = 0.5 * (1 - gamma) ** t, 0.5 * (1 - gamma) ** t / pimin
        ok &= lo - slack <= v <= hi + slack
        rows.append((t, float(v), lo, hi))
    return ExperimentResult(rows, {"gamma": gamma, "pi_min": pimin}, {"tv_sandwich": bool(ok)})


def run_l2_exact(cfg, pool_map=map):
    lat = _lattice(cfg)
    curve = worst_l2_curve(exact_sw_kernel(lat, cfg.params), cfg.t_max)
    return ExperimentResult([(t, float(v)) for t, v in enumerate(curve)], {}, {})


def run_tv_coupling(cfg, pool_map=map):
    lat = _lattice(cfg)
    curve = ex.tv_upper_via_coupling(lat, cfg.params, cfg.t_max, cfg.replicas, cfg.seed)
    s = _sigma(cfg)
    rows, ok = [], True
    D, p = lat.max_degree, cfg.resolved_p
    for t, e in curve:
        b = ex.coupling_tv_bound(lat.n_vertices, D, p, t)
        rows.append((t, e.value, e.stderr, e.lo, e.hi, b))
        ok &= e.value - s * e.stderr <= b
    checks = {"coupling_bound": bool(ok)} if math.e * D * p <= 1 - 1 / math.sqrt(2) else {}
    return ExperimentResult(rows, {"max_degree": D}, checks)


def _proj_config(cfg):
    return ex.ProjStatConfig(samples=cfg.replicas, reference_samples=cfg.replicas, seed=cfg.seed)


def run_tv_projected(cfg, pool_map=map):
    lat = _lattice(cfg)
    tv, meta = ex.tv_curve_projected(lat, cfg.params, cfg.t_max, _proj_config(cfg))
    return ExperimentResult([(t, e.value, e.stderr, e.lo, e.hi) for t, e in enumerate(tv)], meta, {})


def run_cutoff_scan(cfg, pool_map=map):
    grid = _grid(cfg)
    cc = ex.CutoffConfig(dim=cfg.dim, t_max=cfg.t_max, gap_side=int(cfg.tolerances.get("gap_side", 8)),
                         proj=_proj_config(cfg))
    scan = ex.cutoff_scan(grid, cfg.params, cc)
    rows = [(prof.n, t, e.value, e.stderr, prof.predicted) for prof in scan.profiles for t, e in enumerate(prof.tv)]
    rel = cfg.tolerances.get("cutoff_slope_rel", 0.25)
    checks = {}
    ratios = [scan.ratios[n].get(0.25) for n in grid]
    if len(grid) >= 2:
        checks["ratio_decreases"] = all(a is not None and b is not None and b < a for a, b in zip(ratios, ratios[1:]))
        checks["midpoint_slope"] = (scan.slope is not None
                                    and abs(scan.slope - scan.predicted_slope) <= rel * scan.predicted_slope)
    return ExperimentResult(rows, {"ratios": {str(n): scan.ratios[n] for n in grid}, "slope": scan.slope,
                                   "predicted_slope": scan.predicted_slope, "gamma_star": scan.gamma_star,
                                   "midpoints": [prof.midpoint for prof in scan.profiles],
                                   "t_mix": {str(prof.n): {str(k): v for k, v in prof.t_mix.items()}
                                             for prof in scan.profiles},
                                   "flags": scan.flags}, checks)


def run_path_coupling(cfg, pool_map=map):
    lat = _lattice(cfg)
    e = ex.path_coupling_estimate(lat, cfg.params, cfg.replicas, cfg.seed)
    b = 2 * math.e * lat.max_degree * cfg.resolved_p
    return ExperimentResult([(lat.n_vertices, e.value, e.stderr, b)], {"estimate": e.to_dict(), "bound": b},
                            {"contraction": e.upper(_sigma(cfg)) <= b})


def run_red_survival(cfg, pool_map=map):
    lat = _lattice(cfg)
    curve = red_survival_curve(lat, cfg.params, cfg.t_max, cfg.replicas, cfg.seed)
    a = 3 * math.e * lat.max_degree * cfg.resolved_p
    s = _sigma(cfg)
    rows = [(t, e.value, e.stderr, e.lo, e.hi, a ** t) for t, e in enumerate(curve, start=1)]
    one = 1 - (1 - cfg.resolved_p) ** lat.max_degree
    return ExperimentResult(rows, {"one_step_exact": one},
                            {"survival_bound": all(e.value - s * e.stderr <= a ** t
                                                   for t, e in enumerate(curve, start=1)),
                             "one_step": abs(curve[0].value - one) <= s * max(curve[0].stderr, 1e-12)})


def run_propagation(cfg, pool_map=map):
    lat = _lattice(cfg)
    radius = int(cfg.tolerances.get("radius", 1))
    e = ex.propagation_test(lat, cfg.params, 0, radius, cfg.halo_width, cfg.t_max, cfg.replicas, cfg.seed)
    return ExperimentResult([(cfg.halo_width, e.value, e.stderr, e.lo, e.hi)], {"radius": radius}, {})


def run_support_sparsity(cfg, pool_map=map):
    lat = _lattice(cfg)
    default = ex.SparseParams.scaled(lat)
    sp = ex.SparseParams(cfg.max_components or default.max_components,
                         cfg.max_diameter if cfg.max_diameter is not None else default.max_diameter,
                         cfg.min_separation or default.min_separation)
    geom = BlockGeometry(cfg.block_side or max(1, cfg.side // 4), cfg.halo_width)
    res = ex.support_sparsity_test(lat, cfg.params, cfg.t_max, sp, geom, cfg.replicas, cfg.seed)
    f, m = res["fraction_sparse"], res["mean_support_fraction"]
    return ExperimentResult([(cfg.t_max, f.value, f.stderr, m.value, m.stderr)],
                            {"sparse_params": [sp.max_components, sp.max_diameter, sp.min_separation],
                             "exact_fraction": res["exact_fraction"]}, {})


def run_edge_persistence(cfg, pool_map=map):
    lat = _lattice(cfg)
    out = ex.edge_coupling_persistence(lat, cfg.params, cfg.t_max, cfg.replicas, cfg.seed)
    p, q = cfg.resolved_p, cfg.q
    bound = p * (1 - 1 / q - 2 * cfg.dim * p * p / q)
    s = _sigma(cfg)
    rows, ok = [], True
    for t, e, ratio in out:
        rows.append((t, e.value, e.stderr, _nan(ratio and ratio.value), _nan(ratio and ratio.stderr), bound))
        if ratio is not None and ratio.n >= 30:
            ok &= ratio.value + s * ratio.stderr >= bound
    checks = {"persistence_bound": bool(ok)} if p < (2 * cfg.dim) ** -2.5 else {}
    return ExperimentResult(rows, {}, checks)


def parse_window(spec: str | None, lattice) -> np.ndarray:
    """``"box:c:r"`` (box of radius r around vertex c), ``"all"``, or a comma list of vertices."""
    if spec is None or spec == "all":
        return np.arange(lattice.n_vertices)
    if spec.startswith("box:"):
        try:
            _, c, r = spec.split(":")
            return lattice.box(int(c), int(r))
        except ValueError:
            raise ConfigError(f"[geometry] window: cannot parse {spec!r}") from None
    try:
        return np.array(sorted({int(x) for x in spec.split(",")}))
    except ValueError:
        raise ConfigError(f"[geometry] window: cannot parse {spec!r}") from None


def run_mt_curve(cfg, pool_map=map):
    lat = _lattice(cfg)
    window = parse_window(cfg.window, lat)
    mt = ex.mt_curve(lat, cfg.params, window, cfg.t_max)
    l2 = worst_l2_curve(exact_sw_kernel(lat, cfg.params), cfg.t_max)
    ok = bool(np.all(mt <= l2 * (1 + 1e-9) + 1e-12))
    return ExperimentResult([(t, float(a), float(b)) for t, (a, b) in enumerate(zip(mt, l2))],
                            {"window": window.tolist()}, {"projection_contracts": ok})


EXPERIMENTS = {
    "gap-exact": run_gap_exact,
    "gap-mc": run_gap_mc,
    "gap-scan": run_gap_scan,
    "tv-exact": run_tv_exact,
    "l2-exact": run_l2_exact,
    "tv-coupling": run_tv_coupling,
    "tv-projected": run_tv_projected,
    "cutoff-scan": run_cutoff_scan,
    "path-coupling": run_path_coupling,
    "red-survival": run_red_survival,
    "propagation": run_propagation,
    "support-sparsity": run_support_sparsity,
    "edge-persistence": run_edge_persistence,
    "mt-curve": run_mt_curve,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult) -> tuple[Path, Path]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.file_stem()
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEMAS[cfg.experiment])
        for row in result.rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    doc = {"schema_version": SCHEMA_VERSION, "version": __version__, "experiment": cfg.experiment,
           "config": cfg.to_dict(), "summary": result.summary,
           "checks": result.checks, "advisory_checks": sorted(result.advisory), "passed": result.passed}
    json_path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
