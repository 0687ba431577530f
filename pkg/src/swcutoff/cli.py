"""Command-line runner: ``swcutoff run|plot|list-experiments|validate-config``.

Exit codes: 0 success, 2 a bound check failed (outputs are still written),
1 configuration or execution error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from swcutoff import __version__
from swcutoff.config import load_config
from swcutoff.errors import ConfigError

log = logging.getLogger("swcutoff")

EXIT_OK, EXIT_ERROR, EXIT_BOUND = 0, 1, 2

PLOT_COLUMNS = {
    "tv-curve": ("t", "tv"),
    "l2-curve": ("t", "l2"),
    "cutoff-profile": ("n", "t", "tv", "predicted"),
    "gap-scan": ("r", "gamma"),
}


def _read_csv(path: str | Path, kind: str) -> list[dict]:
    if kind not in PLOT_COLUMNS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_COLUMNS)}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        rows = list(reader)
    missing = [c for c in PLOT_COLUMNS[kind] if c not in cols]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {', '.join(missing)} for plot kind {kind!r}")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def emit_plot(csv_path: str | Path, kind: str, out: str | Path | None = None, logy: bool = False) -> Path:
    """Render a CSV written by ``run`` to an SVG file and return its path."""
    rows = _read_csv(csv_path, kind)
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out) if out else Path(csv_path).with_suffix(".svg")
    fig, ax = plt.subplots(figsize=(6, 4))
    f = lambda r, k: float(r[k]) if r.get(k) not in (None, "") else float("nan")
    if kind in ("tv-curve", "l2-curve"):
        y = "tv" if kind == "tv-curve" else "l2"
        ax.plot([f(r, "t") for r in rows], [f(r, y) for r in rows], marker="o")
        if "lo" in rows[0] and "hi" in rows[0]:
            ax.fill_between([f(r, "t") for r in rows], [f(r, "lo") for r in rows], [f(r, "hi") for r in rows],
                            alpha=0.25)
        ax.set_xlabel("t")
        ax.set_ylabel("TV distance" if y == "tv" else "L2 distance")
    elif kind == "cutoff-profile":
        ns = sorted({int(float(r["n"])) for r in rows})
        for n in ns:
            sub = [r for r in rows if int(float(r["n"])) == n]
            line, = ax.plot([f(r, "t") for r in sub], [f(r, "tv") for r in sub], marker="o", label=f"n={n}")
            ax.axvline(f(sub[0], "predicted"), color=line.get_color(), linestyle="--", linewidth=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("TV distance")
        ax.legend()
    else:
        r_ = [f(r, "r") for r in rows]
        g = [f(r, "gamma") for r in rows]
        if "lo" in rows[0] and "hi" in rows[0]:
            ax.errorbar(r_, g, yerr=[[gi - f(r, "lo") for gi, r in zip(g, rows)],
                                     [f(r, "hi") - gi for gi, r in zip(g, rows)]], marker="o", capsize=3)
        else:
            ax.plot(r_, g, marker="o")
        for col, style in (("lower", ":"), ("upper", "--")):
            if col in rows[0] and any(r[col] for r in rows):
                ax.plot(r_, [f(r, col) for r in rows], linestyle=style, color="gray", label=col)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("r")
        ax.set_ylabel("spectral gap")
    if logy:
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _overrides(args) -> dict:
    ov = _parse_set(args.set)
    if args.seed is not None:
        ov["seed"] = str(args.seed)
    if args.output_dir is not None:
        ov["output_dir"] = args.output_dir
    return ov


def cmd_run(args) -> int:
    from swcutoff.runners import EXPERIMENTS, write_outputs
    cfg = load_config(args.config, _overrides(args), registered=EXPERIMENTS)
    runner = EXPERIMENTS[cfg.experiment]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            result = runner(cfg, pool.map)
    else:
        result = runner(cfg)
    csv_path, json_path = write_outputs(cfg, result)
    for name, ok in result.checks.items():
        note = " (advisory: precondition not met)" if name in result.advisory else ""
        print(f"{name}: {'pass' if ok else 'FAIL'}{note}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if result.passed else EXIT_BOUND


def cmd_plot(args) -> int:
    out = emit_plot(args.csv, args.kind, args.out, args.logy)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_list(args) -> int:
    from swcutoff.runners import EXPERIMENTS, SCHEMAS
    for name in EXPERIMENTS:
        print(f"{name}: {','.join(SCHEMAS[name])}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from swcutoff.runners import EXPERIMENTS
    cfg = load_config(args.config, _overrides(args), registered=EXPERIMENTS)
    sys.stdout.write(cfg.to_ini())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swcutoff", description="Swendsen-Wang mixing experiments")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("config", help="INI experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")

    p = sub.add_parser("run", help="run an experiment")
    config_args(p)
    p.add_argument("--workers", type=int, default=1, help="process pool size for grid experiments")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="render a result CSV to SVG")
    p.add_argument("csv")
    p.add_argument("--kind", required=True, choices=sorted(PLOT_COLUMNS))
    p.add_argument("--out")
    p.add_argument("--logy", action="store_true", help="log-scale y axis for decay curves")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("list-experiments", help="list registered experiments and their CSV columns")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("validate-config", help="parse a config and print the resolved form")
    config_args(p)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
