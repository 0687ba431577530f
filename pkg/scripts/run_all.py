"""Run every shipped config and render the plots that apply to its CSV.

Usage: python3 scripts/run_all.py [--output-dir results] [--seed 0] [--only NAME ...] [--quick]

--quick caps replicas at 2000 so the whole sweep finishes in a few minutes on one core.
"""
import argparse
import sys
from pathlib import Path

from swcutoff.cli import EXIT_ERROR, emit_plot, main
from swcutoff.config import load_config

ROOT = Path(__file__).resolve().parents[1]
PLOTS = {"tv-exact": ("tv-curve", True), "l2-exact": ("l2-curve", True), "cutoff-scan": ("cutoff-profile", False),
         "gap-scan": ("gap-scan", False)}


def run(cfg_path: Path, out: Path, seed: int, quick: bool) -> int:
    argv = ["run", str(cfg_path), "--output-dir", str(out), "--seed", str(seed)]
    cfg = load_config(cfg_path)
    if quick and cfg.replicas > 2000:
        argv += ["--set", "dynamics.replicas=2000"]
    code = main(argv)
    if code != EXIT_ERROR and cfg.experiment in PLOTS:
        kind, logy = PLOTS[cfg.experiment]
        for csv in sorted(out.glob(f"{cfg.experiment}_*.csv")):
            emit_plot(csv, kind, logy=logy)
    return code


def cli(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output-dir", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", nargs="*", default=None)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    out = Path(args.output_dir)
    worst = 0
    for cfg_path in sorted((ROOT / "configs").glob("*.ini")):
        if args.only and cfg_path.stem not in args.only:
            continue
        code = run(cfg_path, out, args.seed, args.quick)
        print(f"{cfg_path.stem}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(cli())
