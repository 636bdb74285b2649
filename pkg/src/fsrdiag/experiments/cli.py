"""Command-line entry point: ``fsrdiag <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..exceptions import FsrDiagError
from ..samplers import ABLATIONS, METHODS
from .config import ExperimentConfig, load_config
from .render import GAMMA, render_heatmap
from .runner import (
    load_field,
    run_convergence,
    run_panel,
    run_tv_curve,
    run_zeta_sweep,
    write_manifest,
)
from .targets import CONVERGENCE_TARGETS, PANEL_TARGETS, find_target

DEFAULT_SWEEP_TARGET = "bi_asym__identity_lownoise__y=+0.3000"


def _methods(text):
    if text is None:
        return None
    ms = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in ms if m not in METHODS + ABLATIONS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {METHODS + ABLATIONS}")
    return ms


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--out", type=Path, help="output directory (default: config out_dir)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--methods", type=_methods, help="comma-separated sampler subset")
    p.add_argument("--target", action="append", help="bundled target name (repeatable)")
    p.add_argument("--K", type=int, help="trajectories per sampler run")
    p.add_argument("--fsr-n", type=int, dest="fsr_n", help="FSR dataset size")
    p.add_argument("--repeats", type=int, help="dataset repeats for convergence")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsrdiag", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("panel", "posterior fields, heatmaps and TV table per target"),
        ("convergence", "median FSR TV against dataset size"),
        ("zeta-sweep", "zeta-DPS grid search per target"),
        ("tv-curve", "TV against time for FSR and each method"),
    ]:
        _common(sub.add_parser(name, help=help_))
    r = sub.add_parser("render", help="render a saved field (.npz) to PNG")
    r.add_argument("field", type=Path)
    r.add_argument("--reference", type=Path, help="field supplying the colour ceiling")
    r.add_argument("--out", type=Path, required=True, help="PNG path")
    r.add_argument("--gamma", type=float, default=GAMMA)
    return ap


def _config(args, default_targets) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig(targets=tuple(default_targets))
    targets = tuple(find_target(n) for n in args.target) if args.target else None
    if targets is None and not args.config:
        targets = tuple(default_targets)
    return cfg.with_overrides(
        seed=args.seed,
        methods=args.methods,
        targets=targets,
        K=args.K,
        fsr_n=args.fsr_n,
        repeats=args.repeats,
        out_dir=str(args.out) if args.out else None,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "render":
            ref = load_field(args.reference) if args.reference else None
            render_heatmap(load_field(args.field), ref, args.out, gamma=args.gamma)
            print(args.out)
            return 0

        defaults = {
            "panel": PANEL_TARGETS,
            "tv-curve": PANEL_TARGETS,
            "convergence": CONVERGENCE_TARGETS,
            "zeta-sweep": [find_target(DEFAULT_SWEEP_TARGET)],
        }[args.command]
        cfg = _config(args, defaults)
        out = Path(cfg.out_dir)
        files, extra = [], {}
        if args.command == "panel":
            for t in cfg.targets:
                files += run_panel(cfg, t, out).files
        elif args.command == "tv-curve":
            for t in cfg.targets:
                files += run_tv_curve(cfg, t, out).files
        elif args.command == "convergence":
            res = run_convergence(cfg, out)
            files += sorted((out / "convergence").glob("*.csv"))
            extra["slopes"] = {r.target: dict(zip(map(str, r.times), r.slopes)) for r in res}
            for r in res:
                print(r.target, " ".join(f"t={t}:{s:+.3f}" for t, s in zip(r.times, r.slopes)))
        else:
            extra["zeta_star"] = {}
            for t in cfg.targets:
                rep = run_zeta_sweep(cfg, t, out)
                files += rep.files
                extra["zeta_star"][t.name] = rep.zeta_star
                print(f"{t.name} zeta*={rep.zeta_star:.2f}")
        print(write_manifest(out, args.command, cfg, files, extra))
        return 0
    except (FsrDiagError, KeyError, ValueError, OSError) as exc:
        print(f"fsrdiag {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
