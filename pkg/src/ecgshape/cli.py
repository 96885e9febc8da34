"""Command-line entry point: ``ecgshape <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import density
from .config import ConfigError, parse_config


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return value


def _load_config(args):
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise SystemExit(f"error: cannot read config {args.config}: {exc}")
    overrides = {"seed": args.seed, "out": args.out, "radius": args.radius, "theta_step": args.theta_step}
    try:
        return parse_config(text, **overrides)
    except ConfigError as exc:
        raise SystemExit(f"error: {args.config}: {exc}")


def cmd_solve(args) -> int:
    from .pipeline import run_preset, summarize_manifest

    config = _load_config(args)
    bundle = run_preset(config, cache_dir=args.cache)
    print(summarize_manifest(bundle.directory))
    return 0


def cmd_density(args) -> int:
    from .output import emit_scan
    from .pipeline import analyze
    from .wavefile import load_wavefunction

    psi = load_wavefunction(args.wavefunction)
    particles = [args.particle] if args.particle is not None else psi.system.distinct_heavy_particles()
    out = Path(args.out or ".")
    for p in particles:
        scan, feats, argmax = analyze(psi, p, radius=args.radius, theta_step=args.theta_step or density.DEFAULT_THETA_STEP)
        label = psi.system.particles[p].label or str(p)
        meta = {"config_digest": psi.config_digest or "none", "seed": psi.seed, "particle": f"{p} ({label})", "radius_bohr": "%.12g" % scan.radius}
        csv_path, svg_path = emit_scan(scan, out / f"scan_{psi.system.name}_{label}", metadata=meta)
        print(
            f"particle {p} ({label}): argmax {argmax:.3f} bohr, scan at {scan.radius:.3f} bohr, depth {feats.depth:.4f}, "
            f"minima {list(feats.minimum_angles)}, maxima {list(feats.local_maxima)} -> {csv_path}"
        )
    return 0


def cmd_family(args) -> int:
    from .pipeline import FAMILY_TOLERANCE, family_compare

    seed = 1 if args.seed is None else args.seed
    radius = density.DEFAULT_COMMON_RADIUS if args.radius is None else args.radius
    result = family_compare(seed, radius, args.theta_step or 1.0, args.out or "family", cache_dir=args.cache)
    verdict = "collapsed" if result.collapsed else "distinguishable"
    print(f"max pointwise spread at {radius:g} bohr: {result.max_spread:.5f} (tolerance {FAMILY_TOLERANCE}): {verdict}")
    return 0


def cmd_oracle(args) -> int:
    from .validation import format_rows, run_validation

    rows = run_validation(0 if args.seed is None else args.seed)
    print(format_rows(rows))
    failed = sum(not r.passed for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return 1 if failed else 0


def cmd_report(args) -> int:
    from .pipeline import summarize_manifest

    print(summarize_manifest(args.manifest))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecgshape", description="Non-adiabatic ECG solver and nuclear density-matrix analysis.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=False):
        if config:
            p.add_argument("--config", required=True, help="key = value run configuration")
        p.add_argument("--seed", type=_u64, help="random seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--radius", type=_positive, help="scan radius in bohr")
        p.add_argument("--theta-step", type=_positive, help="angle grid spacing in degrees")

    p = sub.add_parser("solve", help="solve a configuration and write the full bundle")
    common(p, config=True)
    p.add_argument("--cache", help="reuse solved wavefunctions from this directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("density", help="suppression scans from a wavefunction file")
    p.add_argument("wavefunction")
    p.add_argument("--particle", type=int, help="particle index (default: each distinct heavy particle)")
    common(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("family-compare", help="isotopologue spread at a common radius")
    common(p)
    p.add_argument("--cache", help="reuse solved wavefunctions from this directory")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("oracle", help="closed-form integrals against numerical integration")
    p.add_argument("--seed", type=_u64)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="summarize a run manifest")
    p.add_argument("manifest", help="manifest.json or its directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
