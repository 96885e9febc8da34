"""Preset orchestration: solve, analyze, and write a reproducible bundle."""
from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import density
from .config import RunConfig, preset_config
from .engine import ConvergenceReport, GrowthStep, Wavefunction, converge_report, solve
from .output import emit_overlay, emit_scan
from .wavefile import WavefunctionFileError, load_wavefunction, save_wavefunction

log = logging.getLogger(__name__)

FAMILY = ("mu2", "h2", "d2", "t2")
FAMILY_TOLERANCE = 0.01


def _versions() -> dict[str, str]:
    import scipy
    from importlib import metadata

    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "package": pkg}


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def solve_config(config: RunConfig, cache_dir=None) -> Wavefunction:
    """Solve for ``config``; reuse ``<cache_dir>/<digest>.ecgwf`` when present."""
    cached = Path(cache_dir) / f"{config.digest}.ecgwf" if cache_dir is not None else None
    if cached is not None and cached.exists():
        try:
            psi = load_wavefunction(cached)
        except WavefunctionFileError as exc:
            warnings.warn(f"ignoring unreadable cache {cached}: {exc}", RuntimeWarning, stacklevel=2)
        else:
            history = cached.with_suffix(".history.json")
            if psi.config_digest == config.digest and history.exists():
                steps = tuple(GrowthStep(**h) for h in json.loads(history.read_text(encoding="utf-8")))
                return replace(psi, history=steps)
    psi = solve(
        config.system(),
        seed=config.seed,
        basis_size=config.basis_target,
        trials=config.trials,
        refine_cycles=config.refine_cycles,
        scale_range=(config.d_min, config.d_max),
        config_digest=config.digest,
    )
    if cached is not None:
        cached.parent.mkdir(parents=True, exist_ok=True)
        save_wavefunction(psi, cached)
        cached.with_suffix(".history.json").write_text(json.dumps([asdict(h) for h in psi.history]), encoding="utf-8")
    return psi


def convergence(psi: Wavefunction) -> ConvergenceReport:
    """Report from the growth history, or from scratch for a loaded file.

    Matrices are rebuilt from the stored basis, so a fresh solve and its
    saved file give bit-identical reports.
    """
    psi._cache.pop("matrices", None)
    if psi.history:
        return converge_report(psi.history, psi)
    from .engine import matrices, solve_gevp

    # loaded files carry no history: use the leading half of the basis
    S, T, V = matrices(psi)
    half = psi.size // 2
    e_half = solve_gevp(T[:half, :half] + V[:half, :half], S[:half, :half]).ground_energy
    return converge_report([GrowthStep(half, e_half, -1, 0), GrowthStep(psi.size, psi.energy, -1, 0)], psi)


@dataclass
class ScanRecord:
    particle: int
    label: str
    radius: float
    diagonal_argmax: float
    shell_argmax: float
    minimum_value: float
    minimum_angles: list[float]
    local_maxima: list[float]
    periodicity_defect: float
    depth: float
    csv: str
    svg: str
    csv_sha256: str = ""


@dataclass
class Bundle:
    directory: Path
    wavefunction: Wavefunction
    report: ConvergenceReport
    scans: list[density.DensityScan]
    records: list[ScanRecord]
    manifest: dict = field(repr=False)

    @property
    def manifest_digest(self) -> str:
        return self.manifest["digest"]


def _manifest_digest(manifest: dict) -> str:
    stable = {k: v for k, v in manifest.items() if k not in ("timings", "digest")}
    return hashlib.sha256(json.dumps(stable, sort_keys=True).encode()).hexdigest()


def analyze(psi: Wavefunction, particle: int, *, radius: float | None = None, theta_step: float = 1.0):
    """Scan and features for one particle at ``radius`` (default: diagonal maximum)."""
    argmax = density.radial_argmax(psi, particle)
    if radius is None:
        radius = density.default_scan_radius(psi, particle)
    scan = density.suppression_scan(psi, particle, radius, density.theta_grid(theta_step))
    return scan, density.extract_features(scan), argmax


def run_preset(config: RunConfig, out=None, *, cache_dir=None) -> Bundle:
    """Solve, analyze every distinct heavy particle, emit scans and a manifest."""
    out = Path(config.out if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    psi = solve_config(config, cache_dir)
    timings["solve_s"] = time.perf_counter() - t0
    wf_path = save_wavefunction(psi, out / "wavefunction.ecgwf")

    t0 = time.perf_counter()
    report = convergence(psi)
    flag = "converged" if report.converged else "non-converged"
    meta = {"config_digest": config.digest, "seed": config.seed, "status": flag}
    scans, records = [], []
    for p in psi.system.distinct_heavy_particles():
        label = psi.system.particles[p].label or str(p)
        scan, feats, argmax = analyze(psi, p, radius=config.radius, theta_step=config.theta_step)
        name = f"scan_{psi.system.name}_{label}"
        csv_path, svg_path = emit_scan(
            scan,
            out / name,
            metadata={**meta, "particle": f"{p} ({label})", "radius_bohr": "%.12g" % scan.radius},
            title=f"{psi.system.name}: {label}, |R| = {scan.radius:.3f} bohr",
        )
        scans.append(scan)
        records.append(
            ScanRecord(
                particle=p,
                label=label,
                radius=scan.radius,
                diagonal_argmax=argmax,
                shell_argmax=density.radial_argmax(psi, p, shell=True),
                minimum_value=feats.minimum_value,
                minimum_angles=list(feats.minimum_angles),
                local_maxima=list(feats.local_maxima),
                periodicity_defect=feats.periodicity_defect,
                depth=feats.depth,
                csv=csv_path.name,
                svg=svg_path.name,
                csv_sha256=_sha256(csv_path),
            )
        )
    timings["density_s"] = time.perf_counter() - t0

    manifest = {
        "system": psi.system.name,
        "config": config.canonical_text().splitlines(),
        "config_digest": config.digest,
        "defaults_used": list(config.defaults_used),
        "seed": config.seed,
        "versions": _versions(),
        "status": flag,
        "convergence": asdict(report),
        "wavefunction": {"file": wf_path.name, "sha256": _sha256(wf_path)},
        "scans": [asdict(r) for r in records],
        "timings": timings,
    }
    manifest["digest"] = _manifest_digest(manifest)
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not report.converged:
        warnings.warn(f"{psi.system.name}: convergence criteria not met", RuntimeWarning, stacklevel=2)
    return Bundle(out, psi, report, scans, records, manifest)


@dataclass
class FamilyComparison:
    radius: float
    names: tuple[str, ...]
    scans: dict[str, density.DensityScan]
    max_spread: float
    spread: np.ndarray

    @property
    def collapsed(self) -> bool:
        return self.max_spread <= FAMILY_TOLERANCE


def family_compare(
    seed: int = 1,
    radius: float = density.DEFAULT_COMMON_RADIUS,
    theta_step: float = 1.0,
    out=None,
    *,
    names=FAMILY,
    cache_dir=None,
    settings: dict | None = None,
) -> FamilyComparison:
    """Scan each isotopologue at a common radius and report the largest spread.

    The spread at an angle is ``max - min`` of the ratios over the family,
    which bounds every pairwise difference.
    """
    grid = density.theta_grid(theta_step)
    scans = {}
    for name in names:
        cfg = preset_config(name, seed=seed, **(settings or {}))
        psi = solve_config(cfg, cache_dir)
        p = psi.system.distinct_heavy_particles()[0]
        scans[name] = density.suppression_scan(psi, p, radius, grid)
    ratios = np.array([s.ratio for s in scans.values()])
    spread = ratios.max(0) - ratios.min(0)
    result = FamilyComparison(radius, tuple(names), scans, float(spread.max()), spread)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        lines = [f"# seed: {seed}", f"# radius_bohr: {radius:.12g}", "theta_deg," + ",".join(names) + ",spread"]
        for k, t in enumerate(grid):
            lines.append(",".join(["%.12g" % t] + [f"{r[k]:.12f}" for r in ratios] + [f"{spread[k]:.12f}"]))
        (out / "family_compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        emit_overlay(scans.values(), names, out / "family_compare", title=f"common radius {radius:g} bohr", metadata={"seed": seed})
        summary = {"radius": radius, "seed": seed, "max_spread": result.max_spread, "tolerance": FAMILY_TOLERANCE, "collapsed": result.collapsed}
        (out / "family_compare.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


def summarize_manifest(path) -> str:
    """Human-readable summary of a run manifest."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    m = json.loads(path.read_text(encoding="utf-8"))
    c = m["convergence"]
    lines = [
        f"system        {m['system']}  ({m['status']})",
        f"seed          {m['seed']}",
        f"config        {m['config_digest'][:16]}",
        f"energy        {c['energy']:.8f} hartree  (M = {c['basis_size']})",
        f"|dE/E|        {c['relative_delta_energy']:.2e} over the last doubling",
        f"virial        {c['virial_ratio']:.5f}",
    ]
    for s in m["scans"]:
        lines.append(
            f"particle {s['particle']} ({s['label']}): r = {s['radius']:.3f} bohr, depth {s['depth']:.4f}, "
            f"minima {s['minimum_angles']}, maxima {s['local_maxima']}, d180 {s['periodicity_defect']:.2e}"
        )
    t = m.get("timings", {})
    if t:
        lines.append("timings       " + ", ".join(f"{k} {v:.1f}" for k, v in t.items()))
    return "\n".join(lines)
