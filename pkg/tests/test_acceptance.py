"""End-to-end acceptance checks on full default-budget solves.

Solves are cached in ``.ecg-cache`` keyed by the config digest; a cold
cache costs about seven minutes of single-core time.  Each criterion records a
PASS/FAIL line that is printed in the terminal summary.
"""
from __future__ import annotations

import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from ecgshape.config import preset_config
from ecgshape.density import extract_features, radial_argmax, suppression_scan
from ecgshape.pipeline import FAMILY, FAMILY_TOLERANCE, convergence, family_compare, solve_config
from ecgshape.validation import run_validation
from ecgshape.wavefile import format_wavefunction, parse_wavefunction

pytestmark = pytest.mark.slow

CHARGES = (1.0, 1.2, 1.4, 1.65)
PRESETS = [("ps2", None), ("mu2", None), ("h2", None), ("d2", None), ("t2", None), ("hehp", None)] + [("h2z", z) for z in CHARGES]
# a periodicity defect below this is numerical noise, above it a real 360 degree pattern
MATERIAL_DEFECT = 1e-3


def _angle_near(angles, target, tol):
    return any(abs(a - target) <= tol for a in angles)


@pytest.fixture(scope="module")
def solved(cache_dir):
    cache = {}

    def get(name, z=None):
        key = (name, z)
        if key not in cache:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cfg = preset_config(name, z=z) if z is not None else preset_config(name)
                cache[key] = solve_config(cfg, cache_dir)
        return cache[key]

    return get


def test_h2_diagonal_maximum(solved, criterion):
    psi = solved("h2")
    t0 = time.perf_counter()
    r = radial_argmax(psi, 0)
    suppression_scan(psi, 0, r)
    elapsed = time.perf_counter() - t0
    ok = 0.65 <= r <= 0.75 and elapsed <= 60
    assert criterion(1, ok, f"h2 nuclear density maximum at {r:.4f} bohr (want [0.65, 0.75]); density stage {elapsed:.1f} s")


def test_h2_suppression(solved, criterion):
    f = extract_features(suppression_scan(solved("h2"), 0, 0.7))
    ok = _angle_near(f.minimum_angles, 90, 2) and abs(f.depth - 0.05) <= 0.01 and f.periodicity_defect < 0.01
    assert criterion(2, ok, f"h2 at 0.7 bohr: minima {f.minimum_angles}, depth {f.depth:.4f} (want 0.05 +- 0.01), d180 {f.periodicity_defect:.1e}")


def test_family_collapse(solved, cache_dir, criterion):
    for name in FAMILY:
        solved(name)
    res = family_compare(cache_dir=cache_dir)
    depths = ", ".join(f"{n} {1 - s.ratio.min():.4f}" for n, s in res.scans.items())
    ok = res.max_spread <= FAMILY_TOLERANCE
    assert criterion(3, ok, f"max spread {res.max_spread:.4f} at 0.7 bohr (want <= {FAMILY_TOLERANCE}); depths {depths}")


def test_charge_series(solved, criterion):
    depths = []
    for z in CHARGES:
        scan = suppression_scan(solved("h2z", z), 0, None, np.array([0.0, 90.0]))
        depths.append(1.0 - scan.ratio[1])
    monotone = all(b > a for a, b in zip(depths, depths[1:]))
    ok = monotone and abs(depths[-1] - 0.08) <= 0.015
    text = ", ".join(f"Z={z:g}: {d:.4f}" for z, d in zip(CHARGES, depths))
    assert criterion(4, ok, f"depth at 90 deg, diagonal-maximum radius: {text} (want Z=1.65 at 0.08 +- 0.015, increasing)")


def test_ps2_pattern(solved, criterion):
    psi = solved("ps2")
    origin = radial_argmax(psi, 0)
    shell = radial_argmax(psi, 0, shell=True)
    found, summary = None, []
    for radius in shell * np.linspace(0.7, 1.3, 7):
        f = extract_features(suppression_scan(psi, 0, radius))
        summary.append(f"{radius:.2f}:{f.depth:.3f}")
        if (
            abs(f.depth - 0.01) <= 0.005
            and _angle_near(f.minimum_angles, 139, 10)
            and _angle_near(f.minimum_angles, 221, 10)
            and 180.0 in f.local_maxima
            and f.periodicity_defect > MATERIAL_DEFECT
        ):
            found = radius
    ok = origin == 0.0 and found is not None
    assert criterion(
        5,
        ok,
        f"ps2 diagonal maximum at {origin:.3f} bohr; sweep over {shell:.3f} bohr +- 30% (radius:depth) {' '.join(summary)}; "
        f"matching radius {found}",
    )


def test_ps2_pattern_at_common_radius(solved, criterion):
    # supplementary: the mass-series figure shows every curve at 0.7 bohr
    psi = solved("ps2")
    f = extract_features(suppression_scan(psi, 0, 0.7))
    ok = (
        radial_argmax(psi, 0) == 0.0
        and abs(f.depth - 0.01) <= 0.005
        and _angle_near(f.minimum_angles, 139, 10)
        and _angle_near(f.minimum_angles, 221, 10)
        and 180.0 in f.local_maxima
        and f.periodicity_defect > MATERIAL_DEFECT
    )
    assert criterion("5b", ok, f"ps2 at 0.7 bohr: minima {f.minimum_angles}, maxima {f.local_maxima}, depth {f.depth:.4f}, d180 {f.periodicity_defect:.3f}")


def test_hehp_pattern(solved, criterion):
    psi = solved("hehp")
    lines, ok = [], True
    for p in psi.system.distinct_heavy_particles():
        scan = suppression_scan(psi, p)
        f = extract_features(scan)
        band = (scan.theta_grid >= 100) & (scan.theta_grid <= 300)
        worst = scan.ratio[band].max()
        ok &= (
            _angle_near(f.minimum_angles, 120, 10)
            and _angle_near(f.minimum_angles, 240, 10)
            and abs(f.depth - 0.10) <= 0.03
            and 180.0 in f.local_maxima
            and worst <= 0.97
        )
        label = psi.system.particles[p].label
        lines.append(f"{label} r={scan.radius:.3f}: minima {f.minimum_angles}, maxima {f.local_maxima}, depth {f.depth:.4f}, max ratio on [100,300] {worst:.4f}")
    assert criterion(6, ok, "; ".join(lines))


def test_energy_convergence(solved, criterion):
    rows, ok = [], True
    for name, z in PRESETS:
        rep = convergence(solved(name, z))
        good = abs(rep.relative_delta_energy) < 0.01 and -2.02 <= rep.virial_ratio <= -1.98
        ok &= good
        label = name if z is None else f"h2z({z:g})"
        rows.append(f"{label} dE/E {rep.relative_delta_energy:.4f} virial {rep.virial_ratio:.4f}{'' if good else ' !'}")
    assert criterion(7, ok, "; ".join(rows))


def test_property_suite(solved, criterion):
    rows = run_validation(seed=0)
    oracle_ok = all(r.passed for r in rows)
    text = format_wavefunction(solved("h2"))
    roundtrip = format_wavefunction(parse_wavefunction(text)) == text
    tests = Path(__file__).parent
    files = sorted(str(p) for p in tests.glob("test_*.py") if p.name != Path(__file__).name)
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files], capture_output=True, text=True, timeout=900)
    elapsed = time.perf_counter() - t0
    ok = oracle_ok and roundtrip and proc.returncode == 0 and elapsed <= 300
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else ""
    assert criterion(
        8,
        ok,
        f"oracle rows {sum(r.passed for r in rows)}/{len(rows)} pass; file round trip {'identical' if roundtrip else 'DIFFERS'}; "
        f"property suite '{tail}' in {elapsed:.0f} s (limit 300 s)",
    )
