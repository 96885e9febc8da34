"""
Heavier nuclei and stronger nuclear charges
===========================================

Two series of H2-like molecules.  Changing the nuclear mass from the muon
to the triton barely changes the suppression curve at a fixed radius;
scaling the nuclear charge binds the electrons more tightly and makes the
suppression stronger.

Run from the repository root::

    python notebooks/02_mass_and_charge.py
"""
from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ecgshape.config import preset_config
from ecgshape.density import extract_features, suppression_scan
from ecgshape.pipeline import family_compare, solve_config

OUT = Path("notebook_output")
OUT.mkdir(exist_ok=True)
CACHE = ".ecg-cache"

# %%
# The mass series
# ---------------
# ``family_compare`` scans mu2, h2, d2 and t2 at 0.7 bohr and reports the
# largest spread between the ratio curves.
family = family_compare(cache_dir=CACHE, out=OUT / "family")
print(f"largest spread across the mass series: {family.max_spread:.4f}")

# %%
# The charge series
# -----------------
# Nuclear charges Z > 1 with two electrons give a series of model
# molecules.  Each is scanned at its own diagonal-maximum radius.
fig, ax = plt.subplots()
for z in (1.0, 1.2, 1.4, 1.65):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        psi = solve_config(preset_config("h2z", z=z), cache_dir=CACHE)
    scan = suppression_scan(psi, 0)
    feats = extract_features(scan)
    print(f"Z = {z:4.2f}: radius {scan.radius:.3f} bohr, depth {feats.depth:.4f}")
    ax.plot(scan.theta_grid, scan.ratio, label=f"Z = {z:g}")
ax.legend()
ax.set_xlabel("theta (deg)")
ax.set_ylabel("rho(R, O R) / rho(R, R)")
fig.savefig(OUT / "charge_series.svg")
