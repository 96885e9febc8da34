"""
Orientational decoherence of the hydrogen molecule
==================================================

Solve H2 with all four particles treated quantum mechanically, then look at
how strongly the nuclear reduced density matrix suppresses coherence
between rotated copies of a nuclear configuration.

Run from the repository root::

    python notebooks/01_hydrogen_molecule.py

The solve takes about a minute and is cached in ``.ecg-cache``.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ecgshape.config import preset_config
from ecgshape.density import density_diag, extract_features, radial_argmax, radial_grid, suppression_scan
from ecgshape.pipeline import convergence, solve_config

OUT = Path("notebook_output")
OUT.mkdir(exist_ok=True)

# %%
# The variational solve
# ---------------------
# The default budget grows 128 correlated Gaussians in two stages and
# refines them.  The report compares the final energy with the energy at
# half the basis size and checks the virial ratio.
psi = solve_config(preset_config("h2"), cache_dir=".ecg-cache")
report = convergence(psi)
print(f"E = {report.energy:.6f} hartree, |dE/E| = {report.relative_delta_energy:.4f}, <V>/<T> = {report.virial_ratio:.4f}")

# %%
# Where is a proton?
# ------------------
# The diagonal density of particle 0 is spherically symmetric.  Its maximum
# sits near half the bond length, since the nuclei move about their common
# centre of mass.
r = radial_grid(3.0)
rho = density_diag(psi, 0, r)
r_max = radial_argmax(psi, 0)
print(f"proton density peaks at |R| = {r_max:.3f} bohr")

fig, ax = plt.subplots()
ax.plot(r, rho)
ax.axvline(r_max, ls="--", color="0.5")
ax.set_xlabel("|R| (bohr)")
ax.set_ylabel("rho(R, R)")
fig.savefig(OUT / "h2_diagonal.svg")

# %%
# Coherence between rotated configurations
# ----------------------------------------
# Rotating R by an angle theta and comparing rho(R, O R) with rho(R, R)
# shows how much the electrons "know" about the orientation.  For H2 the
# ratio dips by about 5 percent at 90 degrees and is symmetric about 180
# degrees, as expected for a homonuclear molecule.
scan = suppression_scan(psi, 0, 0.7)
feats = extract_features(scan)
print(f"minima at {feats.minimum_angles} deg, depth {feats.depth:.4f}, 180-degree defect {feats.periodicity_defect:.1e}")

fig, ax = plt.subplots()
ax.plot(scan.theta_grid, scan.ratio)
ax.set_xlabel("theta (deg)")
ax.set_ylabel("rho(R, O R) / rho(R, R)")
fig.savefig(OUT / "h2_scan.svg")
print(f"ratio at 90 deg: {scan.ratio[np.argmin(np.abs(scan.theta_grid - 90))]:.4f}")
