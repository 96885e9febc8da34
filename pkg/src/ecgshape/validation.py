"""Closed-form integrals against the numerical oracle on random ECGs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integrals
from .ecg import SymmetrizedEcg, random_primitive, symmetrize
from .oracle import quadrature_oracle
from .system import Particle, SystemDefinition, build_frame, build_system

QUADRATURE_RTOL = 1e-6
QMC_SIGMAS = 3.0


def validation_systems() -> list[SystemDefinition]:
    """Small systems covering one, two and three frame coordinates."""
    p, e = Particle(1836.15, 1.0, "p"), Particle(1.0, -1.0, "e")
    return [
        SystemDefinition((p, e), (), "h_atom"),
        SystemDefinition((p, e, e), ((1, 2),), "h_minus"),
        SystemDefinition((Particle(1.0, 1.0, "e+"), e, e), ((1, 2),), "ps_minus"),
        build_system("h2"),
    ]


@dataclass(frozen=True)
class ValidationRow:
    system: str
    n: int
    operator: str
    analytic: float
    numeric: float
    error: float
    method: str

    @property
    def deviation(self) -> float:
        return abs(self.analytic - self.numeric)

    @property
    def passed(self) -> bool:
        if self.method == "qmc":
            return self.deviation <= QMC_SIGMAS * self.error
        return self.deviation <= QUADRATURE_RTOL * max(abs(self.analytic), 1e-300)


def validate_system(system: SystemDefinition, rng: np.random.Generator, *, qmc_points: int = 2**14) -> list[ValidationRow]:
    # a light reference particle keeps the Gaussians round enough for
    # adaptive cubature; heavy-particle frames produce needle-like integrands
    light = int(np.argmin(system.masses))
    frame = build_frame(system, light)
    n = frame.n_coords
    # compact Gaussians keep the adaptive quadrature cheap; only the bra is
    # symmetrized, which still exercises the term sums at a quarter of the cost
    f = symmetrize(random_primitive(rng, system, frame, (0.3, 2.0)), system, frame)
    g = SymmetrizedEcg.single(random_primitive(rng, system, frame, (0.3, 2.0)).A, frame.frame_id)
    seed = int(rng.integers(2**32))
    rows = []
    kw = dict(qmc_points=qmc_points, seed=seed)
    res = quadrature_oracle(f, "overlap", g, **kw)
    rows.append(ValidationRow(system.name, n, "overlap", integrals.overlap(f, g), res.value, res.error, res.method))
    res = quadrature_oracle(f, "kinetic", g, mass_matrix=frame.mass_matrix, **kw)
    rows.append(ValidationRow(system.name, n, "kinetic", integrals.kinetic(f, g, frame.mass_matrix), res.value, res.error, res.method))
    for pair in integrals.pair_interactions(system, frame):
        res = quadrature_oracle(f, "coulomb", g, pair_vector=pair.w, prefactor=pair.prefactor, **kw)
        rows.append(
            ValidationRow(system.name, n, f"coulomb{pair.i}{pair.j}", integrals.coulomb_pair(f, g, pair), res.value, res.error, res.method)
        )
    return rows


def run_validation(seed: int = 0, systems=None) -> list[ValidationRow]:
    rng = np.random.default_rng(seed)
    rows = []
    for system in validation_systems() if systems is None else systems:
        rows.extend(validate_system(system, rng))
    return rows


def format_rows(rows) -> str:
    out = [f"{'system':10s} {'n':>2s} {'operator':10s} {'analytic':>22s} {'numeric':>22s} {'error':>9s} {'method':10s} ok"]
    for r in rows:
        out.append(
            f"{r.system:10s} {r.n:2d} {r.operator:10s} {r.analytic:22.15e} {r.numeric:22.15e} {r.error:9.2e} {r.method:10s} {'yes' if r.passed else 'NO'}"
        )
    return "\n".join(out)
