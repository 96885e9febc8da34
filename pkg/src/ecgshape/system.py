"""Particle systems and center-of-mass-centered translationally invariant frames.

A frame maps lab positions ``r`` (N x 3) to N-1 coordinates ``x = U r`` where
every row of ``U`` sums to zero.  The frames built here use the positions of
all particles but one, measured from the center of mass::

    x_1 = r_ref - R_cm,  x_2 = r_a - R_cm, ...

The particle that is left out (``eliminated``) is fixed by the center-of-mass
condition.  Which particle is left out does not matter for integrals, but it
does matter for the off-diagonal one-particle density, where the remaining
coordinates are held fixed while the reference particle moves.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MUON_MASS = 206.768
PROTON_MASS = 1836.15
DEUTERON_MASS = 3670.48
TRITON_MASS = 5496.92
ALPHA_MASS = 7294.29954142  # CODATA 2018

PRESETS = ("ps2", "mu2", "h2", "d2", "t2", "h2z", "hehp")


class UnboundSystemWarning(UserWarning):
    """Raised for charge-scaled H2-like systems that have no bound state."""


@dataclass(frozen=True)
class Particle:
    mass: float
    charge: float
    label: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ValueError(f"particle mass must be positive, got {self.mass!r}")
        if not np.isfinite(self.charge):
            raise ValueError(f"particle charge must be finite, got {self.charge!r}")


@dataclass(frozen=True)
class SystemDefinition:
    """Particles plus the groups of identical particles.

    Every group carries a spatially symmetric projector, which is what a
    spin singlet of two fermions requires.  Only ``L = 0``, even-parity
    states are supported.
    """

    particles: tuple[Particle, ...]
    identical_groups: tuple[tuple[int, ...], ...] = ()
    name: str = "custom"

    total_angular_momentum = 0
    parity = +1

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))
        object.__setattr__(
            self, "identical_groups", tuple(tuple(int(i) for i in g) for g in self.identical_groups)
        )
        n = len(self.particles)
        if n < 2:
            raise ValueError("a system needs at least two particles")
        if n > 6:
            raise ValueError("systems with more than six particles are not supported")
        seen: set[int] = set()
        for group in self.identical_groups:
            if len(group) < 2:
                raise ValueError(f"identical group {group} needs at least two members")
            for i in group:
                if not 0 <= i < n:
                    raise ValueError(f"particle index {i} out of range")
                if i in seen:
                    raise ValueError("identical groups must be disjoint")
                seen.add(i)
            first = self.particles[group[0]]
            for i in group[1:]:
                p = self.particles[i]
                if p.mass != first.mass or p.charge != first.charge:
                    raise ValueError(f"particles {group[0]} and {i} differ but are grouped as identical")

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    @property
    def masses(self) -> np.ndarray:
        return np.array([p.mass for p in self.particles])

    @property
    def charges(self) -> np.ndarray:
        return np.array([p.charge for p in self.particles])

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.particles]

    def group_permutations(self) -> list[tuple[int, ...]]:
        """All elements of the direct product of the groups' symmetric groups.

        A permutation ``perm`` sends particle ``i`` to slot ``perm[i]``; the
        identity comes first.
        """
        n = self.n_particles
        out = []
        for combo in itertools.product(*(itertools.permutations(g) for g in self.identical_groups)):
            perm = list(range(n))
            for group, image in zip(self.identical_groups, combo):
                for a, b in zip(group, image):
                    perm[a] = b
            out.append(tuple(perm))
        return out

    def distinct_heavy_particles(self) -> list[int]:
        """One representative per species of positively charged particle."""
        reps = []
        covered: set[int] = set()
        for i, p in enumerate(self.particles):
            if p.charge <= 0 or i in covered:
                continue
            reps.append(i)
            for group in self.identical_groups:
                if i in group:
                    covered.update(group)
        return reps


def _pair(mass, charge, label):
    return [Particle(mass, charge, label), Particle(mass, charge, label)]


def build_system(
    preset: str | None = None,
    *,
    particles: Sequence[Particle] | None = None,
    groups: Sequence[Sequence[int]] = (),
    z: float | None = None,
) -> SystemDefinition:
    """Build a preset system or wrap an explicit particle list.

    Preset names: ``ps2``, ``mu2``, ``h2``, ``d2``, ``t2``, ``h2z`` (needs
    ``z``, the nuclear charge) and ``hehp``.  Particles are always ordered
    positive particles first, then electrons.
    """
    if preset is None:
        if particles is None:
            raise ValueError("either a preset name or a particle list is required")
        return SystemDefinition(tuple(particles), tuple(tuple(g) for g in groups))
    if particles is not None:
        raise ValueError("give a preset or explicit particles, not both")

    name = preset.strip().lower()
    electrons = _pair(1.0, -1.0, "e")
    if name == "h2z":
        if z is None:
            raise ValueError("preset h2z needs the nuclear charge z")
        z = float(z)
        if not (np.isfinite(z) and z > 0):
            raise ValueError(f"nuclear charge must be positive, got {z}")
        if z >= 2.0:
            warnings.warn(
                f"H2-like system with nuclear charge {z} is unbound; building it anyway",
                UnboundSystemWarning,
                stacklevel=2,
            )
        return SystemDefinition(
            tuple(_pair(PROTON_MASS, z, "p") + electrons), ((0, 1), (2, 3)), name=f"h2z({z:g})"
        )
    if z is not None:
        raise ValueError(f"preset {name} does not take a nuclear charge")
    homonuclear = {
        "ps2": (1.0, "e+"),
        "mu2": (MUON_MASS, "mu+"),
        "h2": (PROTON_MASS, "p"),
        "d2": (DEUTERON_MASS, "d"),
        "t2": (TRITON_MASS, "t"),
    }
    if name in homonuclear:
        mass, label = homonuclear[name]
        return SystemDefinition(tuple(_pair(mass, 1.0, label) + electrons), ((0, 1), (2, 3)), name=name)
    if name == "hehp":
        heavy = (Particle(ALPHA_MASS, 2.0, "alpha"), Particle(PROTON_MASS, 1.0, "p"))
        return SystemDefinition(heavy + tuple(electrons), ((2, 3),), name=name)
    raise ValueError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")


def default_eliminated(system: SystemDefinition, reference: int) -> int:
    """Particle dropped from a frame whose first coordinate is ``reference``.

    This is the heaviest other particle; ties go to the same charge sign as
    the reference, then to the lowest index.  For a diatomic it is the
    partner nucleus, so the nuclear skeleton rotates rigidly with the
    reference particle while the electron coordinates stay fixed.
    """
    ref = system.particles[reference]
    best = None
    for i, p in enumerate(system.particles):
        if i == reference:
            continue
        key = (p.mass, np.sign(p.charge) == np.sign(ref.charge), -i)
        if best is None or key > best[0]:
            best = (key, i)
    return best[1]


@dataclass(frozen=True, eq=False)
class CoordinateFrame:
    """Translationally invariant frame; everything is derived from ``ti_block``."""

    masses: np.ndarray
    reference: int
    eliminated: int
    ti_block: np.ndarray
    cm_vectors: np.ndarray = field(repr=False)
    mass_matrix: np.ndarray = field(repr=False)

    @property
    def n_particles(self) -> int:
        return self.ti_block.shape[1]

    @property
    def n_coords(self) -> int:
        return self.ti_block.shape[0]

    @property
    def frame_id(self) -> str:
        return f"cm[{self.reference},{self.eliminated}]"

    def pair_vector(self, i: int, j: int) -> np.ndarray:
        """``w`` with ``r_i - r_j = sum_k w_k x_k``."""
        return self.cm_vectors[i] - self.cm_vectors[j]

    @property
    def pair_vectors(self) -> dict[tuple[int, int], np.ndarray]:
        n = self.n_particles
        return {(i, j): self.pair_vector(i, j) for i in range(n) for j in range(i + 1, n)}

    def coordinates(self, positions) -> np.ndarray:
        """Lab positions (..., N, 3) to frame coordinates (..., N-1, 3)."""
        return np.einsum("kn,...nc->...kc", self.ti_block, np.asarray(positions, dtype=float))

    def relative_positions(self, coords) -> np.ndarray:
        """Frame coordinates (..., N-1, 3) to ``r_i - R_cm`` (..., N, 3)."""
        return np.einsum("nk,...kc->...nc", self.cm_vectors, np.asarray(coords, dtype=float))

    def same_particles(self, other: "CoordinateFrame") -> bool:
        return self.masses.shape == other.masses.shape and np.array_equal(self.masses, other.masses)


def frame_from_ti_block(masses, ti_block, reference: int, eliminated: int) -> CoordinateFrame:
    """Derive a frame from an explicit transform; rows of ``ti_block`` must sum to zero."""
    m = np.asarray(masses, dtype=float)
    U = np.asarray(ti_block, dtype=float)
    n = m.size
    if U.shape != (n - 1, n):
        raise ValueError(f"ti_block must have shape {(n - 1, n)}, got {U.shape}")
    if np.max(np.abs(U.sum(axis=1))) > 1e-12 * max(1.0, np.abs(U).max()):
        raise ValueError("rows of ti_block must sum to zero")
    full = np.vstack([U, m / m.sum()])
    full_inv = np.linalg.inv(full)
    cm_vectors = full_inv[:, : n - 1]
    mass_matrix = 0.5 * (U / m) @ U.T
    mass_matrix = 0.5 * (mass_matrix + mass_matrix.T)
    assert np.linalg.eigvalsh(mass_matrix).min() > 0
    for arr in (m, U, cm_vectors, mass_matrix):
        arr.setflags(write=False)
    return CoordinateFrame(m, reference, eliminated, U, cm_vectors, mass_matrix)


def build_frame(
    system: SystemDefinition, reference_particle: int = 0, eliminated: int | None = None
) -> CoordinateFrame:
    """Frame whose first coordinate is ``r_ref - R_cm``.

    The remaining coordinates are ``r_i - R_cm`` for every other particle
    except ``eliminated`` (see :func:`default_eliminated`), in index order.
    """
    n = system.n_particles
    if not 0 <= reference_particle < n:
        raise ValueError(f"reference particle {reference_particle} out of range")
    if eliminated is None:
        eliminated = default_eliminated(system, reference_particle)
    if eliminated == reference_particle or not 0 <= eliminated < n:
        raise ValueError(f"invalid eliminated particle {eliminated}")
    m = system.masses
    order = [reference_particle] + [i for i in range(n) if i not in (reference_particle, eliminated)]
    U = np.tile(-m / m.sum(), (n - 1, 1))
    for k, i in enumerate(order):
        U[k, i] += 1.0
    return frame_from_ti_block(m, U, reference_particle, eliminated)


def coordinate_map(src: CoordinateFrame, dst: CoordinateFrame) -> np.ndarray:
    """Matrix ``T`` with ``x_dst = T x_src``."""
    if not src.same_particles(dst):
        raise ValueError("frames describe different particle sets")
    return dst.ti_block @ src.cm_vectors


def frame_transform(A, src: CoordinateFrame, dst: CoordinateFrame) -> np.ndarray:
    """Re-express exponent matrices (..., n, n) given in ``src`` in ``dst``.

    The quadratic form is preserved pointwise; the constant Jacobian of the
    coordinate change is left to the caller (it cancels in normalized
    quantities).
    """
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != src.n_coords:
        raise ValueError(f"exponent matrix size {A.shape[-1]} does not match frame with {src.n_coords} coordinates")
    if src is dst:
        return A.copy()
    Tinv = np.linalg.inv(coordinate_map(src, dst))
    out = np.einsum("ji,...jk,kl->...il", Tinv, A, Tinv)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def permutation_action(perm: Sequence[int], frame: CoordinateFrame, system: SystemDefinition | None = None) -> np.ndarray:
    """Matrix ``P`` with ``x -> P x`` when particle ``i`` is moved to slot ``perm[i]``.

    Composition follows ``P(s o t) = P(s) P(t)``.  With ``system`` given, the
    permutation is checked against the identical groups; without it, only
    equal masses are required.
    """
    perm = tuple(int(p) for p in perm)
    n = frame.n_particles
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} particles")
    for i, j in enumerate(perm):
        if i == j:
            continue
        if system is not None:
            if not any(i in g and j in g for g in system.identical_groups):
                raise ValueError(f"permutation exchanges non-identical particles {i} and {j}")
        elif frame.masses[i] != frame.masses[j]:
            raise ValueError(f"permutation exchanges particles of different mass ({i}, {j})")
    shuffle = np.zeros((n, n))
    shuffle[list(perm), list(range(n))] = 1.0
    return frame.ti_block @ shuffle @ frame.cm_vectors
