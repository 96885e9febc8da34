"""Closed-form matrix elements between spherical ECGs.

For primitives ``A`` and ``B`` in ``n`` coordinates, with ``C = A + B``::

    S = (pi^n / det C)^(3/2)
    T = 6 tr(A Lambda B C^-1) S                 kinetic  -sum Lambda_jk grad_j . grad_k
    V = q_i q_j S 2 / sqrt(pi w^T C^-1 w)       Coulomb  q_i q_j / |r_i - r_j|

Symmetrized functions are handled termwise over all bra/ket term pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ecg import SymmetrizedEcg
from .system import CoordinateFrame, SystemDefinition

TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


@dataclass(frozen=True)
class PairInteraction:
    i: int
    j: int
    prefactor: float
    w: np.ndarray

    def __post_init__(self):
        if not self.i < self.j:
            raise ValueError("pair indices must satisfy i < j")


@dataclass(frozen=True)
class MatrixElementPair:
    S: float
    T: float
    V: float

    @property
    def H(self) -> float:
        return self.T + self.V


def pair_interactions(system: SystemDefinition, frame: CoordinateFrame) -> list[PairInteraction]:
    q = system.charges
    n = system.n_particles
    return [
        PairInteraction(i, j, float(q[i] * q[j]), frame.pair_vector(i, j))
        for i in range(n)
        for j in range(i + 1, n)
    ]


def coulomb_tables(system: SystemDefinition, frame: CoordinateFrame) -> tuple[np.ndarray, np.ndarray]:
    """Stacked pair vectors (P, n) and charge products (P,) for batched kernels."""
    pairs = pair_interactions(system, frame)
    return np.array([p.w for p in pairs]), np.array([p.prefactor for p in pairs])


def _inverse_and_overlap(A, B):
    C = A + B
    n = C.shape[-1]
    det = np.linalg.det(C)
    assert np.all(det > 0), "sum of exponent matrices is not positive definite"
    return np.linalg.inv(C), (np.pi**n / det) ** 1.5


def primitive_elements(A, B, mass_matrix, pair_w, pair_q):
    """Overlap, kinetic and Coulomb-sum kernels for broadcast stacks of primitives.

    ``A`` and ``B`` broadcast against each other with shape (..., n, n).
    """
    Cinv, S = _inverse_and_overlap(A, B)
    T = 6.0 * np.einsum("...ij,jk,...kl,...li->...", A, mass_matrix, B, Cinv) * S
    c = np.einsum("pi,...ij,pj->...p", pair_w, Cinv, pair_w)
    V = S * TWO_OVER_SQRT_PI * (pair_q / np.sqrt(c)).sum(-1)
    return S, T, V


def _check(f: SymmetrizedEcg, g: SymmetrizedEcg):
    if f.frame_id != g.frame_id:
        raise ValueError(f"functions live in different frames ({f.frame_id} vs {g.frame_id})")


def _term_pairs(f: SymmetrizedEcg, g: SymmetrizedEcg):
    A = f.matrices[:, None]
    B = g.matrices[None, :]
    w = f.weights[:, None] * g.weights[None, :]
    return A, B, w


def overlap(f: SymmetrizedEcg, g: SymmetrizedEcg) -> float:
    _check(f, g)
    A, B, w = _term_pairs(f, g)
    _, S = _inverse_and_overlap(A, B)
    return float((w * S).sum())


def kinetic(f: SymmetrizedEcg, g: SymmetrizedEcg, mass_matrix) -> float:
    _check(f, g)
    A, B, w = _term_pairs(f, g)
    Cinv, S = _inverse_and_overlap(A, B)
    T = 6.0 * np.einsum("...ij,jk,...kl,...li->...", A, np.asarray(mass_matrix), B, Cinv) * S
    return float((w * T).sum())


def coulomb_pair(f: SymmetrizedEcg, g: SymmetrizedEcg, interaction: PairInteraction) -> float:
    _check(f, g)
    w_vec = np.asarray(interaction.w, dtype=float)
    if not np.any(w_vec):
        raise ValueError(f"pair vector for ({interaction.i}, {interaction.j}) vanishes")
    A, B, w = _term_pairs(f, g)
    Cinv, S = _inverse_and_overlap(A, B)
    c = np.einsum("i,...ij,j->...", w_vec, Cinv, w_vec)
    assert np.all(c > 0)
    return float(interaction.prefactor * (w * S * TWO_OVER_SQRT_PI / np.sqrt(c)).sum())


def hamiltonian_element(
    f: SymmetrizedEcg, g: SymmetrizedEcg, system: SystemDefinition, frame: CoordinateFrame
) -> MatrixElementPair:
    _check(f, g)
    if f.frame_id != frame.frame_id:
        raise ValueError(f"functions live in {f.frame_id}, not {frame.frame_id}")
    pair_w, pair_q = coulomb_tables(system, frame)
    A, B, w = _term_pairs(f, g)
    S, T, V = primitive_elements(A, B, frame.mass_matrix, pair_w, pair_q)
    return MatrixElementPair(float((w * S).sum()), float((w * T).sum()), float((w * V).sum()))
