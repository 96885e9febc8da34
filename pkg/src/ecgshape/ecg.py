"""Spherical explicitly correlated Gaussians.

A primitive is ``phi(x) = exp(-sum_jk A_jk x_j . x_k)`` with ``A`` symmetric
positive definite in the coordinates of one frame.  Symmetrized functions
carry the full orbit of a primitive under the identical-particle group with
weights ``1/|G|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import CoordinateFrame, SystemDefinition, permutation_action

# exp(2 * 20) keeps exponents well inside double range
MAX_ABS_THETA = 20.0
MAX_SAMPLE_RETRIES = 100


@dataclass(frozen=True, eq=False)
class EcgPrimitive:
    A: np.ndarray
    frame_id: str

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("exponent matrix must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("exponent matrix must be symmetric")
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ValueError("exponent matrix must be positive definite")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)


@dataclass(frozen=True, eq=False)
class SymmetrizedEcg:
    """Weighted sum of exponent matrices, all in one frame."""

    weights: np.ndarray
    matrices: np.ndarray
    frame_id: str

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        m = np.array(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[0] != w.size or m.shape[1] != m.shape[2]:
            raise ValueError("matrices must have shape (terms, n, n) matching the weights")
        w.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "matrices", m)

    @property
    def n_terms(self) -> int:
        return self.weights.size

    @property
    def primitive(self) -> np.ndarray:
        """Exponent matrix of the identity term."""
        return self.matrices[0]

    @classmethod
    def single(cls, A, frame_id: str) -> "SymmetrizedEcg":
        A = np.asarray(A, dtype=float)
        return cls(np.ones(1), A[None], frame_id)


def param_to_primitive(theta, frame: CoordinateFrame) -> EcgPrimitive:
    """``A = L L^T`` with ``L`` lower triangular, row-major packed, diagonal ``exp(theta)``."""
    return EcgPrimitive(theta_to_matrix(theta, frame.n_coords), frame.frame_id)


def theta_to_matrix(theta, n: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n * (n + 1) // 2,):
        raise ValueError(f"expected {n * (n + 1) // 2} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters must be finite")
    if np.max(np.abs(theta)) > MAX_ABS_THETA:
        raise ValueError(f"parameter magnitude exceeds {MAX_ABS_THETA}")
    L = np.zeros((n, n))
    L[np.tril_indices(n)] = theta
    d = np.diag_indices(n)
    L[d] = np.exp(L[d])
    return L @ L.T


def primitive_to_param(primitive: EcgPrimitive | np.ndarray) -> np.ndarray:
    A = primitive.A if isinstance(primitive, EcgPrimitive) else np.asarray(primitive, dtype=float)
    L = np.linalg.cholesky(A)
    n = A.shape[0]
    d = np.diag_indices(n)
    L[d] = np.log(L[d])
    return L[np.tril_indices(n)]


def default_scale_range(system: SystemDefinition) -> tuple[float, float]:
    """Sampling range for pair distances, in bohr."""
    if system.name == "ps2":
        return 0.05, 40.0
    return 0.05, 20.0


def pair_form_matrix(alpha, frame: CoordinateFrame) -> np.ndarray:
    """Matrix of ``sum_{i<j} alpha_ij |r_i - r_j|^2`` in frame coordinates."""
    n = frame.n_particles
    W = np.array([frame.pair_vector(i, j) for i in range(n) for j in range(i + 1, n)])
    return np.einsum("p,pi,pj->ij", np.asarray(alpha, dtype=float), W, W)


def sample_pair_distances(rng: np.random.Generator, n_pairs: int, scale_range) -> np.ndarray:
    d_min, d_max = scale_range
    return np.exp(rng.uniform(np.log(d_min), np.log(d_max), n_pairs))


def random_primitive(
    rng: np.random.Generator,
    system: SystemDefinition,
    frame: CoordinateFrame,
    scale_range: tuple[float, float] | None = None,
) -> EcgPrimitive:
    """Draw ``alpha_ij = 1/(2 d_ij^2)`` with ``d_ij`` log-uniform in ``scale_range``."""
    d_min, d_max = default_scale_range(system) if scale_range is None else scale_range
    if not 0 < d_min < d_max:
        raise ValueError(f"need 0 < d_min < d_max, got {(d_min, d_max)}")
    n = system.n_particles
    n_pairs = n * (n - 1) // 2
    for _ in range(MAX_SAMPLE_RETRIES):
        d = sample_pair_distances(rng, n_pairs, (d_min, d_max))
        A = pair_form_matrix(0.5 / d**2, frame)
        ev = np.linalg.eigvalsh(A)
        if ev[0] > 1e-10 * ev[-1]:
            return EcgPrimitive(A, frame.frame_id)
    raise RuntimeError(f"no positive definite exponent matrix after {MAX_SAMPLE_RETRIES} draws")


def _canonical_key(A: np.ndarray, scale: float) -> bytes:
    return np.round(A / scale, 14).tobytes()


def symmetrize(primitive: EcgPrimitive, system: SystemDefinition, frame: CoordinateFrame) -> SymmetrizedEcg:
    """Totally symmetric projection over the identical-particle groups.

    Terms whose matrices coincide after rounding at 1e-14 (relative) are
    merged and their weights summed; the identity term stays first.
    """
    if primitive.frame_id != frame.frame_id:
        raise ValueError(f"primitive lives in {primitive.frame_id}, not {frame.frame_id}")
    perms = system.group_permutations()
    A = primitive.A
    scale = np.abs(A).max()
    weight = 1.0 / len(perms)
    keys: dict[bytes, int] = {}
    weights: list[float] = []
    mats: list[np.ndarray] = []
    for perm in perms:
        if tuple(perm) == tuple(range(len(perm))):
            B = A.copy()  # keep the stored primitive bit-exact
        else:
            P = permutation_action(perm, frame, system)
            B = P.T @ A @ P
            B = 0.5 * (B + B.T)
        key = _canonical_key(B, scale)
        if key in keys:
            weights[keys[key]] += weight
        else:
            keys[key] = len(mats)
            weights.append(weight)
            mats.append(B)
    return SymmetrizedEcg(np.array(weights), np.array(mats), frame.frame_id)


def symmetrize_function(f: SymmetrizedEcg, system: SystemDefinition, frame: CoordinateFrame) -> SymmetrizedEcg:
    """Apply the projector termwise to an already weighted sum."""
    terms = [symmetrize(EcgPrimitive(m, f.frame_id), system, frame) for m in f.matrices]
    keys: dict[bytes, int] = {}
    weights: list[float] = []
    mats: list[np.ndarray] = []
    scale = max(np.abs(m).max() for m in f.matrices)
    for w0, t in zip(f.weights, terms):
        for w, B in zip(t.weights, t.matrices):
            key = _canonical_key(B, scale)
            if key in keys:
                weights[keys[key]] += w0 * w
            else:
                keys[key] = len(mats)
                weights.append(w0 * w)
                mats.append(B)
    return SymmetrizedEcg(np.array(weights), np.array(mats), f.frame_id)
