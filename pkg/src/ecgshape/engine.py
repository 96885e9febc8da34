"""Ground-state solver: generalized eigenproblem plus stochastic basis growth.

The basis grows by competitive selection: each step draws a batch of random
symmetrized Gaussians and keeps the one that lowers the ground-state energy
most.  Refinement then sweeps the Cholesky parameters of every function with
a golden-section line search.  Candidates are screened without a full
diagonalization by solving the secular equation of the bordered matrix in
the eigenbasis of the remaining functions.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .ecg import (
    MAX_ABS_THETA,
    EcgPrimitive,
    SymmetrizedEcg,
    default_scale_range,
    primitive_to_param,
    random_primitive,
    symmetrize,
    theta_to_matrix,
)
from .integrals import coulomb_tables, primitive_elements
from .system import CoordinateFrame, SystemDefinition, build_frame, permutation_action

log = logging.getLogger(__name__)

DROP_THRESHOLD = 1e-12
MAX_NORMALIZED_OVERLAP = 0.9999
DEFAULT_TRIALS = 32
DEFAULT_REFINE_CYCLES = 2
GOLDEN_ITERATIONS = 10
LINE_SEARCH_HALF_WIDTH = 0.5


def default_basis_size(system: SystemDefinition) -> int:
    return 192 if system.name == "hehp" else 128


class DegenerateBasisError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralSolution:
    energies: np.ndarray
    coefficients: np.ndarray  # columns are states, S-normalized
    retained_dimension: int
    overlap_condition: float

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_coefficients(self) -> np.ndarray:
        return self.coefficients[:, 0]


@dataclass(frozen=True)
class GrowthStep:
    size: int
    energy: float
    candidate: int  # accepted trial index within the step, -1 for refinement
    trials: int
    kind: str = "grow"


@dataclass(frozen=True, eq=False)
class Wavefunction:
    system: SystemDefinition
    frame: CoordinateFrame
    basis: tuple[SymmetrizedEcg, ...]
    coefficients: np.ndarray
    energy: float
    seed: int | None = None
    config_digest: str = ""
    history: tuple[GrowthStep, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.basis)

    @classmethod
    def empty(cls, system: SystemDefinition, frame: CoordinateFrame | None = None, seed=None, config_digest="") -> "Wavefunction":
        frame = build_frame(system, 0) if frame is None else frame
        return cls(system, frame, (), np.zeros(0), float("nan"), seed, config_digest)

    def primitives(self) -> np.ndarray:
        if not self.basis:
            return np.zeros((0, self.frame.n_coords, self.frame.n_coords))
        return np.array([f.primitive for f in self.basis])


def _pack(basis) -> tuple[np.ndarray, np.ndarray]:
    """Pad symmetrized functions to (M, G, n, n) matrices and (M, G) weights."""
    G = max(f.n_terms for f in basis)
    n = basis[0].matrices.shape[-1]
    mats = np.empty((len(basis), G, n, n))
    wts = np.zeros((len(basis), G))
    for k, f in enumerate(basis):
        mats[k, : f.n_terms] = f.matrices
        mats[k, f.n_terms :] = f.matrices[0]
        wts[k, : f.n_terms] = f.weights
    return mats, wts


def assemble_parts(basis, system: SystemDefinition, frame: CoordinateFrame):
    """Overlap, kinetic and potential matrices, termwise over all term pairs."""
    if not basis:
        raise ValueError("basis is empty")
    for f in basis:
        if f.frame_id != frame.frame_id:
            raise ValueError(f"basis function in {f.frame_id}, expected {frame.frame_id}")
    mats, wts = _pack(basis)
    pair_w, pair_q = coulomb_tables(system, frame)
    M = len(basis)
    S = np.zeros((M, M))
    T = np.zeros((M, M))
    V = np.zeros((M, M))
    for i in range(M):
        s, t, v = _row_terms(mats[i], wts[i], mats[: i + 1], wts[: i + 1], frame, pair_w, pair_q)
        S[i, : i + 1] = S[: i + 1, i] = s
        T[i, : i + 1] = T[: i + 1, i] = t
        V[i, : i + 1] = V[: i + 1, i] = v
    return S, T, V


def _row_terms(mats_i, wts_i, mats, wts, frame, pair_w, pair_q):
    """<f_i|O|f_j> for all j with the full term-pair double sum."""
    A = mats_i[None, :, None]  # (1, Gi, 1, n, n)
    B = mats[:, None, :]  # (m, 1, Gj, n, n)
    w = wts_i[None, :, None] * wts[:, None, :]
    s, t, v = primitive_elements(A, B, frame.mass_matrix, pair_w, pair_q)
    return (w * s).sum((1, 2)), (w * t).sum((1, 2)), (w * v).sum((1, 2))


def assemble(basis, system: SystemDefinition, frame: CoordinateFrame) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian and overlap matrices of a symmetrized basis."""
    S, T, V = assemble_parts(basis, system, frame)
    return T + V, S


def solve_gevp(H, S, drop_threshold: float = DROP_THRESHOLD) -> SpectralSolution:
    """Canonical orthogonalization followed by a standard symmetric eigensolve."""
    H = np.asarray(H, dtype=float)
    S = np.asarray(S, dtype=float)
    s_eval, s_evec = np.linalg.eigh(S)
    keep = s_eval > drop_threshold * s_eval[-1]
    if s_eval[-1] <= 0 or not np.any(keep):
        raise DegenerateBasisError("basis numerically degenerate")
    X = s_evec[:, keep] / np.sqrt(s_eval[keep])
    Hp = X.T @ H @ X
    energies, vecs = np.linalg.eigh(0.5 * (Hp + Hp.T))
    C = X @ vecs
    C /= np.sqrt(np.einsum("ik,ij,jk->k", C, S, C))
    return SpectralSolution(energies, C, int(keep.sum()), float(s_eval[keep][0] / s_eval[-1]))


def _bordered_lowest(eps, Y, s_row, h_row, s_gg, h_gg):
    """Lowest eigenvalue after appending one function to a solved basis.

    ``eps`` and ``Y`` are the eigenvalues and S-orthonormal eigenvectors of
    the existing basis.  Returns ``None`` when the new function is
    numerically inside the existing span.
    """
    b = Y.T @ s_row
    hb = Y.T @ h_row
    resid = s_gg - b @ b
    if resid <= 1e-10 * s_gg:
        return None
    z = (hb - eps * b) / np.sqrt(resid)
    gamma = (h_gg - 2.0 * (b @ hb) + eps @ (b * b)) / resid
    z2 = z * z

    def secular(E):
        return gamma - E - np.sum(z2 / (eps - E))

    hi = eps[0] - 1e-13 * max(1.0, abs(eps[0]))
    if secular(hi) >= 0:
        return float(min(hi, gamma))
    lo = min(gamma, eps[0]) - np.sqrt(z2.sum()) - 1.0
    while secular(lo) < 0:
        lo -= 2.0 * (1.0 + abs(lo))
    return float(brentq(secular, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


class _Workspace:
    """Mutable matrices and packed terms for one system; internal to the engine."""

    def __init__(self, system: SystemDefinition, frame: CoordinateFrame):
        self.system = system
        self.frame = frame
        self.pair_w, self.pair_q = coulomb_tables(system, frame)
        self.perm_mats = np.array([permutation_action(p, frame, system) for p in system.group_permutations()])
        n = frame.n_coords
        self.prims = np.zeros((0, n, n))
        self.terms = np.zeros((0, len(self.perm_mats), n, n))
        self.S = np.zeros((0, 0))
        self.T = np.zeros((0, 0))
        self.V = np.zeros((0, 0))

    @property
    def size(self) -> int:
        return len(self.prims)

    def orbit(self, A):
        return np.einsum("gji,jk,gkl->gil", self.perm_mats, A, self.perm_mats)

    def row(self, A, terms, exclude=None):
        """Matrix elements of the symmetrized ``A`` with every basis function.

        The symmetric projector is Hermitian, idempotent and commutes with
        the Hamiltonian, so ``<PA|O|Pg> = <A|O|Pg>``: only the ket is summed
        over its orbit.
        """
        weight = 1.0 / terms.shape[0]
        other = self.terms if exclude is None else np.delete(self.terms, exclude, axis=0)
        B = np.concatenate([other, terms[None]], axis=0)
        s, t, v = primitive_elements(A[None, None], B, self.frame.mass_matrix, self.pair_w, self.pair_q)
        s = s.sum(1) * weight
        t = t.sum(1) * weight
        v = v.sum(1) * weight
        return s, t, v

    def load(self, prims):
        for A in prims:
            terms = self.orbit(A)
            s, t, v = self.row(A, terms)
            self.append(A, terms, s, t, v)

    def append(self, A, terms, s, t, v):
        m = self.size
        for name, row in (("S", s), ("T", t), ("V", v)):
            old = getattr(self, name)
            new = np.zeros((m + 1, m + 1))
            new[:m, :m] = old
            new[m, :] = row
            new[:, m] = row
            setattr(self, name, new)
        self.prims = np.concatenate([self.prims, A[None]])
        self.terms = np.concatenate([self.terms, terms[None]])

    def truncate(self, m):
        self.prims = self.prims[:m]
        self.terms = self.terms[:m]
        self.S, self.T, self.V = self.S[:m, :m], self.T[:m, :m], self.V[:m, :m]

    def set_function(self, k, A, terms, s, t, v):
        """Replace function ``k``; rows are ordered with ``k`` moved last."""
        idx = np.r_[0:k, k + 1 : self.size]
        for name, row in (("S", s), ("T", t), ("V", v)):
            mat = getattr(self, name)
            mat[k, idx] = mat[idx, k] = row[:-1]
            mat[k, k] = row[-1]
        self.prims[k] = A
        self.terms[k] = terms

    def solve(self) -> SpectralSolution:
        return solve_gevp(self.T + self.V, self.S)

    def reduced_spectrum(self, exclude=None):
        S, H = self.S, self.T + self.V
        if exclude is not None:
            keep = np.r_[0:exclude, exclude + 1 : self.size]
            S = S[np.ix_(keep, keep)]
            H = H[np.ix_(keep, keep)]
        sol = solve_gevp(H, S)
        return sol.energies, sol.coefficients, np.diag(S)

    def trial_energy(self, A, spectrum, exclude=None):
        """Ground energy with ``A`` added (or swapped in at ``exclude``), or None."""
        terms = self.orbit(A)
        s, t, v = self.row(A, terms, exclude)
        h = t + v
        s_gg, h_gg = s[-1], h[-1]
        if not (np.isfinite(s_gg) and np.isfinite(h_gg)) or s_gg <= 0:
            return None
        if spectrum is None:
            return h_gg / s_gg, terms, s, t, v
        eps, Y, diag = spectrum
        if np.max(np.abs(s[:-1]) / np.sqrt(diag * s_gg)) > MAX_NORMALIZED_OVERLAP:
            return None
        e = _bordered_lowest(eps, Y, s[:-1], h[:-1], s_gg, h_gg)
        if e is None:
            return None
        return e, terms, s, t, v


def _workspace_from(wf: Wavefunction) -> _Workspace:
    ws = _Workspace(wf.system, wf.frame)
    ws.load(wf.primitives())
    return ws


def _finish(wf: Wavefunction, ws: _Workspace, history) -> Wavefunction:
    sol = ws.solve()
    basis = tuple(symmetrize(EcgPrimitive(A, wf.frame.frame_id), wf.system, wf.frame) for A in ws.prims)
    out = replace(
        wf,
        basis=basis,
        coefficients=sol.ground_coefficients.copy(),
        energy=sol.ground_energy,
        history=tuple(history),
        _cache={},
    )
    out._cache["matrices"] = (ws.S.copy(), ws.T.copy(), ws.V.copy())
    return out


def grow_basis(
    state: Wavefunction,
    rng: np.random.Generator,
    trials_per_step: int = DEFAULT_TRIALS,
    target_size: int = 128,
    scale_range: tuple[float, float] | None = None,
    max_failed_steps: int = 20,
) -> Wavefunction:
    """Append competitively selected random functions until ``target_size``."""
    if trials_per_step < 1:
        raise ValueError("trials_per_step must be >= 1")
    if target_size < state.size:
        raise ValueError(f"target size {target_size} is below the current size {state.size}")
    scale_range = default_scale_range(state.system) if scale_range is None else scale_range
    ws = _workspace_from(state)
    history = list(state.history)
    energy = state.energy if state.size else np.inf
    failures = 0
    while ws.size < target_size:
        spectrum = ws.reduced_spectrum() if ws.size else None
        best = None
        for trial in range(trials_per_step):
            A = random_primitive(rng, state.system, state.frame, scale_range).A
            res = ws.trial_energy(A, spectrum)
            if res is None or res[0] > energy:
                continue
            if best is None or res[0] < best[0][0]:
                best = (res, A, trial)
        if best is None:
            failures += 1
            warnings.warn(f"no acceptable candidate at basis size {ws.size}; step skipped", RuntimeWarning, stacklevel=2)
            if failures >= max_failed_steps:
                warnings.warn("candidate budget exhausted; growth stopped", RuntimeWarning, stacklevel=2)
                break
            continue
        (e_trial, terms, s, t, v), A, trial = best
        ws.append(A, terms, s, t, v)
        energy_new = ws.solve().ground_energy
        if energy_new > energy:
            # screening and the thresholded full solve disagree on a near-dependent candidate
            ws.truncate(ws.size - 1)
            failures += 1
            if failures >= max_failed_steps:
                warnings.warn("candidate budget exhausted; growth stopped", RuntimeWarning, stacklevel=2)
                break
            continue
        energy = energy_new
        history.append(GrowthStep(ws.size, float(energy_new), trial, trials_per_step))
        if ws.size % 16 == 0:
            log.info("basis %d  E = %.10f", ws.size, energy_new)
    return _finish(state, ws, history)


def _golden_section(fun, a, b, iterations):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iterations):
        if fc[0] < fd[0]:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fun(d)
    return (c, fc) if fc[0] < fd[0] else (d, fd)


def refine(psi: Wavefunction, cycles: int = DEFAULT_REFINE_CYCLES, iterations: int = GOLDEN_ITERATIONS) -> Wavefunction:
    """Cyclic coordinate line search over every function's parameters.

    Moves are accepted only if they lower the ground-state energy.
    """
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    if cycles == 0 or psi.size == 0:
        return psi
    ws = _workspace_from(psi)
    n = psi.frame.n_coords
    rows, cols = np.tril_indices(n)
    history = list(psi.history)
    energy = ws.solve().ground_energy
    for cycle in range(cycles):
        for k in range(ws.size):
            spectrum = ws.reduced_spectrum(exclude=k) if ws.size > 1 else None
            theta = primitive_to_param(ws.prims[k])
            current = energy
            best_res = None

            def evaluate(th):
                if np.max(np.abs(th)) > MAX_ABS_THETA:
                    return (np.inf, None)
                try:
                    res = ws.trial_energy(theta_to_matrix(th, n), spectrum, exclude=k)
                except (np.linalg.LinAlgError, AssertionError, FloatingPointError):
                    return (np.inf, None)
                return (np.inf, None) if res is None else (res[0], res)

            for p in range(theta.size):
                width = _search_width(theta, rows[p], cols[p])

                def along(x, p=p):
                    th = theta.copy()
                    th[p] = x
                    return evaluate(th)

                x, (e, res) = _golden_section(along, theta[p] - width, theta[p] + width, iterations)
                if res is not None and e < current - 1e-14 * abs(current):
                    theta[p] = x
                    current = e
                    best_res = res
            if best_res is None:
                continue
            old = (ws.prims[k].copy(), ws.terms[k].copy(), ws.S.copy(), ws.T.copy(), ws.V.copy())
            _, terms, s, t, v = best_res
            ws.set_function(k, theta_to_matrix(theta, n), terms, s, t, v)
            new_energy = ws.solve().ground_energy
            if new_energy > energy:
                ws.prims[k], ws.terms[k], ws.S, ws.T, ws.V = old
                continue
            energy = new_energy
        history.append(GrowthStep(ws.size, float(energy), -1, cycle + 1, "refine"))
        log.info("refine cycle %d  E = %.10f", cycle + 1, energy)
    return _finish(psi, ws, history)


def _search_width(theta, i, j):
    """Half width of the line search: log scale on the diagonal, relative off it."""
    if i == j:
        return LINE_SEARCH_HALF_WIDTH
    diag = np.exp(theta[i * (i + 1) // 2 + i])
    return LINE_SEARCH_HALF_WIDTH * max(diag, abs(theta[i * (i + 1) // 2 + j]))


@dataclass(frozen=True)
class ConvergenceReport:
    energy: float
    basis_size: int
    half_size_energy: float
    delta_energy: float
    relative_delta_energy: float
    virial_ratio: float
    overlap_condition: float

    @property
    def converged(self) -> bool:
        return abs(self.relative_delta_energy) < 0.01 and -2.02 <= self.virial_ratio <= -1.98


def matrices(psi: Wavefunction):
    """Cached (S, T, V) for a wavefunction's basis."""
    if "matrices" not in psi._cache:
        ws = _workspace_from(psi)
        psi._cache["matrices"] = (ws.S, ws.T, ws.V)
    return psi._cache["matrices"]


def expectation_values(psi: Wavefunction) -> tuple[float, float, float]:
    """``<S>``, ``<T>`` and ``<V>`` for the stored coefficients."""
    S, T, V = matrices(psi)
    c = psi.coefficients
    return float(c @ S @ c), float(c @ T @ c), float(c @ V @ c)


def converge_report(history, psi: Wavefunction) -> ConvergenceReport:
    """Energy change over the last basis-size doubling, virial ratio, conditioning."""
    history = list(history)
    if not history:
        raise ValueError("history is empty")
    half = psi.size // 2
    earlier = [h for h in history if h.size <= half]
    e_half = earlier[-1].energy if earlier else float("nan")
    S, T, V = matrices(psi)
    norm, t, v = expectation_values(psi)
    s_eval = np.linalg.eigvalsh(S)
    keep = s_eval > DROP_THRESHOLD * s_eval[-1]
    d = psi.energy - e_half
    return ConvergenceReport(
        energy=psi.energy,
        basis_size=psi.size,
        half_size_energy=e_half,
        delta_energy=d,
        relative_delta_energy=abs(d / psi.energy),
        virial_ratio=v / t,
        overlap_condition=float(s_eval[keep][0] / s_eval[-1]),
    )


def solve(
    system: SystemDefinition,
    *,
    seed: int = 1,
    basis_size: int | None = None,
    trials: int = DEFAULT_TRIALS,
    refine_cycles: int = DEFAULT_REFINE_CYCLES,
    scale_range: tuple[float, float] | None = None,
    frame: CoordinateFrame | None = None,
    config_digest: str = "",
) -> Wavefunction:
    """Grow to half size, refine, grow to full size, refine again."""
    basis_size = default_basis_size(system) if basis_size is None else basis_size
    rng = np.random.default_rng(seed)
    psi = Wavefunction.empty(system, frame, seed=seed, config_digest=config_digest)
    psi = grow_basis(psi, rng, trials, max(1, basis_size // 2), scale_range)
    psi = refine(psi, refine_cycles)
    psi = grow_basis(psi, rng, trials, basis_size, scale_range)
    return refine(psi, refine_cycles)
