"""Direct numerical integration of ECG matrix elements.

This path never touches the closed forms in :mod:`ecgshape.integrals`.
Integrals run over the frame coordinates themselves:

* overlap and kinetic integrands factor over the three Cartesian
  components, leaving an ``n``-dimensional adaptive quadrature;
* Coulomb with ``n = 1`` is a radial integral, with ``n = 2`` the
  interparticle vector becomes a coordinate and rotational invariance
  leaves a smooth three-dimensional integral;
* anything else falls back to randomized quasi-Monte Carlo with Gaussian
  importance sampling (for Coulomb, a proposal that absorbs the ``1/r``
  singularity) and a replicate standard error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .ecg import SymmetrizedEcg

OPERATORS = ("overlap", "kinetic", "coulomb")
_TAIL = 40.0  # integrate Gaussians out to exp(-40)


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    method: str
    converged: bool = True


def _box(B, extra=1.0):
    lam = np.linalg.eigvalsh(B)[0]
    return np.sqrt(_TAIL / lam) * extra


def _cubature(func, n, half_width, rtol, center=None):
    """Adaptive cubature of a vectorized integrand over a box around ``center``."""
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    res = integrate.cubature(
        func, center - half_width, center + half_width, rtol=rtol, atol=0.0, max_subdivisions=20000
    )
    return float(res.estimate), float(res.error)


def _gaussian_moment(B, weight_matrix=None, rtol=1e-11):
    """``int exp(-y^T B y) [y^T W y] dy`` over R^n by adaptive cubature."""
    n = B.shape[0]
    L = _box(B, 1.3 if weight_matrix is not None else 1.0)

    def func(y):
        val = np.exp(-np.einsum("pi,ij,pj->p", y, B, y))
        if weight_matrix is not None:
            val = val * np.einsum("pi,ij,pj->p", y, weight_matrix, y)
        return val

    return _cubature(func, n, L, rtol)


def _overlap_term(A, B):
    I1, e1 = _gaussian_moment(A + B)
    return I1**3, 3 * I1**2 * e1


def _kinetic_term(A, B, mass_matrix):
    C = A + B
    I1, e1 = _gaussian_moment(C)
    # gradient of exp(-y^T A y) is -2 A y exp(...), summed over 3 Cartesian parts
    W = 4.0 * A @ mass_matrix @ B
    W = 0.5 * (W + W.T)
    IQ, eq = _gaussian_moment(C, W)
    value = 3.0 * IQ * I1**2
    err = 3.0 * (eq * I1**2 + 2 * abs(IQ) * I1 * e1)
    return value, err


def _coulomb_term_radial(A, B, w):
    b = float((A + B)[0, 0])
    aw = abs(float(w[0]))
    L = np.sqrt(_TAIL / b)
    value, err = integrate.quad(lambda r: 4 * np.pi * r * np.exp(-b * r * r) / aw, 0, L, epsabs=0, epsrel=1e-12, limit=200)
    return value, err


def _coulomb_term_reduced(A, B, w):
    C = A + B
    w = np.asarray(w, dtype=float)
    keep = 0 if abs(w[1]) >= abs(w[0]) else 1
    rows = np.zeros((2, 2))
    rows[0, keep] = 1.0
    rows[1] = w
    K = np.linalg.inv(rows)  # x = K (t, s)
    Cp = K.T @ C @ K
    jac = abs(np.linalg.det(K)) ** 3
    lt = np.sqrt(_TAIL / np.linalg.eigvalsh(Cp)[0]) * 1.2

    def func(p):
        u, s, t = p[:, 0], p[:, 1], p[:, 2]
        return t * t * s * np.exp(-(Cp[0, 0] * t * t + 2 * Cp[0, 1] * t * s * u + Cp[1, 1] * s * s))

    res = integrate.cubature(func, [-1.0, 0.0, 0.0], [1.0, lt, lt], rtol=1e-11, atol=0.0, max_subdivisions=20000)
    value, err = float(res.estimate), float(res.error)
    f = 8 * np.pi**2 * jac
    return f * value, f * err


def _qmc_term(A, B, integrand, n_points, replicates, seed):
    """Importance-sampled scrambled Sobol estimate and replicate standard error."""
    C = A + B
    n = C.shape[0]
    cov = 1.5 * np.linalg.inv(2 * C)
    chol = np.linalg.cholesky(cov)
    dist = stats.multivariate_normal(mean=np.zeros(n), cov=cov)
    estimates = []
    for r in range(replicates):
        sampler = stats.qmc.Sobol(d=3 * n, scramble=True, seed=np.random.default_rng([*np.atleast_1d(seed), r]))
        u = sampler.random(n_points)
        z = stats.norm.ppf(np.clip(u, 1e-16, 1 - 1e-16)).reshape(n_points, 3, n)
        x = np.einsum("ij,pcj->pci", chol, z)  # (points, cartesian, n)
        logq = dist.logpdf(x.reshape(-1, n)).reshape(n_points, 3).sum(axis=1)
        expo = -np.einsum("pci,ij,pcj->p", x, C, x)
        estimates.append(np.mean(integrand(x) * np.exp(expo - logq)))
    estimates = np.array(estimates)
    return float(estimates.mean()), float(estimates.std(ddof=1) / np.sqrt(replicates))


def _pair_coordinates(w, n):
    """``K`` with ``x = K z`` where ``z_0 = w . x`` is the interparticle vector."""
    keep = int(np.argmax(np.abs(w)))
    rows = np.eye(n)
    rows = np.vstack([w, np.delete(rows, keep, axis=0)])
    return np.linalg.inv(rows)


def _qmc_coulomb_term(A, B, w, n_points, replicates, seed):
    """QMC for ``int exp(-x^T C x) / |w . x| dx`` with the singularity sampled away.

    In coordinates ``z = (u, v)`` with ``u = w . x`` the interparticle
    vector, ``u`` is drawn from a density proportional to
    ``exp(-|u|^2 / 2 s^2) / |u|`` (Rayleigh radius, uniform direction) and
    ``v`` from the conditional Gaussian given ``u``.  Widths are inflated by
    1.5 so every importance weight is bounded, and the ``1/|u|`` cancels.
    """
    C = A + B
    n = C.shape[0]
    K = _pair_coordinates(w, n)
    Cz = K.T @ C @ K
    jac = abs(np.linalg.det(K)) ** 3
    cuu, cuv, cvv = Cz[0, 0], Cz[0, 1:], Cz[1:, 1:]
    schur = cuu
    if n > 1:
        shift = np.linalg.solve(cvv, cuv)  # conditional mean of v is -shift * u
        schur = cuu - cuv @ shift
        prec_v = 2 * cvv / 1.5
        chol_v = np.linalg.cholesky(np.linalg.inv(prec_v))
        log_norm_v = 1.5 * ((n - 1) * np.log(2 * np.pi) - np.linalg.slogdet(prec_v)[1])
    sigma2 = 1.5 / (2 * schur)
    estimates = []
    for r in range(replicates):
        sampler = stats.qmc.Sobol(d=3 * n, scramble=True, seed=np.random.default_rng([*np.atleast_1d(seed), r]))
        q = np.clip(sampler.random(n_points), 1e-16, 1 - 1e-16)
        rho = np.sqrt(-2 * sigma2 * np.log1p(-q[:, 0]))
        cos_t = 2 * q[:, 1] - 1
        sin_t = np.sqrt(1 - cos_t**2)
        phi = 2 * np.pi * q[:, 2]
        u = rho[:, None] * np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=1)
        z = np.empty((n_points, 3, n))
        z[:, :, 0] = u
        # log of q(u) |u|
        log_q = -rho**2 / (2 * sigma2) - np.log(4 * np.pi * sigma2)
        if n > 1:
            g = stats.norm.ppf(q[:, 3:]).reshape(n_points, 3, n - 1)
            z[:, :, 1:] = -u[:, :, None] * shift + np.einsum("ij,pcj->pci", chol_v, g)
            log_q = log_q - 0.5 * np.sum(g * g, axis=(1, 2)) - log_norm_v
        expo = -np.einsum("pci,ij,pcj->p", z, Cz, z)
        estimates.append(np.mean(np.exp(expo - log_q)))
    estimates = jac * np.array(estimates)
    return float(estimates.mean()), float(estimates.std(ddof=1) / np.sqrt(replicates))


def quadrature_oracle(
    f: SymmetrizedEcg,
    operator_tag: str,
    g: SymmetrizedEcg,
    *,
    mass_matrix=None,
    pair_vector=None,
    prefactor: float = 1.0,
    method: str = "auto",
    qmc_points: int = 2**14,
    qmc_replicates: int = 16,
    seed: int = 0,
) -> OracleResult:
    """Numerically integrate ``<f|O|g>`` for O in overlap, kinetic, coulomb.

    ``method`` is ``"auto"``, ``"quadrature"`` (``n <= 3`` for overlap and
    kinetic, ``n <= 2`` for Coulomb) or ``"qmc"``.  For QMC the reported
    error is one standard error.
    """
    if operator_tag not in OPERATORS:
        raise ValueError(f"unknown operator {operator_tag!r}; expected one of {OPERATORS}")
    if f.frame_id != g.frame_id:
        raise ValueError("functions live in different frames")
    n = f.matrices.shape[-1]
    if operator_tag == "kinetic" and mass_matrix is None:
        raise ValueError("kinetic oracle needs the frame mass matrix")
    if operator_tag == "coulomb":
        if pair_vector is None:
            raise ValueError("coulomb oracle needs a pair vector")
        pair_vector = np.asarray(pair_vector, dtype=float)
        if not np.any(pair_vector):
            raise ValueError("pair vector vanishes")
    limit = 2 if operator_tag == "coulomb" else 3
    if method == "auto":
        method = "quadrature" if n <= limit else "qmc"
    if method == "quadrature" and n > limit:
        raise ValueError(f"adaptive quadrature for {operator_tag} supports n <= {limit}, got {n}")
    if method not in ("quadrature", "qmc"):
        raise ValueError(f"unknown method {method!r}")

    total = 0.0
    err2 = 0.0
    err_abs = 0.0
    term = 0
    for wf, A in zip(f.weights, f.matrices):
        for wg, B in zip(g.weights, g.matrices):
            w = wf * wg
            # independent streams per term pair keep the summed error estimate honest
            stream = (seed, term)
            term += 1
            if method == "quadrature":
                if operator_tag == "overlap":
                    v, e = _overlap_term(A, B)
                elif operator_tag == "kinetic":
                    v, e = _kinetic_term(A, B, np.asarray(mass_matrix, dtype=float))
                elif n == 1:
                    v, e = _coulomb_term_radial(A, B, pair_vector)
                else:
                    v, e = _coulomb_term_reduced(A, B, pair_vector)
                total += w * v
                err_abs += abs(w) * e
            else:
                if operator_tag == "overlap":
                    v, e = _qmc_term(A, B, lambda x: np.ones(x.shape[0]), qmc_points, qmc_replicates, stream)
                elif operator_tag == "kinetic":
                    M = 4.0 * A @ np.asarray(mass_matrix) @ B
                    integrand = lambda x, M=M: np.einsum("pci,ij,pcj->p", x, M, x)
                    v, e = _qmc_term(A, B, integrand, qmc_points, qmc_replicates, stream)
                else:
                    v, e = _qmc_coulomb_term(A, B, pair_vector, qmc_points, qmc_replicates, stream)
                total += w * v
                err2 += (w * e) ** 2
    if operator_tag == "coulomb":
        total *= prefactor
        err_abs *= abs(prefactor)
        err2 *= prefactor**2
    if method == "quadrature":
        converged = err_abs <= 1e-8 * max(1.0, abs(total))
        return OracleResult(float(total), float(err_abs), "quadrature", converged)
    return OracleResult(float(total), float(np.sqrt(err2)), "qmc", True)


def density_oracle(A_bra, A_ket, R, R_prime) -> OracleResult:
    """Off-diagonal kernel ``int dy phi_bra(R, y) phi_ket(R', y)`` for single primitives.

    Both matrices are in a frame whose first coordinate is the particle; the
    remaining ``n - 1 <= 3`` coordinates are integrated numerically, one
    Cartesian component at a time.
    """
    A = np.asarray(A_bra, dtype=float)
    B = np.asarray(A_ket, dtype=float)
    R = np.asarray(R, dtype=float)
    Rp = np.asarray(R_prime, dtype=float)
    m = A.shape[0] - 1
    if not 1 <= m <= 3:
        raise ValueError("density oracle supports 2 to 4 coordinates")
    C = A[1:, 1:] + B[1:, 1:]
    L = _box(C, 1.2)
    value = 1.0
    rel_err = 0.0
    for c in range(3):
        def func(y, c=c):
            xa = np.concatenate([np.full((y.shape[0], 1), R[c]), y], axis=1)
            xb = np.concatenate([np.full((y.shape[0], 1), Rp[c]), y], axis=1)
            return np.exp(-np.einsum("pi,ij,pj->p", xa, A, xa) - np.einsum("pi,ij,pj->p", xb, B, xb))

        peak = -np.linalg.solve(C, A[1:, 0] * R[c] + B[1:, 0] * Rp[c])
        v, e = _cubature(func, m, L, 1e-11, center=peak)
        value *= v
        rel_err += e / abs(v) if v else np.inf
    return OracleResult(float(value), float(abs(value) * rel_err), "quadrature", rel_err < 1e-7)
