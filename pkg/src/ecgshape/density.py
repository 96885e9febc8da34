"""One-particle reduced density matrix between rotated configurations.

For particle ``a`` the wavefunction is re-expressed in the frame whose first
coordinate is ``R = r_a - R_cm`` (see :func:`ecgshape.system.build_frame`);
all remaining frame coordinates are integrated out::

    rho(R, R') = int dy  Psi(R, y) Psi(R', y)

For a pair of Gaussian terms the integral is closed form and only depends
on ``|R|^2``, ``|R'|^2`` and ``R . R'``::

    C exp(-p |R|^2 - p' |R'|^2 + 2 q R . R')
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Wavefunction
from .system import build_frame, frame_transform

DEFAULT_THETA_STEP = 1.0
DEFAULT_COMMON_RADIUS = 0.7  # bohr; common radius of the H2-family comparison


@dataclass(frozen=True, eq=False)
class DensityKernel:
    """Per term-pair coefficients ``C, p, p', q`` of the density kernel."""

    particle: int
    prefactor: np.ndarray
    p: np.ndarray
    p_prime: np.ndarray
    q: np.ndarray

    def __call__(self, R, R_prime) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        Rp = np.asarray(R_prime, dtype=float)
        rr = np.einsum("...c,...c->...", R, R)
        pp = np.einsum("...c,...c->...", Rp, Rp)
        rp = np.einsum("...c,...c->...", R, Rp)
        return self.evaluate(rr, pp, rp)

    def evaluate(self, rr, pp, rp) -> np.ndarray:
        """Kernel from the invariants ``|R|^2``, ``|R'|^2`` and ``R . R'``."""
        rr, pp, rp = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (rr, pp, rp)))
        flat = np.stack([rr.ravel(), pp.ravel(), rp.ravel()])
        out = np.empty(flat.shape[1])
        chunk = max(1, 2_000_000 // self.p.size)
        for lo in range(0, flat.shape[1], chunk):
            x = flat[:, lo : lo + chunk, None]
            expo = -self.p * x[0] - self.p_prime * x[1] + 2.0 * self.q * x[2]
            out[lo : lo + chunk] = np.exp(expo) @ self.prefactor
        return out.reshape(rr.shape)


def density_kernel(psi: Wavefunction, particle: int) -> DensityKernel:
    """Kernel of the normalized density of ``particle``; cached on ``psi``."""
    key = ("density_kernel", particle)
    if key in psi._cache:
        return psi._cache[key]
    system = psi.system
    if not 0 <= particle < system.n_particles:
        raise ValueError(f"particle index {particle} out of range")
    dst = build_frame(system, particle)
    n = dst.n_coords
    mats = np.concatenate([frame_transform(f.matrices, psi.frame, dst) for f in psi.basis])
    weights = np.concatenate([c * f.weights for c, f in zip(psi.coefficients, psi.basis)])

    a = mats[:, None]
    b = mats[None, :]
    w = weights[:, None] * weights[None, :]
    C = a[..., 1:, 1:] + b[..., 1:, 1:]
    det = np.linalg.det(C)
    assert np.all(det > 0), "integrated block is not positive definite"
    Cinv = np.linalg.inv(C)
    ar = a[..., 1:, 0]
    br = b[..., 1:, 0]
    qa = np.einsum("...j,...jk,...k->...", ar, Cinv, ar)
    qb = np.einsum("...j,...jk,...k->...", br, Cinv, br)
    qab = np.einsum("...j,...jk,...k->...", ar, Cinv, br)
    pref = w * (np.pi ** (n - 1) / det) ** 1.5

    # norm in the destination coordinates absorbs the Jacobian of the frame change
    full = mats[:, None] + mats[None, :]
    norm = float(np.sum(w * (np.pi**n / np.linalg.det(full)) ** 1.5))
    kernel = DensityKernel(
        particle,
        (pref / norm).ravel(),
        (a[..., 0, 0] - qa).ravel(),
        (b[..., 0, 0] - qb).ravel(),
        qab.ravel(),
    )
    psi._cache[key] = kernel
    return kernel


def density_offdiag(psi: Wavefunction, particle: int, R, R_prime) -> np.ndarray:
    """``rho(R, R')`` in bohr^-3; accepts stacked 3-vectors."""
    return density_kernel(psi, particle)(R, R_prime)


def density_diag(psi: Wavefunction, particle: int, radius) -> np.ndarray:
    r2 = np.asarray(radius, dtype=float) ** 2
    return density_kernel(psi, particle).evaluate(r2, r2, r2)


def rotated_pair(radius: float, theta_deg):
    """``R = (0, 0, r)`` and ``R'`` rotated by ``theta`` about the y axis."""
    t = np.radians(np.asarray(theta_deg, dtype=float))
    R = np.broadcast_to(np.array([0.0, 0.0, radius]), t.shape + (3,))
    Rp = np.stack([radius * np.sin(t), np.zeros_like(t), radius * np.cos(t)], axis=-1)
    return R, Rp


@dataclass(frozen=True)
class DensityScan:
    particle: int
    radius: float
    theta_grid: np.ndarray
    diag: float
    offdiag: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.offdiag / self.diag


def theta_grid(step: float = DEFAULT_THETA_STEP) -> np.ndarray:
    n = int(round(360.0 / step))
    if n < 2 or not np.isclose(n * step, 360.0):
        raise ValueError(f"theta step {step} must divide 360")
    return np.arange(n) * step


def suppression_scan(psi: Wavefunction, particle: int, radius: float | None = None, theta=None) -> DensityScan:
    """Normalized off-diagonal density on a rotation-angle grid in degrees."""
    if radius is None:
        radius = default_scan_radius(psi, particle)
    if not radius > 0:
        raise ValueError("scan radius must be positive")
    theta = theta_grid() if theta is None else np.asarray(theta, dtype=float)
    kernel = density_kernel(psi, particle)
    r2 = radius * radius
    diag = float(kernel.evaluate(r2, r2, r2))
    if diag < 1e-300:
        raise ValueError(f"radius {radius} bohr outside support of the density")
    off = kernel.evaluate(r2, r2, r2 * np.cos(np.radians(theta)))
    off = np.where(np.isclose(np.mod(theta, 360.0), 0.0), diag, off)
    return DensityScan(particle, float(radius), theta, diag, off)


@dataclass(frozen=True)
class ScanFeatures:
    minimum_value: float
    minimum_angles: tuple[float, ...]
    local_maxima: tuple[float, ...]
    periodicity_defect: float
    depth: float


def _circular_interp(theta, values, query):
    order = np.argsort(theta)
    t = np.asarray(theta, dtype=float)[order]
    v = np.asarray(values, dtype=float)[order]
    return np.interp(np.mod(query, 360.0), np.r_[t, t[0] + 360.0], np.r_[v, v[0]])


def extract_features(scan: DensityScan, tie_tolerance: float = 1e-6) -> ScanFeatures:
    """Global minima, interior local maxima, 180-degree periodicity defect, depth."""
    theta = np.asarray(scan.theta_grid, dtype=float)
    if theta.size > 1 and np.max(np.diff(np.sort(theta))) > 2.0 + 1e-9:
        raise ValueError("feature extraction needs a grid spacing of at most 2 degrees")
    r = scan.ratio
    left = np.roll(r, 1)
    right = np.roll(r, -1)
    lowest = float(r.min())
    is_min = (r <= left) & (r <= right) & (r <= lowest + tie_tolerance)
    is_max = (r > left) & (r >= right) | (r >= left) & (r > right)
    interior = ~np.isclose(np.mod(theta, 360.0), 0.0)
    defect = float(np.max(np.abs(r - _circular_interp(theta, r, theta + 180.0))))
    return ScanFeatures(
        minimum_value=lowest,
        minimum_angles=tuple(float(t) for t in theta[is_min]),
        local_maxima=tuple(float(t) for t in theta[is_max & interior]),
        periodicity_defect=defect,
        depth=1.0 - lowest,
    )


def radial_grid(r_max: float = 10.0, step: float = 0.01) -> np.ndarray:
    return np.linspace(0.0, r_max, int(round(r_max / step)) + 1)


def radial_argmax(psi: Wavefunction, particle: int, grid=None, shell: bool = False) -> float:
    """Arg max of ``rho(R, R)`` (or of ``4 pi R^2 rho`` with ``shell``), refined by a parabola."""
    grid = radial_grid() if grid is None else np.asarray(grid, dtype=float)
    values = density_diag(psi, particle, grid)
    if shell:
        values = 4 * np.pi * grid**2 * values
    return _parabolic_peak(grid, values)


def _parabolic_peak(x, y) -> float:
    k = int(np.argmax(y))
    if k == 0 or k == len(x) - 1:
        return float(x[k])
    x0, x1, x2 = x[k - 1 : k + 2]
    y0, y1, y2 = y[k - 1 : k + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def default_scan_radius(psi: Wavefunction, particle: int) -> float:
    """Radius of the diagonal maximum; the common 0.7 bohr when that maximum is the origin."""
    r = radial_argmax(psi, particle)
    return r if r > 0 else DEFAULT_COMMON_RADIUS


def radial_normalization(psi: Wavefunction, particle: int, r_max: float = 30.0, points: int = 6001) -> float:
    """``int 4 pi R^2 rho(R, R) dR`` by Simpson quadrature."""
    from scipy.integrate import simpson

    r = np.linspace(0.0, r_max, points)
    return float(simpson(4 * np.pi * r**2 * density_diag(psi, particle, r), x=r))
