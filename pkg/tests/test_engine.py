from __future__ import annotations

import warnings

import numpy as np
import pytest
from scipy.linalg import eigh

from ecgshape import engine
from ecgshape.engine import (
    DegenerateBasisError,
    Wavefunction,
    assemble_parts,
    converge_report,
    expectation_values,
    grow_basis,
    matrices,
    refine,
    solve,
    solve_gevp,
)
from ecgshape.system import PROTON_MASS, Particle, SystemDefinition, build_system

H_ATOM = SystemDefinition((Particle(PROTON_MASS, 1.0, "p"), Particle(1.0, -1.0, "e")), (), "h_atom")
PS_MINUS = SystemDefinition((Particle(1.0, 1.0, "e+"), Particle(1.0, -1.0, "e"), Particle(1.0, -1.0, "e")), ((1, 2),), "ps_minus")
H_ATOM_EXACT = -0.5 * PROTON_MASS / (PROTON_MASS + 1.0)
PS_MINUS_EXACT = -0.262005070
H2_EXACT = -1.164025031


def _spd(rng, m, cond=1.0):
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    return Q @ np.diag(np.geomspace(1.0, 1.0 / cond, m)) @ Q.T


def test_solve_gevp_matches_scipy(rng):
    S = _spd(rng, 8, 1e3)
    H = rng.normal(size=(8, 8))
    H = H + H.T
    sol = solve_gevp(H, S)
    ref = eigh(H, S, eigvals_only=True)
    assert sol.retained_dimension == 8
    assert np.allclose(sol.energies, ref, rtol=1e-10, atol=1e-10)
    C = sol.coefficients
    assert np.allclose(C.T @ S @ C, np.eye(8), atol=1e-9)


def test_solve_gevp_drops_dependent_directions(rng):
    S0 = _spd(rng, 5)
    H0 = rng.normal(size=(5, 5))
    H0 = H0 + H0.T
    # duplicate the first function: S becomes singular
    E = np.vstack([np.eye(5), np.eye(5)[:1]])
    sol = solve_gevp(E @ H0 @ E.T, E @ S0 @ E.T)
    assert sol.retained_dimension == 5
    assert np.isclose(sol.ground_energy, eigh(H0, S0, eigvals_only=True)[0], rtol=1e-9)
    with pytest.raises(DegenerateBasisError):
        solve_gevp(np.zeros((2, 2)), np.zeros((2, 2)))


def test_bordered_root_matches_full_solve(rng):
    S = _spd(rng, 7, 1e2)
    H = rng.normal(size=(7, 7))
    H = H + H.T
    sol = solve_gevp(H[:6, :6], S[:6, :6])
    e = engine._bordered_lowest(sol.energies, sol.coefficients, S[:6, 6], H[:6, 6], S[6, 6], H[6, 6])
    assert np.isclose(e, eigh(H, S, eigvals_only=True)[0], rtol=1e-10)


def test_workspace_matrices_match_termwise_assembly(h2_small):
    S, T, V = matrices(h2_small)
    S2, T2, V2 = assemble_parts(h2_small.basis, h2_small.system, h2_small.frame)
    for a, b in zip((S, T, V), (S2, T2, V2)):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-14 * np.abs(b).max())


def test_growth_is_monotone_and_deterministic():
    system = build_system("h2")
    a = solve(system, seed=11, basis_size=8, trials=6, refine_cycles=1)
    b = solve(system, seed=11, basis_size=8, trials=6, refine_cycles=1)
    c = solve(system, seed=12, basis_size=8, trials=6, refine_cycles=1)
    energies = [h.energy for h in a.history]
    assert all(e2 <= e1 + 1e-12 * abs(e1) for e1, e2 in zip(energies, energies[1:]))
    assert a.energy == b.energy
    assert np.array_equal(a.primitives(), b.primitives())
    assert a.energy != c.energy
    assert a.size == 8
    assert [h.kind for h in a.history].count("refine") == 2


def test_refine_never_raises_energy(h2_small):
    out = refine(h2_small, cycles=1)
    assert out.energy <= h2_small.energy + 1e-12
    assert refine(h2_small, cycles=0) is h2_small
    with pytest.raises(ValueError):
        refine(h2_small, cycles=-1)


def test_grow_basis_argument_checks(h2_small):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        grow_basis(h2_small, rng, trials_per_step=0, target_size=20)
    with pytest.raises(ValueError):
        grow_basis(h2_small, rng, target_size=2)


def test_variational_bounds(h2_small):
    psi = solve(H_ATOM, seed=1, basis_size=10, trials=8, refine_cycles=1)
    assert H_ATOM_EXACT < psi.energy < H_ATOM_EXACT + 2e-4
    psi = solve(PS_MINUS, seed=1, basis_size=16, trials=8, refine_cycles=1)
    assert PS_MINUS_EXACT < psi.energy < PS_MINUS_EXACT + 0.01
    assert H2_EXACT < h2_small.energy < -1.0


def test_expectation_values_and_report():
    psi = solve(H_ATOM, seed=1, basis_size=10, trials=8, refine_cycles=1)
    norm, t, v = expectation_values(psi)
    assert np.isclose(norm, 1.0)
    assert np.isclose(t + v, psi.energy, rtol=1e-12)
    rep = converge_report(psi.history, psi)
    assert rep.basis_size == 10
    assert np.isclose(rep.virial_ratio, -2.0, atol=2e-3)
    assert rep.half_size_energy >= rep.energy
    assert rep.relative_delta_energy == abs(rep.delta_energy / rep.energy)
    assert 0 < rep.overlap_condition <= 1
    with pytest.raises(ValueError):
        converge_report([], psi)


def test_empty_wavefunction():
    psi = Wavefunction.empty(build_system("h2"))
    assert psi.size == 0
    assert psi.primitives().shape == (0, 3, 3)


def test_failed_steps_warn(h2_small):
    # an impossible sampling range yields no improving candidates
    rng = np.random.default_rng(0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = grow_basis(h2_small, rng, trials_per_step=2, target_size=h2_small.size + 1, scale_range=(500.0, 501.0), max_failed_steps=3)
    assert out.size == h2_small.size
    assert any("exhausted" in str(w.message) for w in caught)
