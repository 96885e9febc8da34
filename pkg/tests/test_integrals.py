from __future__ import annotations

import numpy as np
import pytest

from ecgshape import integrals
from ecgshape.ecg import EcgPrimitive, SymmetrizedEcg, random_primitive, symmetrize
from ecgshape.oracle import quadrature_oracle
from ecgshape.system import build_frame, build_system, coordinate_map, frame_transform
from ecgshape.validation import QMC_SIGMAS, QUADRATURE_RTOL, validate_system, validation_systems


@pytest.mark.parametrize("system", validation_systems(), ids=lambda s: s.name)
def test_closed_forms_match_oracle(system):
    rows = validate_system(system, np.random.default_rng(7))
    for row in rows:
        if row.n <= 2:
            assert row.method == "quadrature"
            assert row.deviation <= QUADRATURE_RTOL * abs(row.analytic), row
        else:
            assert row.passed, row
            if row.method == "qmc":
                assert row.deviation <= QMC_SIGMAS * row.error


def test_single_gaussian_overlap_and_kinetic():
    # hydrogen-like two-body problem: one coordinate, exp(-a x^2)
    s = build_system(particles=build_system("h2").particles[::2][:2])
    f0 = build_frame(s)
    a = 0.7
    f = SymmetrizedEcg.single([[a]], f0.frame_id)
    S = integrals.overlap(f, f)
    assert np.isclose(S, (np.pi / (2 * a)) ** 1.5, rtol=1e-14)
    # <T> = 3 lambda a for a normalized Gaussian exp(-a x^2), lambda = mass-matrix entry
    lam = f0.mass_matrix[0, 0]
    assert np.isclose(integrals.kinetic(f, f, f0.mass_matrix) / S, 3 * lam * a, rtol=1e-13)
    # <1/r> for exp(-2a r^2) is 2 sqrt(2a/pi); here r = |w| x
    pair = integrals.pair_interactions(s, f0)[0]
    v = integrals.coulomb_pair(f, f, pair) / S
    assert np.isclose(v, pair.prefactor * 2 * np.sqrt(2 * a / np.pi) / abs(pair.w[0]), rtol=1e-13)


@pytest.mark.parametrize("name", ["h2", "hehp"])
def test_hermiticity_and_symmetry(name, rng):
    s = build_system(name)
    f0 = build_frame(s)
    f = symmetrize(random_primitive(rng, s, f0), s, f0)
    g = symmetrize(random_primitive(rng, s, f0), s, f0)
    fg = integrals.hamiltonian_element(f, g, s, f0)
    gf = integrals.hamiltonian_element(g, f, s, f0)
    for a, b in zip((fg.S, fg.T, fg.V), (gf.S, gf.T, gf.V)):
        assert np.isclose(a, b, rtol=1e-12)
    ff = integrals.hamiltonian_element(f, f, s, f0)
    assert ff.S > 0 and ff.T > 0


def test_frame_invariance(rng):
    s = build_system("hehp")
    a = build_frame(s, 0)
    b = build_frame(s, 2)
    f = symmetrize(random_primitive(rng, s, a), s, a)
    g = symmetrize(random_primitive(rng, s, a), s, a)
    moved = lambda h: SymmetrizedEcg(h.weights, frame_transform(h.matrices, a, b), b.frame_id)
    ea = integrals.hamiltonian_element(f, g, s, a)
    eb = integrals.hamiltonian_element(moved(f), moved(g), s, b)
    jac = abs(np.linalg.det(coordinate_map(a, b))) ** 3
    for x, y in zip((ea.S, ea.T, ea.V), (eb.S, eb.T, eb.V)):
        assert np.isclose(y, jac * x, rtol=1e-10)


def test_errors(rng):
    s = build_system("h2")
    a, b = build_frame(s, 0), build_frame(s, 2)
    f = SymmetrizedEcg.single(random_primitive(rng, s, a).A, a.frame_id)
    g = SymmetrizedEcg.single(random_primitive(rng, s, b).A, b.frame_id)
    with pytest.raises(ValueError):
        integrals.overlap(f, g)
    with pytest.raises(ValueError):
        integrals.coulomb_pair(f, f, integrals.PairInteraction(0, 1, 1.0, np.zeros(3)))
    with pytest.raises(ValueError):
        integrals.PairInteraction(1, 0, 1.0, np.ones(3))
    with pytest.raises(ValueError):
        integrals.hamiltonian_element(g, g, s, a)


def test_oracle_argument_checks(rng):
    s = build_system("h2")
    a = build_frame(s)
    f = SymmetrizedEcg.single(random_primitive(rng, s, a).A, a.frame_id)
    with pytest.raises(ValueError):
        quadrature_oracle(f, "dipole", f)
    with pytest.raises(ValueError):
        quadrature_oracle(f, "kinetic", f)
    with pytest.raises(ValueError):
        quadrature_oracle(f, "coulomb", f, pair_vector=np.zeros(3))
    with pytest.raises(ValueError):
        quadrature_oracle(f, "coulomb", f, pair_vector=np.ones(3), method="quadrature")


def test_oracle_gaussian_moment():
    # exp(-x^T C x) over R^(3n) for a diagonal C is a product of 1D integrals
    C = np.diag([0.5, 1.5])
    f = SymmetrizedEcg.single(C / 2, "f")
    res = quadrature_oracle(f, "overlap", f)
    assert np.isclose(res.value, np.prod(np.pi / np.diag(C)) ** 1.5, rtol=1e-10)
    assert res.converged
