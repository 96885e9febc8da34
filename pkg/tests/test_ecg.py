from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgshape.ecg import (
    MAX_ABS_THETA,
    EcgPrimitive,
    SymmetrizedEcg,
    default_scale_range,
    pair_form_matrix,
    param_to_primitive,
    primitive_to_param,
    random_primitive,
    symmetrize,
    theta_to_matrix,
)
from ecgshape.system import build_frame, build_system, permutation_action


def test_primitive_validation():
    with pytest.raises(ValueError):
        EcgPrimitive(np.array([[1.0, 2.0], [2.0, 1.0]]), "f")
    with pytest.raises(ValueError):
        EcgPrimitive(np.array([[1.0, 0.5], [0.0, 1.0]]), "f")
    with pytest.raises(ValueError):
        EcgPrimitive(np.ones((2, 3)), "f")
    p = EcgPrimitive(np.eye(2), "f")
    assert not p.A.flags.writeable


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_parameter_roundtrip(theta):
    theta = np.array(theta)
    A = theta_to_matrix(theta, 3)
    assert np.linalg.eigvalsh(A).min() > 0
    assert np.allclose(primitive_to_param(A), theta, atol=1e-9)


def test_parameter_bounds():
    with pytest.raises(ValueError):
        theta_to_matrix(np.full(3, MAX_ABS_THETA + 1), 2)
    with pytest.raises(ValueError):
        theta_to_matrix(np.zeros(4), 2)
    frame = build_frame(build_system("h2"))
    assert param_to_primitive(np.zeros(6), frame).frame_id == frame.frame_id


def test_pair_form_matches_distances(rng):
    s = build_system("hehp")
    f = build_frame(s)
    alpha = rng.uniform(0.1, 2.0, 6)
    A = pair_form_matrix(alpha, f)
    r = rng.normal(size=(4, 3))
    x = f.coordinates(r)
    pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    direct = sum(a * np.sum((r[i] - r[j]) ** 2) for a, (i, j) in zip(alpha, pairs))
    assert np.isclose(np.einsum("ic,ij,jc->", x, A, x), direct)


def test_random_primitive_scale(rng):
    s = build_system("ps2")
    assert default_scale_range(s)[1] > default_scale_range(build_system("h2"))[1]
    f = build_frame(s)
    for _ in range(20):
        A = random_primitive(rng, s, f).A
        assert np.linalg.eigvalsh(A).min() > 0
    with pytest.raises(ValueError):
        random_primitive(rng, s, f, (2.0, 1.0))


@pytest.mark.parametrize("name", ["h2", "hehp", "ps2"])
def test_symmetrize_projects(name, rng):
    s = build_system(name)
    f = build_frame(s)
    A = random_primitive(rng, s, f).A
    g = symmetrize(EcgPrimitive(A, f.frame_id), s, f)
    assert np.isclose(g.weights.sum(), 1.0)
    assert np.array_equal(g.primitive, A)
    assert g.n_terms == len(s.group_permutations())
    # the symmetrized function is invariant under every group element
    x = rng.normal(size=(f.n_coords, 3))
    value = lambda y: sum(w * np.exp(-np.einsum("ic,ij,jc->", y, M, y)) for w, M in zip(g.weights, g.matrices))
    for perm in s.group_permutations():
        P = permutation_action(perm, f, s)
        assert np.isclose(value(P @ x), value(x), rtol=1e-12)


def test_symmetrize_merges_invariant_terms():
    s = build_system("h2")
    f = build_frame(s)
    # a primitive depending only on symmetric combinations collapses to one term
    A = pair_form_matrix(np.ones(6), f)
    g = symmetrize(EcgPrimitive(A, f.frame_id), s, f)
    assert g.n_terms == 1 and np.isclose(g.weights[0], 1.0)


def test_symmetrize_rejects_foreign_frame(rng):
    s = build_system("h2")
    a, b = build_frame(s, 0), build_frame(s, 2)
    with pytest.raises(ValueError):
        symmetrize(EcgPrimitive(np.eye(3), a.frame_id), s, b)


def test_symmetrized_shape_validation():
    with pytest.raises(ValueError):
        SymmetrizedEcg(np.ones(2), np.ones((3, 2, 2)), "f")
