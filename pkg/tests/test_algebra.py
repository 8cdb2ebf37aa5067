import numpy as np
import pytest
from numpy.testing import assert_allclose

from nilspec.algebra import (EndomorphismSpace, SigmaInvolution, assemble_h_type, bracket,
                             build_irreducible_clifford, clifford_defect, j_of,
                             normalized_endomorphism, perturb_clifford, ricci_xx, ricci_zz,
                             sigma_deform, sigma_from_partition, space_from_json, space_to_json)


@pytest.mark.parametrize("l", range(1, 9))
def test_clifford_relations_exact(l):
    m = build_irreducible_clifford(l)
    g = np.asarray(m.generators)
    assert np.issubdtype(g.dtype, np.integer)
    eye = np.eye(m.r, dtype=np.int64)
    for a in range(l):
        for b in range(l):
            d = g[a] @ g[b] + g[b] @ g[a]
            assert np.array_equal(d, -2 * eye if a == b else 0 * eye)


def test_module_dimensions():
    dims = {l: build_irreducible_clifford(l).r for l in range(1, 9)}
    assert dims == {1: 2, 2: 4, 3: 4, 4: 8, 5: 8, 6: 8, 7: 8, 8: 16}


def test_bracket_convention(h113, rng):
    X, Y = rng.standard_normal((2, h113.k))
    Z = rng.standard_normal(h113.l)
    assert_allclose(bracket(h113, X, Y) @ Z, (j_of(h113, Z) @ X) @ Y, atol=1e-13)
    assert_allclose(bracket(h113, X, Y), -bracket(h113, Y, X), atol=1e-13)


def test_h_type_square(h113, rng):
    Z = rng.standard_normal(3)
    J = j_of(h113, Z)
    assert_allclose(J @ J, -(Z @ Z) * np.eye(h113.k), atol=1e-12)
    assert h113.h_type


def test_sigma_deformation_of_h113_is_h203(h113, h203, sigma113):
    assert np.max(np.abs(np.asarray(sigma113.generators) - np.asarray(h203.generators))) == 0
    assert sigma113.tag == "sigma-deformed"


def test_sigma_deformation_keeps_squares(perturbed_pair, rng):
    s, t = perturbed_pair
    V = rng.standard_normal((5, 3))
    J, Jp = j_of(s, V), j_of(t, V)
    assert_allclose(J @ J, Jp @ Jp, atol=1e-12)
    assert not s.h_type and not t.h_type


def test_perturbation_is_deterministic_and_small():
    m = build_irreducible_clifford(3)
    p1 = perturb_clifford(m, 0.02, 42)
    p2 = perturb_clifford(m, 0.02, 42)
    assert np.array_equal(p1.generators, p2.generators)
    assert 0 < clifford_defect(p1) < 0.2
    assert clifford_defect(m) == 0


def test_invalid_sigma_rejected(h113):
    # a sigma mixing the two blocks does not commute with the generators
    P = np.eye(h113.k)
    P[[0, h113.k_a]] = P[[h113.k_a, 0]]
    with pytest.raises(ValueError):
        sigma_deform(h113, SigmaInvolution(P))


def test_empty_x_space_rejected():
    with pytest.raises(ValueError):
        assemble_h_type(build_irreducible_clifford(3), 0, 0)


def test_normalized_endomorphism_h_type(h113):
    V = np.array([0.0, 3.0, 4.0])
    ne = normalized_endomorphism(h113, V)
    assert_allclose(ne.matrix, j_of(h113, V) / 5.0, atol=1e-13)
    assert_allclose(ne.lambdas, 5.0, atol=1e-12)
    assert ne.kernel_dim == 0


def test_ricci_h_type_values(h113, rng):
    X = rng.standard_normal(h113.k)
    Z = rng.standard_normal(3)
    assert_allclose(ricci_xx(h113, X, X), -0.5 * 3 * (X @ X), rtol=1e-12)
    assert_allclose(ricci_zz(h113, Z, Z), 0.25 * h113.k * (Z @ Z), rtol=1e-12)


def test_json_round_trip(sigma113):
    back = space_from_json(space_to_json(sigma113))
    assert np.array_equal(back.generators, sigma113.generators)
    assert (back.a, back.b, back.tag) == (sigma113.a, sigma113.b, sigma113.tag)


def test_non_skew_rejected():
    with pytest.raises(ValueError):
        EndomorphismSpace(np.ones((1, 2, 2)))
