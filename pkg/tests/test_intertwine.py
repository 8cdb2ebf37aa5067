import numpy as np
import pytest
from numpy.testing import assert_allclose

from nilspec.algebra import j_of
from nilspec.funcspace import (PoleBasis, changing_basis, constant_basis, make_one_pole,
                               make_plain, make_two_pole, standard_profile)
from nilspec.intertwine import (KAPPA_SIGNS, DomainShape, KappaOperator, RejectedInput,
                                boundary_laplacian_check, boundary_samples, circle_samples,
                                dirichlet_check, identity_check_second_radial,
                                identity_check_z_neumann, independence_rank_test, neumann_check,
                                neumann_normal, numerical_rank, parity_decompose,
                                point_transformation, sample_points,
                                verify_intertwines_laplacian, z_neumann_check, z_neumann_twisted,
                                z_radial_derivative)
from nilspec.quadrature import get_preset


def _mixed(space):
    Q = np.zeros(space.k)
    Q[0] = 1.0
    Q[space.k_a] = 0.7
    return Q


@pytest.fixture(scope="module")
def pts():
    return sample_points(8, 3, 6, 21)


def test_kappa_requires_sigma_pair(h113, perturbed_pair):
    with pytest.raises(ValueError, match="sigma-deformation"):
        KappaOperator(h113, perturbed_pair[0])


@pytest.mark.parametrize("kind", ["one-pole", "two-pole"])
def test_laplacian_intertwining_sigma_pair(h113, sigma113, quad, pts, kind):
    cb = constant_basis(h113)
    if kind == "one-pole":
        f = make_one_pole(h113, cb, _mixed(h113), 2, 1, standard_profile(), quad=quad)
    else:
        a, b = np.eye(8)[0], np.eye(8)[4]
        f = make_two_pole(h113, cb, a, b, (1, 1, 0, 1), standard_profile(), quad=quad)
    r = verify_intertwines_laplacian(KappaOperator(h113, sigma113, cb), f, *pts)
    assert r["verdict"], (r["max_residual"], r["max_source_residual"])


def test_laplacian_intertwining_perturbed_changing_basis(perturbed_pair, quad, pts):
    s, t = perturbed_pair
    ch = changing_basis(s)
    f = make_plain(s, ch, [(1, 0), (0, 0), (0, 0), (1, 1)], standard_profile(), quad=quad)
    r = verify_intertwines_laplacian(KappaOperator(s, t), f, *pts)
    assert r["verdict"], r["max_residual"]


def test_constant_basis_cross_b_product_is_not_intertwined(h113, sigma113, quad, pts):
    """z_i conj(z_j) with two different b-slots of a constant basis breaks intertwining."""
    cb = constant_basis(h113)
    assert cb.b_slots[2] and cb.b_slots[3]
    f = make_plain(h113, cb, [(0, 0), (0, 0), (1, 0), (0, 1)], standard_profile(), quad=quad)
    r = verify_intertwines_laplacian(KappaOperator(h113, sigma113, cb), f, *pts)
    assert r["max_source_residual"] < 1e-4
    assert r["max_residual"] > 0.5
    # the same slot squared is fine
    g = make_plain(h113, cb, [(0, 0), (0, 0), (1, 1), (0, 0)], standard_profile(), quad=quad)
    assert verify_intertwines_laplacian(KappaOperator(h113, sigma113, cb), g, *pts)["verdict"]


def test_parity_decomposition(h113, sigma113, quad, pts):
    cb = constant_basis(h113)
    f = make_two_pole(h113, cb, np.eye(8)[0], np.eye(8)[4], (1, 1, 1, 0), standard_profile(), quad=quad)
    d = parity_decompose(f)
    assert d.reconstruction_exact and d.kappa_signs_exact
    X, Z = pts
    total = sum(p(X, Z) for p in d.parts.values())
    assert_allclose(total, f(X, Z), rtol=1e-10, atol=1e-12)
    signed = sum(KAPPA_SIGNS[k] * p(X, Z) for k, p in d.parts.items())
    assert_allclose(signed, f.rebind(sigma113)(X, Z), rtol=1e-10, atol=1e-12)
    assert {KAPPA_SIGNS[t] for t in d.parts} <= {1, -1}


def test_numerical_rank():
    M = np.outer([1.0, 2.0, 3.0], [1.0, 0.0, 1.0]) + 1e-12 * np.eye(3)
    assert numerical_rank(M, 1e-8) == 1
    assert numerical_rank(np.eye(4), 1e-8) == 4


def test_independence_small(h113):
    quad = get_preset("l3-coarse")
    basis = PoleBasis("constant", vectors=np.eye(h113.k))
    rng = np.random.default_rng(0)
    ev, od = [], []
    for _ in range(2):
        Q = rng.standard_normal(h113.k)
        for p in range(3):
            d = parity_decompose(make_one_pole(h113, basis, Q, p, 2 - p, standard_profile(), quad=quad))
            for tag, part in d.parts.items():
                if d.polys[tag]:
                    (ev if tag.j == "evn" else od).append(part)
    X = circle_samples(h113.k, 1.0, 3, 8, 5)
    Z = np.random.default_rng(9).standard_normal((4, 3))
    r = independence_rank_test({"evn": ev, "odd": od}, X, Z, 1e-8, control=True)
    assert r["additive"]
    assert not r["control"]["additive"]


def test_point_transformation(h113, sigma113):
    Q = _mixed(h113)
    T = point_transformation(h113, sigma113, Q)
    assert_allclose(T.T @ T, np.eye(8), atol=1e-12)
    assert_allclose(T.T @ Q, Q, atol=1e-12)
    for a in range(3):
        assert_allclose(T.T @ (h113.generators[a] @ Q), sigma113.generators[a] @ Q, atol=1e-12)


def test_point_transformation_realizes_kappa(h113, sigma113, quad, pts):
    Q = _mixed(h113)
    f = make_one_pole(h113, constant_basis(h113), Q, 2, 1, standard_profile(), quad=quad)
    T = point_transformation(h113, sigma113, Q)
    X, Z = pts
    assert_allclose(f.rebind(sigma113)(X, Z), f(X @ T.T, Z), rtol=1e-10, atol=1e-12)


BALL = DomainShape("ball", 2.0, (1.5, 0.0, -0.2))
SB = DomainShape("sphere-ball", 1.2, (1.5,))


def test_boundary_samples_lie_on_boundary():
    X, Z = boundary_samples(BALL, 8, 3, 10, 0)
    assert_allclose(np.linalg.norm(Z, axis=1), BALL.R_Z(np.linalg.norm(X, axis=1)), rtol=1e-12)
    X, Z = boundary_samples(SB, 8, 3, 10, 0)
    assert_allclose(np.linalg.norm(X, axis=1), 1.2, rtol=1e-12)


def test_dirichlet_for_cutoff(h113, quad):
    f = make_one_pole(h113, constant_basis(h113), _mixed(h113), 1, 0, standard_profile(), quad=quad)
    X, Z = boundary_samples(BALL, 8, 3, 8, 1)

    def g(X, Z):
        return (np.sum(Z * Z, 1) - BALL.R_Z(np.linalg.norm(X, axis=1)) ** 2) * f(X, Z)

    assert dirichlet_check(g, X, Z)["verdict"]
    assert not dirichlet_check(f, X, Z)["verdict"]


def test_identity_oracles_select_constants(h113, quad):
    f = make_one_pole(h113, constant_basis(h113), _mixed(h113), 1, 1, standard_profile(), quad=quad)
    X, Z = sample_points(8, 3, 5, 4)
    Z = 1.3 * Z
    zn = identity_check_z_neumann(f, X, Z)
    assert zn["selected"] == "-1/|Z|" and zn["max_residual"] < 1e-4
    assert zn["residuals"]["-|Z|"] > 1e-2
    sr = identity_check_second_radial(f, X, Z)
    assert sr["selected"] == "l(l+1)" and sr["max_residual"] < 1e-4
    assert sr["residuals"]["l"] > 1e-2


def test_neumann_normal_span(h113):
    X, Z = boundary_samples(BALL, 8, 3, 12, 3)
    for x, z in zip(X, Z):
        assert neumann_normal(h113, BALL, x, z)["span_residual"] < 1e-8
    assert neumann_check(h113, BALL, X, Z)["verdict"]


def test_cylinder_normal_has_b_component(h113):
    # R_Z constant: the normal is radial in Z, which is not purely C * Z
    cyl = DomainShape("ball", 2.0, (1.5,))
    X, Z = boundary_samples(cyl, 8, 3, 4, 0)
    r = neumann_normal(h113, cyl, X[0], Z[0])
    A, B, C = r["coefficients"]
    assert r["span_residual"] < 1e-8
    assert abs(B) > 1e-3


def test_boundary_sphere_ball(h113, sigma113, quad):
    Q = _mixed(h113)
    f = make_one_pole(h113, constant_basis(h113), Q, 1, 1, standard_profile(), quad=quad)
    X, Z = boundary_samples(SB, 8, 3, 4, 0)
    r = boundary_laplacian_check(h113, sigma113, Q, f, X, 0.6 * Z, "sphere-ball")
    assert r["verdict"], r["max_residual"]


def test_boundary_sphere_sphere_twisted(h113, sigma113, quad):
    Q = _mixed(h113)
    f = z_neumann_twisted(h113, constant_basis(h113), Q, 1, 0, 1.5, 1.2, quad=quad)
    X, Z = boundary_samples(SB, 8, 3, 4, 0)
    assert z_neumann_check(f, X, Z)["verdict"]
    assert z_neumann_check(f.rebind(sigma113), X, Z)["verdict"]
    r = boundary_laplacian_check(h113, sigma113, Q, f, X, Z, "sphere-sphere")
    assert r["verdict"], r["max_residual"]


def test_boundary_sphere_sphere_rejects_without_z_neumann(h113, sigma113, quad):
    Q = _mixed(h113)
    f = make_one_pole(h113, constant_basis(h113), Q, 1, 0, standard_profile(), quad=quad)
    X, Z = boundary_samples(SB, 8, 3, 3, 0)
    with pytest.raises(RejectedInput):
        boundary_laplacian_check(h113, sigma113, Q, f, X, Z, "sphere-sphere")


def test_multiplier_extension_breaks_sphere_sphere(h113, sigma113, quad):
    """F - (|Z| - R) dF/d|Z| meets Z-Neumann but leaves the twisted class; intertwining fails."""
    Q = _mixed(h113)
    F = make_one_pole(h113, constant_basis(h113), Q, 1, 1, standard_profile(), quad=quad)

    def f(X, Z):
        X, Z = np.atleast_2d(X), np.atleast_2d(Z)
        m = np.linalg.norm(Z, axis=1) - 1.5
        return F(X, Z) - m * z_radial_derivative(F, X, Z, richardson=True)

    X, Z = boundary_samples(SB, 8, 3, 4, 0)
    assert z_neumann_check(f, X, Z)["verdict"]
    r = boundary_laplacian_check(h113, sigma113, Q, f, X, Z, "sphere-sphere")
    assert r["max_residual"] > 1e-2
