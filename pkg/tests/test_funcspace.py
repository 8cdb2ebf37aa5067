import numpy as np
import pytest
from numpy.testing import assert_allclose

from nilspec.algebra import j_of
from nilspec.funcspace import (SingularDirection, basis_rank, changing_basis, constant_basis,
                               coordinates, expansion_coefficient, make_one_pole, make_plain,
                               make_two_pole, polar_pole_coordinates, sphere_fourier,
                               standard_profile, theta)
from nilspec.quadrature import get_preset


def _pole(space, w=0.7):
    Q = np.zeros(space.k)
    Q[0] = 1.0
    Q[space.k_a] = w
    return Q


def test_theta_definition(h113, rng):
    Q, X = rng.standard_normal((2, h113.k))
    V = rng.standard_normal(3)
    Vu = V / np.linalg.norm(V)
    expected = Q @ X + 1j * (j_of(h113, Vu) @ Q) @ X
    assert_allclose(theta(h113, Q, X, Vu), expected, rtol=1e-13)
    with pytest.raises(ValueError):
        theta(h113, Q, X, V * 2)


def test_constant_basis_spans(h113):
    cb = constant_basis(h113)
    assert cb.n_slots == h113.k // 2
    assert cb.b_slots == (False, False, True, True)
    assert basis_rank(h113, cb, np.eye(3)[0]) == h113.k


def test_changing_basis_spans_everywhere(perturbed_pair, rng):
    s, _ = perturbed_pair
    ch = changing_basis(s)
    for _ in range(5):
        V = rng.standard_normal(3)
        assert basis_rank(s, ch, V / np.linalg.norm(V)) == s.k


def test_constant_basis_degenerates_at_e2(h113):
    # greedy scan at e_1; at e_2 the forms collapse to half rank
    cb = constant_basis(h113)
    ranks = [basis_rank(h113, cb, np.array([np.cos(t), np.sin(t), 0.0]))
             for t in np.linspace(0, np.pi, 13)]
    assert ranks[0] == h113.k and ranks[6] == h113.k // 2
    with pytest.raises(SingularDirection):
        coordinates(h113, cb, np.ones(h113.k), np.eye(3)[1])


def test_gaussian_transform(h113, quad):
    f = make_one_pole(h113, constant_basis(h113), _pole(h113), 0, 0, standard_profile(), quad=quad)
    Z = np.array([[0.0, 0.0, 0.0], [0.4, -0.3, 0.8], [1.0, 1.0, 0.5]])
    X = np.zeros((3, h113.k))
    expected = (2 * np.pi) ** 1.5 * np.exp(-np.sum(Z * Z, axis=1) / 2)
    assert_allclose(f(X, Z), expected, rtol=1e-10)


def test_one_pole_against_spherical_rule(h113, quad, rng):
    """Package quadrature vs a (r, cos t, phi) product rule built from theta()."""
    Q = _pole(h113)
    f = make_one_pole(h113, constant_basis(h113), Q, 2, 1, standard_profile(), quad=quad)
    X = 0.5 * rng.standard_normal(h113.k)
    Z = np.array([0.3, -0.2, 0.5])
    r, wr = np.polynomial.legendre.leggauss(60)
    r, wr = 6 * (r + 1), 6 * wr
    u, wu = np.polynomial.legendre.leggauss(40)
    ph = np.linspace(0, 2 * np.pi, 80, endpoint=False)
    U, P = np.meshgrid(u, ph, indexing="ij")
    s = np.sqrt(1 - U ** 2)
    dirs = np.stack([s * np.cos(P), s * np.sin(P), U], -1).reshape(-1, 3)
    wd = np.repeat(wu, len(ph)) * (2 * np.pi / len(ph))
    th = Q @ X + 1j * np.einsum("na,aij,j->ni", dirs, np.asarray(h113.generators, float), Q) @ X
    ang = th ** 2 * np.conj(th)
    phase = np.exp(1j * np.outer(r, dirs @ Z))
    ref = np.sum((wr * r ** 2 * np.exp(-r ** 2 / 2))[:, None] * phase * (wd * ang)[None])
    assert_allclose(f(X[None], Z[None])[0], ref, rtol=1e-9)


def test_pole_outside_span_rejected(h113, quad):
    cb = constant_basis(h113)
    bad = np.zeros(h113.k)
    bad[1] = 1.0
    if np.linalg.matrix_rank(np.vstack([cb.vectors, bad])) > cb.n_slots:
        with pytest.raises(ValueError, match="invalid pole"):
            make_one_pole(h113, cb, bad, 1, 0, standard_profile(), quad=quad)


def test_two_pole_components_checked(h113, quad):
    cb = constant_basis(h113)
    Qa = np.eye(h113.k)[0]
    with pytest.raises(ValueError, match="invalid pole"):
        make_two_pole(h113, cb, Qa, Qa, (1, 0, 1, 0), standard_profile(), quad=quad)


def test_plain_exponent_count(h113, quad):
    with pytest.raises(ValueError):
        make_plain(h113, constant_basis(h113), [(1, 0)], standard_profile(), quad=quad)


def test_a_pole_rebinding_is_identity(h113, sigma113, quad, rng):
    # on v^(a) the two structures coincide
    Qa = np.eye(h113.k)[0]
    f = make_one_pole(h113, constant_basis(h113), Qa, 1, 2, standard_profile(), quad=quad)
    X = rng.standard_normal((4, h113.k))
    Z = rng.standard_normal((4, 3))
    assert_allclose(f.rebind(sigma113)(X, Z), f(X, Z), rtol=1e-12)


def test_sphere_fourier_constant(h113, quad):
    R = 1.3
    f = sphere_fourier(h113, np.eye(h113.k)[0], 0, 0, R, None, get_preset("l3-fine"))
    Z = np.array([[0.2, 0.1, -0.4], [1.0, 0.0, 0.0]])
    z = np.linalg.norm(Z, axis=1)
    expected = 4 * np.pi * R ** 2 * np.sin(R * z) / (R * z)
    assert_allclose(f(np.zeros((2, h113.k)), Z), expected, rtol=1e-9)


@pytest.mark.parametrize("p,q", [(1, 0), (2, 1), (0, 3), (2, 2)])
def test_expansion_coefficients(h113, rng, p, q):
    Q = np.eye(h113.k)[0]
    X = rng.standard_normal(h113.k)
    norm, alpha, Z0 = polar_pole_coordinates(h113, Q, X)
    for _ in range(3):
        V = rng.standard_normal(3)
        Vu = V / np.linalg.norm(V)
        th = theta(h113, Q, X, Vu)
        lhs = th ** p * np.conj(th) ** q / norm ** (p + q)
        rhs = sum(expansion_coefficient(s, p, q) * np.cos(alpha) ** (p + q - s) * np.sin(alpha) ** s
                  * (Z0 @ Vu) ** s for s in range(p + q + 1))
        assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_vanishes_at_origin(h113, quad):
    f = make_one_pole(h113, constant_basis(h113), _pole(h113), 1, 2, standard_profile(), quad=quad)
    assert abs(f(np.zeros((1, h113.k)), np.array([[0.3, 0.1, 0.2]]))[0]) < 1e-14


def test_quadrature_self_convergence(h113, quad, rng):
    f = make_one_pole(h113, constant_basis(h113), _pole(h113), 2, 1, standard_profile(), quad=quad)
    X = rng.standard_normal((3, h113.k))
    Z = rng.standard_normal((3, 3))
    assert_allclose(f.with_quad(quad.refined(2))(X, Z), f(X, Z), rtol=1e-8, atol=1e-10)


def test_zero_node_quadrature_rejected():
    from nilspec.quadrature import QuadSpec
    with pytest.raises(ValueError):
        QuadSpec(0, 8)
