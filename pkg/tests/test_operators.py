from math import comb

import numpy as np
import pytest
import sympy
from numpy.testing import assert_allclose

from nilspec.algebra import j_of
from nilspec.funcspace import constant_basis, make_one_pole, standard_profile
from nilspec.intertwine import relative_residuals, sample_points
from nilspec.operators import (HermiteBasisSpec, apply_D_V, apply_D_V_symbolic, apply_delta_X,
                               apply_full_laplacian, apply_M, box_matrix, delta_Z_fd,
                               harmonic_projection, integrand_delta_Z, integrand_laplacian,
                               integrand_M, level_states, projection_coefficients,
                               theta_eigen_sign)
from nilspec.polyexpr import PolyExpr, norm_squared, theta_poly, variables


def _pole(space):
    Q = np.zeros(space.k)
    Q[0] = 1.0
    Q[space.k_a] = 0.7
    return Q


def test_harmonic_projection_kills_laplacian():
    x = variables(4)
    p = x[0] ** 3 * x[1] + 3 * x[2] ** 2 * x[3] ** 2 - x[1] ** 4
    h = harmonic_projection(p)
    assert apply_delta_X(h).is_zero()
    # the difference is divisible by |X|^2: it vanishes on the null cone x0 = i x1
    assert not (h - p).is_zero()


def test_projection_fixes_harmonics():
    x = variables(3)
    p = x[0] * x[1] * x[2] + x[0] ** 3 - 3 * x[0] * x[1] ** 2
    assert apply_delta_X(p).is_zero()
    assert harmonic_projection(p) == p


def test_projection_of_norm_power_vanishes():
    assert harmonic_projection(norm_squared(5) ** 2).is_zero()


def test_projection_rejects_inhomogeneous():
    x = variables(2)
    with pytest.raises(ValueError):
        harmonic_projection(x[0] ** 2 + x[1])


def test_projection_coefficients_match_linear_solve():
    # generic p: x0^n in k variables
    for k, n in [(2, 4), (4, 5), (8, 6)]:
        B = projection_coefficients(n, k)
        p = variables(k)[0] ** n
        h = harmonic_projection(p)
        r2 = norm_squared(k)
        lap, rpow, built = p, PolyExpr.one(k), p
        for b in B[1:]:
            lap = apply_delta_X(lap)
            rpow = rpow * r2
            built = built + rpow * lap * sympy.Rational(b.numerator, b.denominator)
        assert built == h


def test_theta_sign_is_minus_one(h113, h203):
    Q = [1, 0, 0, 0, 2, 0, 0, 0]
    assert theta_eigen_sign(h113, Q, [0, 3, 4]) == -1
    assert theta_eigen_sign(h203, Q, [2, 3, 6]) == -1


def test_d_v_symbolic_on_theta_power(h113):
    Q = [1, 0, 0, 0, 0, 0, 0, 0]
    V = [3, 4, 0]
    G = np.asarray(h113.generators)
    J = sum((V[a] * sympy.Matrix(G[a].tolist()) for a in range(3)), sympy.zeros(8))
    JQ = list(J / 5 * sympy.Matrix(Q))
    th, tb = theta_poly(Q, JQ), theta_poly(Q, JQ, conj=True)
    P = th ** 3 * tb
    lhs = apply_D_V_symbolic(P, np.array(J.tolist(), dtype=object))
    assert lhs == P * (-1 * sympy.I * (1 - 3) * 5)


def test_numeric_d_v_matches_eigenvalue(h113, quad):
    # D_V acts in X only; on Theta it scales by s i (q - p)|V|
    Q = _pole(h113)
    X, _ = sample_points(h113.k, 3, 4, 3)
    V = np.array([0.3, -1.2, 0.5])
    th = lambda X, Z: (X @ Q + 1j * X @ (j_of(h113, V / np.linalg.norm(V)) @ Q)) ** 2
    lhs = apply_D_V(th, h113, V, X, np.zeros((4, 3)))
    assert_allclose(lhs, 2j * np.linalg.norm(V) * th(X, None), rtol=1e-7)


@pytest.mark.parametrize("pq", [(1, 0), (1, 2)])
def test_m_and_delta_z_identities(h113, quad, pq):
    f = make_one_pole(h113, constant_basis(h113), _pole(h113), *pq, standard_profile(), quad=quad)
    X, Z = sample_points(h113.k, 3, 6, 11)
    r = relative_residuals(apply_M(f, h113, X, Z), integrand_M(f)(X, Z))
    assert r.max() < 1e-5
    r = relative_residuals(delta_Z_fd(f, X, Z), integrand_delta_Z(f)(X, Z))
    assert r.max() < 1e-5


def test_full_laplacian_stencil_vs_symbolic(h113, quad):
    f = make_one_pole(h113, constant_basis(h113), _pole(h113), 2, 1, standard_profile(), quad=quad)
    X, Z = sample_points(h113.k, 3, 5, 7)
    r = relative_residuals(apply_full_laplacian(h113, f, X, Z), integrand_laplacian(f)(X, Z))
    assert r.max() < 1e-4


def test_level_state_counts():
    for k, N in [(2, 3), (4, 4), (8, 2)]:
        assert len(level_states(k, N)) == comb(N + k - 1, N)


def test_box_blocks_h_type(h113):
    gamma = np.array([1.0, 0.5, -0.2])
    spec = HermiteBasisSpec.for_gamma(gamma, 3, h113.k)
    blocks = box_matrix(h113, gamma, spec)
    g = np.linalg.norm(gamma)
    for N, B in enumerate(blocks):
        assert_allclose(B, B.conj().T, atol=1e-12)
        # Landau structure: eigenvalues -(pi|g|(2N + k) + 4 pi^2 |g|^2) + 2 pi mu, mu in |g| Z
        ev = np.linalg.eigvalsh(B)
        base = -(np.pi * g * (2 * N + h113.k) + 4 * np.pi ** 2 * g ** 2)
        mu = (ev - base) / (2 * np.pi * g)
        assert_allclose(mu, np.round(mu), atol=1e-9)
        assert np.max(np.abs(mu)) <= N + 1e-9


def test_box_zero_gamma_rejected(h113):
    with pytest.raises(ValueError):
        box_matrix(h113, np.zeros(3), HermiteBasisSpec(1.0, 2, h113.k))
