import numpy as np
import pytest
from numpy.testing import assert_allclose

from nilspec.radon import (PolarFunction, dual_radon, dual_radon_thales, duality_pairing_check,
                           even_inversion_constant, invert_dual_radon_even, invert_dual_radon_odd,
                           laplace_halfline, radon_transform, tube_concentration_limit)

ONE = PolarFunction(lambda th, r: np.ones(len(r)), 3)


def _gauss(Z):
    return np.exp(-np.sum(Z * Z, axis=1))


def test_dual_of_one_both_routes():
    Z = np.array([[0.3, -1.0, 2.0], [0.0, 0.0, 0.0], [5.0, 0.0, 0.0]])
    assert_allclose(dual_radon(ONE, Z), 2 * np.pi, rtol=1e-12)
    assert_allclose(dual_radon_thales(ONE, Z[:1]), 2 * np.pi, rtol=1e-12)


def test_dual_of_radius():
    # hemisphere average of <Z, theta> is |Z| / 2
    f = PolarFunction(lambda th, r: r, 3)
    Z = np.array([[0.3, -1.0, 2.0]])
    ref = np.pi * np.linalg.norm(Z)
    assert_allclose(dual_radon(f, Z), ref, rtol=1e-10)
    assert_allclose(dual_radon_thales(f, Z), ref, rtol=1e-10)


def test_routes_agree_on_angular_function():
    f = PolarFunction(lambda th, r: (1 + th[:, 0] ** 2) * np.cos(r), 3)
    Z = np.array([[0.4, 0.2, -0.9], [1.0, 1.0, 0.3]])
    assert_allclose(dual_radon(f, Z), dual_radon_thales(f, Z), rtol=1e-8)


def test_radon_of_gaussian():
    th = np.array([[0, 0, 1.0], [0.6, 0.8, 0.0]])
    r = np.array([0.5, 1.2])
    assert_allclose(radon_transform(_gauss, 3, th, r, 6.0), np.pi * np.exp(-r ** 2), rtol=1e-10)


def test_pairing():
    lhs, rhs, res = duality_pairing_check(ONE, _gauss, 3, 6.0)
    assert res < 1e-4
    # int 2 pi e^{-|Z|^2} dZ over R^3
    assert_allclose(lhs, 2 * np.pi ** 2.5, rtol=1e-6)


def _compact(Z):
    r2 = np.sum(Z * Z, axis=1)
    return (1 + 0.5 * Z[:, 0] + 0.3 * Z[:, 1] * Z[:, 2]) * np.clip(1 - r2, 0, None) ** 8


def test_odd_round_trip():
    f = PolarFunction(lambda th, r: invert_dual_radon_odd(_compact, 3, th, r, 1.0, n=24), 3, 1.0)
    Z = np.random.default_rng(0).uniform(-0.6, 0.6, (6, 3))
    back = dual_radon(f, Z, n=24)
    assert np.linalg.norm(back - _compact(Z)) / np.linalg.norm(_compact(Z)) < 1e-2


def test_even_constant_ratio():
    assert even_inversion_constant(4, "derived") == 2 * even_inversion_constant(4, "nominal")
    assert even_inversion_constant(2, "nominal") == pytest.approx(-1 / (4 * np.pi ** 2))
    with pytest.raises(ValueError):
        even_inversion_constant(3)


def test_even_round_trip_selects_derived_constant():
    def g(Z):
        return (1 + 0.5 * Z[:, 0]) * np.clip(1 - np.sum(Z * Z, axis=1), 0, None) ** 6

    Z = np.array([[0.1, -0.2], [0.4, 0.3]])
    f = PolarFunction(lambda th, r: invert_dual_radon_even(g, 2, th, r, 1.0, n=24), 2, 1.0)
    back = dual_radon(f, Z, n=24)
    assert_allclose(back, g(Z), rtol=1e-2)


def test_inversion_parity_guard():
    with pytest.raises(ValueError):
        invert_dual_radon_odd(_compact, 2, [[1.0, 0.0]], [0.1], 1.0)
    with pytest.raises(ValueError):
        invert_dual_radon_even(_compact, 3, [[1.0, 0.0, 0.0]], [0.1], 1.0)


def test_laplace_halfline():
    assert_allclose(laplace_halfline(lambda r: np.exp(-r), 1.0), 0.5, rtol=1e-10)
    assert_allclose(laplace_halfline(lambda r: np.ones_like(r), 1.0, upper=1.0), 1 - np.exp(-1), rtol=1e-12)
    # complex argument: int e^{-r} e^{i r} dr = 1 / (1 - i)
    assert_allclose(laplace_halfline(lambda r: np.exp(-r), -1j), 1 / (1 - 1j), rtol=1e-8)


def test_tube_limit_converges(h113):
    Q = np.eye(h113.k)[0]
    rep = tube_concentration_limit(h113, Q, (1, 0), lambda V: np.exp(-np.sum(V * V, axis=1) / 2),
                                   np.eye(3)[0], np.full(h113.k, 0.3), np.full(3, 0.4))
    assert rep.monotone
    d = np.asarray(rep.deviations)
    # first-order in delta
    assert_allclose(d[1:] / d[:-1], 0.5, atol=0.05)
