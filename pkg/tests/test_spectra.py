import numpy as np
import pytest
from numpy.testing import assert_allclose

from nilspec.algebra import assemble_h_type, build_irreducible_clifford, j_of
from nilspec.spectra import (InvalidComparison, NoConjugator, box_spectrum, canonical_skew_form,
                             cluster, compare_spectra, find_conjugator, grid_oracle,
                             torus_bundle_spectrum)


def _h(a, b, l):
    return assemble_h_type(build_irreducible_clifford(l), a, b)


def test_canonical_form_sorted(rng):
    A = rng.standard_normal((5, 5))
    J = A - A.T
    U, b = canonical_skew_form(J)
    assert_allclose(U.T @ U, np.eye(5), atol=1e-12)
    assert np.all(np.diff(b) >= 0) and np.all(b > 0) and len(b) == 2
    C = U.T @ J @ U
    assert_allclose(C[0, 1], b[0], rtol=1e-12)
    assert_allclose(C[4], 0, atol=1e-12)


def test_conjugator_for_sigma_pair(h113, h203, rng):
    g = rng.standard_normal(3)
    J, Jp = j_of(h113, g), j_of(h203, g)
    T = find_conjugator(J, Jp)
    assert_allclose(T @ J @ T.T, Jp, atol=1e-12)
    assert_allclose(T @ T.T, np.eye(8), atol=1e-12)


def test_conjugator_random_orthogonal(rng):
    A = rng.standard_normal((6, 6))
    J = A - A.T
    O, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    T = find_conjugator(J, O @ J @ O.T)
    assert_allclose(T @ J @ T.T, O @ J @ O.T, atol=1e-10)


def test_no_conjugator():
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(NoConjugator):
        find_conjugator(J, 2 * J)


@pytest.mark.parametrize("gamma", [[1.0, 0, 0], [1.0, 1.0, 0], [0.3, -0.8, 0.45]])
def test_sigma_pair_isospectral(h113, h203, gamma):
    v = compare_spectra(box_spectrum(h113, gamma, 4), box_spectrum(h203, gamma, 4))
    assert v.verdict and v.max_residual < 1e-12


def test_perturbed_pair_isospectral(perturbed_pair):
    s, t = perturbed_pair
    v = compare_spectra(box_spectrum(s, [1.0, 0.4, 0.0], 3), box_spectrum(t, [1.0, 0.4, 0.0], 3))
    assert v.verdict


def test_gamma_sign_symmetry(h113):
    a = box_spectrum(h113, [0.3, 0.2, 1.0], 3)
    b = box_spectrum(h113, [-0.3, -0.2, -1.0], 3)
    assert compare_spectra(a, b).verdict


def test_non_isospectral_detected():
    # same k, different J structure: H(1,0,1) has k = 2; compare with a rescaled structure
    a = box_spectrum(_h(2, 0, 1), [1.0], 3)
    b = box_spectrum(_h(2, 0, 1), [1.5], 3)
    assert not compare_spectra(a, b).verdict


def test_invalid_comparison_dimension():
    with pytest.raises(InvalidComparison):
        compare_spectra(box_spectrum(_h(1, 0, 1), [1.0], 3), box_spectrum(_h(2, 0, 1), [1.0], 3))


def test_invalid_comparison_level(h113):
    with pytest.raises(InvalidComparison):
        compare_spectra(box_spectrum(h113, [1.0, 0, 0], 2), box_spectrum(h113, [1.0, 0, 0], 3))


def test_zero_gamma_rejected(h113):
    with pytest.raises(ValueError, match="continuous"):
        box_spectrum(h113, [0.0, 0.0, 0.0], 2)


def test_grid_oracle_landau_levels():
    space = _h(1, 0, 1)
    ev = np.unique(np.round(box_spectrum(space, [1.0], 4).eigenvalues, 9))[::-1][:4]
    grid = grid_oracle(space, [1.0], ev, n=128)
    assert_allclose(grid, ev, rtol=1e-3)


def test_torus_components(h113, h203):
    rep = torus_bundle_spectrum(_h(1, 0, 1), np.eye(1), 2, 2.0)
    assert rep.gamma == ((-1,), (1,), (-2,), (2,))
    assert any("gamma=0" in n for n in rep.notes)
    v = compare_spectra(torus_bundle_spectrum(h113, np.eye(3), 2, 1.0),
                        torus_bundle_spectrum(h203, np.eye(3), 2, 1.0))
    assert v.verdict


def test_csv_columns(h113):
    rep = box_spectrum(h113, [1.0, 0, 0], 2)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "gamma_index,block,eigenvalue,multiplicity"
    assert sum(int(ln.split(",")[3]) for ln in lines[1:]) == len(rep.eigenvalues)


def test_cluster():
    assert cluster([1.0, 1.0 + 1e-12, 2.0]) == [(pytest.approx(1.0), 2), (2.0, 1)]
