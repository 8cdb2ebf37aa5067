import numpy as np
import pytest

from nilspec.algebra import assemble_h_type, build_irreducible_clifford, perturb_clifford
from nilspec.algebra import sigma_deform, sigma_from_partition
from nilspec.quadrature import get_preset


@pytest.fixture(scope="session")
def h113():
    return assemble_h_type(build_irreducible_clifford(3), 1, 1)


@pytest.fixture(scope="session")
def h203():
    return assemble_h_type(build_irreducible_clifford(3), 2, 0)


@pytest.fixture(scope="session")
def sigma113(h113):
    return sigma_deform(h113, sigma_from_partition(h113))


@pytest.fixture(scope="session")
def perturbed_pair():
    s = assemble_h_type(perturb_clifford(build_irreducible_clifford(3), 0.02, 42), 1, 1)
    return s, sigma_deform(s, sigma_from_partition(s))


@pytest.fixture(scope="session")
def quad():
    return get_preset("l3-default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
