import numpy as np
import pytest

from semiquant.phase_space import ModelGeometry, parse_preset, rotation

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def sphere():
    return ModelGeometry(1)


@pytest.fixture(scope="session")
def meta_sphere():
    return ModelGeometry(1, (-1,))


@pytest.fixture(scope="session")
def f0():
    return rotation()


@pytest.fixture(scope="session")
def f_pert():
    return parse_preset("perturbed:0.1,0.15")


@pytest.fixture(scope="session")
def f_radial():
    return parse_preset("radial:1,0.5")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
