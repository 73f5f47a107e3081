import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kinorrt.lti import LinearSystem, build_double_integrator_2d, build_quadrotor_10d
from kinorrt.world import Environment

settings.register_profile(
    "kinorrt", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.differing_executors])
settings.load_profile("kinorrt")

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def di1():
    """Scalar double integrator, position sampled."""
    return LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [0.0, 0.0], [[1.0]], n1=1)


@pytest.fixture(scope="session")
def di2():
    return build_double_integrator_2d()


@pytest.fixture(scope="session")
def quad():
    return build_quadrotor_10d()


@pytest.fixture
def open_env():
    """20 x 20 m arena without obstacles, goal in the far corner."""
    return Environment([[0, 20], [0, 20]], [[-2, 2], [-2, 2]], goal=([17, 17], [19, 19]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
