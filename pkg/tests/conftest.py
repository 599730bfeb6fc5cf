import numpy as np
import pytest

from nonstop.geometry import AttachmentLayout, build_grasp_model, gravity_wrench

REFERENCE_LAYOUT_SEED = 1


@pytest.fixture(scope="session")
def reference5():
    """n = 5 perturbed-circle layout (radius 1.2 m, heights in [0, 1] m)."""
    return AttachmentLayout.perturbed_circle(5, seed=REFERENCE_LAYOUT_SEED)


@pytest.fixture(scope="session")
def circle10():
    return AttachmentLayout.circle(10, 1.2)


@pytest.fixture(scope="session")
def gm5(reference5):
    return build_grasp_model(reference5)


@pytest.fixture(scope="session")
def gm10(circle10):
    return build_grasp_model(circle10)


@pytest.fixture(scope="session")
def w_load():
    return gravity_wrench(0.5, (0.0, 0.0, -1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
