import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tms21.kernels import KernelSpec
from tms21.numerics import build_grid, default_grid

settings.register_profile(
    "tms21", max_examples=40, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("tms21")


@pytest.fixture(scope="session")
def grid_l2():
    return default_grid("L2")


@pytest.fixture(scope="session")
def grid_small():
    """Cheap grid for operator-level tests: 24 panels x 10 nodes on [1e-3, 1e3]."""
    return build_grid(24, 10, 1e-3, 1e3)


@pytest.fixture(scope="session")
def spec_m1():
    return KernelSpec.from_mass(1.0, lam=1.0, ell=1)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("]")[1].split(".")[0])):
        terminalreporter.write_line(line)
