import numpy as np
import pytest

from bimodal_bs.datasets import bundled_path, load_bundled

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _dataset(name):
    if bundled_path(name) is None:
        pytest.skip(f"{name} data file not available")
    return load_bundled(name)


@pytest.fixture(scope="session")
def old_faithful():
    return _dataset("old_faithful")


@pytest.fixture(scope="session")
def kevlar():
    return _dataset("kevlar")


@pytest.fixture(scope="session")
def entomology():
    return _dataset("entomology")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
