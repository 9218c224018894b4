import pytest

from spinprobe.diffraction import AngularGrid, p_diff_map
from spinprobe.kernel import KernelContext
from spinprobe.spin import reference_state

# Acceptance outcomes collected during the run: (criterion, passed, detail).
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def broad():
    return KernelContext.default(1.06e7)


@pytest.fixture(scope="session")
def narrow():
    return KernelContext.default(1.06e9)


@pytest.fixture(scope="session")
def broad_diff_map(broad):
    return p_diff_map(AngularGrid.validity_region(broad, 512), broad)


@pytest.fixture(scope="session")
def small_diff_map(broad):
    return p_diff_map(AngularGrid.validity_region(broad, 64), broad)


@pytest.fixture(scope="session")
def ref_state(broad):
    return reference_state(broad.spin.omega0)
