import pytest

from fastreact.core import SystemParams, build_lattice

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def p1() -> SystemParams:
    return SystemParams(alpha=-1.0, beta=1.0, gamma=1.0, delta=-2.0, mu=0.0, nu=1.0, eps=0.1)


@pytest.fixture(scope="session")
def lattice():
    """Default desk-scale lattice: n=1, K=8, dk=0.01 (1601 modes)."""
    return build_lattice(1, 8.0, 0.01)


@pytest.fixture(scope="session")
def small_lattice():
    return build_lattice(1, 2.0, 0.25)


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion and return the verdict."""

    def record(criterion: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion:>2}: {detail}"
        print(line)
        request.config.stash[ACCEPTANCE].append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
