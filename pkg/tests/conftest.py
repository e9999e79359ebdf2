import numpy as np
import pytest

from spherecar.lie import random_rotation

# (criterion number, report line) pairs collected by the acceptance tests
_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rotations(rng):
    return [random_rotation(rng) for _ in range(100)]


@pytest.fixture(scope="session")
def acceptance_report():
    def report(number, title, ok, detail):
        line = f"criterion {number:2d}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
