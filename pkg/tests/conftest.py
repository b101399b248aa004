import numpy as np
import pytest

from whistler import _core_py

try:
    from whistler import _core
except ImportError:
    _core = None

BACKENDS = [pytest.param(_core_py, id="numpy")]
if _core is not None:
    BACKENDS.append(pytest.param(_core, id="cython"))


@pytest.fixture(params=BACKENDS)
def core(request):
    """Each kernel backend in turn."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture
def accept():
    """Record one acceptance criterion's verdict, then assert it."""

    def record(number, title, ok, detail):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
