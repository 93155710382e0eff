import numpy as np
import pytest

from qcrdamp.params import derive, reference_device
from qcrdamp.rates import curve_for


@pytest.fixture(scope="session")
def params():
    return reference_device()


@pytest.fixture(scope="session")
def derived(params):
    return derive(params)


@pytest.fixture(scope="session")
def kernel(params):
    return params.kernel


@pytest.fixture(scope="session")
def theory_curve(params):
    """gamma_QCR on 0 .. 1.2 x 2Delta/e, 241 points."""
    return curve_for(params, np.linspace(0.0, 1.2, 241), jobs=4)


_verdicts = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or not mark.args:
        return
    number, label = mark.args
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        ok = call.excinfo is None
        prev = _verdicts.get(number, (label, True))
        _verdicts[number] = (label, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        label, ok = _verdicts[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {label}")
