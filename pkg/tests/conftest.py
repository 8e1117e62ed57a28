import numpy as np
import pytest

from wavescatter.radiation import RadiationFieldData

ACCEPTANCE_LINES = []


def dbump(x):
    """Derivative of exp(-1/(1-x^2)); smooth, odd, supported in [-1, 1]."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    xm = x[m]
    out[m] = np.exp(-1 / (1 - xm**2)) * (-2 * xm / (1 - xm**2) ** 2)
    return out


def bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(-1 / (1 - x[m] ** 2))
    return out


def field(amp, center, width, h=0.02, s_max=5.0):
    n = int(round(s_max / h))
    s = np.arange(-n, n + 1) * h
    return RadiationFieldData(s, amp * dbump((s - center) / width) / width)


@pytest.fixture
def record():
    """record(k, ok, detail) logs one acceptance line and asserts."""
    def _record(k, ok, detail):
        line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
