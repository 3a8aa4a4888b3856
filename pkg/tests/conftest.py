import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def brute_tau_numerator(a, b) -> int:
    """Sum of sign(a_i - a_j) * sign(b_i - b_j) over all pairs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        total += int(np.sign(a[i] - a[j]) * np.sign(b[i] - b[j]))
    return total


def brute_tau(a, b) -> float:
    n = len(a)
    return brute_tau_numerator(a, b) / (n * (n - 1) // 2)


def report(criterion: int, passed: bool, detail: str):
    line = f"[ACC-{criterion}] {'PASS' if passed else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[0][5:])):
            terminalreporter.write_line(line)
