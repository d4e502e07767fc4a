import numpy as np
import pytest

# Five coordinates, two columns; x = U [4, 1] except at coordinate 3.
U_EX1 = np.array([[1.0, 0.0], [3.0, 2.0], [5.0, 4.0], [7.0, 6.0], [9.0, 8.0]])
X_EX1 = np.array([4.0, 14.0, 0.0, 34.0, 44.0])
THETA_EX1 = np.array([4.0, 1.0])
INLIERS_EX1 = np.array([0, 1, 3, 4])  # {1, 2, 4, 5} one-based


@pytest.fixture
def ex1():
    return U_EX1.copy(), X_EX1.copy()


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def report(name: str, ok: bool, detail: str) -> None:
    line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
