import numpy as np
import pytest

from robustlp.linalg import SparseMatrix

ACCEPTANCE_LINES: list[str] = []


def dense_to_sparse(A) -> SparseMatrix:
    A = np.asarray(A, dtype=float)
    r, c = np.nonzero(A)
    return SparseMatrix.from_coo(r, c, A[r, c], A.shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_by_two():
    return dense_to_sparse([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
