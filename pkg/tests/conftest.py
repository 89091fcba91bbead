import numpy as np
import pytest

from wsnsel.ingest import DataMatrix

ACCEPTANCE_LINES = []


def make_matrix(X, y, ids=None, target=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and len(y) != 1:
        X = X.T
    ids = list(ids) if ids is not None else list(range(1, X.shape[1] + 1))
    target = target if target is not None else max(ids) + 1
    values = np.column_stack([X, np.asarray(y, dtype=float)])
    order = np.argsort(ids + [target])
    all_ids = np.asarray(ids + [target])[order]
    return DataMatrix(np.arange(len(y)), tuple(int(i) for i in all_ids), values[:, order], target)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
