import numpy as np
import pytest

from sloppykit import catalog

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sum_exp():
    return catalog.make_sum_exp([1 / 3, 1.0, 3.0])


@pytest.fixture
def line():
    return catalog.make_line([0.0, 1.0])


def record_acceptance(label, passed, detail=""):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
