import numpy as np
import pytest

from debtrank import BankRecord, ExposureMatrix, build_system

from helpers import TWO_BANK_CSV, TWO_BANK_EDGES

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)


@pytest.fixture
def two_bank_records():
    return [
        BankRecord("B1", "First Bank", 10.0, 100.0, 91.0, 5.0, 4.0, 105.0),
        BankRecord("B2", "Second Bank", 20.0, 50.0, 29.0, 4.0, 5.0, 54.0),
    ]


@pytest.fixture
def two_bank(two_bank_records):
    """E = (10, 20), A_12 = 5, A_21 = 4, external assets (100, 50)."""
    return build_system(two_bank_records, ExposureMatrix(np.array([[0.0, 5.0], [4.0, 0.0]])))


@pytest.fixture
def two_bank_files(tmp_path):
    bal = tmp_path / "banks.csv"
    bal.write_text(TWO_BANK_CSV)
    edges = tmp_path / "edges.csv"
    edges.write_text(TWO_BANK_EDGES)
    return bal, edges
