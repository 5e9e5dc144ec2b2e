from pathlib import Path

import pytest

from mtknn.dataset import QuerySet, load

DATA = Path(__file__).parent / "data"
QUERY = (6, 40, 8, 89)


@pytest.fixture
def sample_train():
    return load(DATA / "sample_train.arff")


@pytest.fixture
def sample_queries(sample_train):
    return QuerySet(sample_train.schema, [QUERY])


# (criterion, passed, detail) lines recorded by the acceptance suite
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
