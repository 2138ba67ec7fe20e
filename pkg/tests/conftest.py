from pathlib import Path

import pytest

from iacmetrics.knowledge import default_knowledge_base
from iacmetrics.model import parse_source

FIXTURES = Path(__file__).parent / "fixtures"

# Filled by test_acceptance; printed once at the end of the run.
ACCEPTANCE_RESULTS: dict = {}


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def load_fixture(name: str):
    return parse_source(str(FIXTURES / name), fixture_text(name))


@pytest.fixture(scope="session")
def kb():
    return default_knowledge_base()


@pytest.fixture
def playbook():
    return load_fixture("web_db_playbook.yml")


@pytest.fixture
def guarded():
    return load_fixture("guarded_file_tasks.yml")


@pytest.fixture
def filters():
    return load_fixture("product_filter.yml")


@pytest.fixture
def blocks():
    return load_fixture("block_rescue.yml")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, label = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {label}")
