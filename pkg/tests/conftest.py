import sys
from pathlib import Path

import pytest

from tfa import generators

NETWORKS = Path(__file__).resolve().parent.parent / "networks"


@pytest.fixture
def twelve_port():
    return generators.twelve_port()


@pytest.fixture
def tandem():
    return generators.tandem()


@pytest.fixture
def ring5():
    return generators.ring(5)


@pytest.fixture
def networks_dir():
    return NETWORKS


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
