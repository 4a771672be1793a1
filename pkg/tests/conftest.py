import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ferglab.model import ex1_model  # noqa: E402

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def ex1():
    return ex1_model(0.1)


@pytest.fixture(scope="session")
def configs():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
