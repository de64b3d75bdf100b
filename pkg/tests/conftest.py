import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opquad.experiments import EXPERIMENT_FRACTIONAL, EXPERIMENT_PRODUCT, RunConfig  # noqa: E402

CONFIG_DIR = Path(__file__).parent.parent / "configs"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fractional_cfg():
    return RunConfig.from_dict(EXPERIMENT_FRACTIONAL)


@pytest.fixture(scope="session")
def product_cfg():
    return RunConfig.from_dict(EXPERIMENT_PRODUCT)


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
