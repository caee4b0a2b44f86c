import json
from pathlib import Path

import pytest

from atl_twin.config import load_config

CONFIG_PATH = Path(__file__).resolve().parent.parent / "configs" / "plane_demo.json"


@pytest.fixture(scope="session")
def demo_config_path() -> Path:
    return CONFIG_PATH


@pytest.fixture()
def demo_config():
    return load_config(CONFIG_PATH)


@pytest.fixture()
def demo_config_dict():
    return json.loads(CONFIG_PATH.read_text())


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance report collected by tests/test_acceptance.py."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance report")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
