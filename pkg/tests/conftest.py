import sys
from pathlib import Path

import numpy as np
import pytest

TESTS_DIR = Path(__file__).parent
REPO_ROOT = TESTS_DIR.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"

if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

_PYTEST_CONFIG = None


def pytest_configure(config):
    global _PYTEST_CONFIG
    _PYTEST_CONFIG = config


def terminal_line(text: str) -> None:
    """Write a line to the real terminal, past pytest's output capture."""
    reporter = None
    if _PYTEST_CONFIG is not None:
        reporter = _PYTEST_CONFIG.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.ensure_newline()
        reporter.write_line(text)
    else:
        print(text)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR
