from pathlib import Path

import numpy as np
import pytest

from penpath.linmodel import DesignSample

ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = ROOT / "configs"

# one "PASS/FAIL criterion k: ..." line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def toy_sample():
    """p = 1, x_k = 1, n = 4, mean response 1."""
    return DesignSample(np.ones((4, 1)), np.array([0.5, 1.5, 1.0, 1.0]))
