from pathlib import Path

import numpy as np
import pytest

from vqebench.core import load_observable
from vqebench.engine import DEFAULT_OBSERVABLE, resolve_target

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "vqebench" / "data"
TARGETS = ROOT / "src" / "vqebench" / "targets"


@pytest.fixture(scope="session")
def h2():
    return load_observable(DEFAULT_OBSERVABLE)


@pytest.fixture(scope="session")
def marmot():
    return resolve_target("marmot")


@pytest.fixture(scope="session")
def manila():
    return resolve_target("manila")


def random_theta(seed, n=4):
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, n)


# PASS/FAIL lines from the acceptance suite, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
