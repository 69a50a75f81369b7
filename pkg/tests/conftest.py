from __future__ import annotations

import sys

import numpy as np
import pytest

from freeprob.families import MarchenkoPasturParams, MeixnerParams, meixner_measure, mp_measure


@pytest.fixture(scope="session")
def semicircle():
    return meixner_measure(MeixnerParams(0.0, 0.0))


@pytest.fixture(scope="session")
def meixner_pair():
    return meixner_measure(MeixnerParams(0.5, 0.2)), meixner_measure(MeixnerParams(0.0, 0.0))


@pytest.fixture(scope="session")
def poisson11():
    return mp_measure(MarchenkoPasturParams(1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
