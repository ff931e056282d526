import warnings

import numpy as np
import pytest

from ddpilot import FrameConfig
from ddpilot.pilot import PilotSpec

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cfg64():
    return FrameConfig(M=64, N=64)


@pytest.fixture(scope="session")
def pilot64(cfg64):
    return cfg64.build_pilot()


@pytest.fixture(scope="session")
def cfg_small():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return FrameConfig(M=8, N=8, cp_len=2, pilot=PilotSpec(d_f=2, d_t=1))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
