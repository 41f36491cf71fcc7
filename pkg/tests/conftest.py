import numpy as np
import pytest

from turbokal.channel import ChannelProfile
from turbokal.txchain import CodeConfig, ModulationConfig, PacketLayout

# measurement lines pushed by the acceptance tests; echoed after the run so
# the numbers behind each pass/fail line survive output capture
ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance measurements")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def layout_2x2():
    """The desk-scale reference frame: 200 bytes, 2x2, 16-QAM, 52 tones."""
    return PacketLayout(
        n_info_bytes=200,
        n_tx=2,
        n_sc=52,
        modulation=ModulationConfig(order=16),
        code=CodeConfig(),
    )


@pytest.fixture(scope="session")
def layout_small():
    """A fast frame for pipeline-level tests: 4-QAM, few tones."""
    return PacketLayout(
        n_info_bytes=12,
        n_tx=2,
        n_sc=8,
        modulation=ModulationConfig(order=4),
        code=CodeConfig(),
    )


@pytest.fixture(scope="session")
def profile_2x2():
    return ChannelProfile(n_rx=2, n_tx=2, n_sc=52)
