import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nlmc.basis import build_auxiliary
from nlmc.grid import build_grid
from nlmc.media import generate_channelized, partition_continua


@pytest.fixture
def small_grid():
    """32x32 fine / 4x4 coarse."""
    return build_grid(4, 8)


@pytest.fixture
def small_media(small_grid):
    return generate_channelized(small_grid, 1e4, seed=1)


@pytest.fixture
def small_aux(small_grid, small_media):
    return build_auxiliary(small_grid, partition_continua(small_grid, small_media, "channelized"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
