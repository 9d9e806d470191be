import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jrcsim.harness import SimConfig  # noqa: E402
from jrcsim.harness.experiments import get_pair  # noqa: E402
from jrcsim.seqdesign import can_design  # noqa: E402


@pytest.fixture(scope="session")
def pair200():
    """Designed pair at the default simulation settings (cached)."""
    return get_pair(SimConfig())


@pytest.fixture(scope="session")
def pair32():
    return can_design(32, rng_seed=3, max_iters=2000)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_cfg():
    """Short sequences so Monte-Carlo plumbing tests stay fast."""
    return SimConfig(L=32, trials=40, snr_grid_db=(4.0, 8.0), design_max_iters=2000, batch_size=16)
