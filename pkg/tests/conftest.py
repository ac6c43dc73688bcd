import sys

import numpy as np
import pytest

from batch_hblr import simulators
from batch_hblr.segmentation import train_segmented
from batch_hblr.trainer import HyperParams

MSD_SEED = 0


@pytest.fixture(scope="session")
def msd_split():
    data = simulators.make_supervised(simulators.simulate_msd(simulators.msd_config(seed=MSD_SEED)))
    return simulators.train_test_split(data, 0.33, MSD_SEED)


@pytest.fixture(scope="session")
def msd_model(msd_split):
    train, _ = msd_split
    return train_segmented(train, HyperParams())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
