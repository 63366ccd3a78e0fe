import warnings

import numpy as np
import pytest

from predbands.density import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toy_dataset(n=40, seed=0):
    r = np.random.default_rng(seed)
    x = r.uniform(-1, 1, n)
    return Dataset(x[:, None], x + 0.5 * r.standard_normal(n))


@pytest.fixture(autouse=True)
def _quiet_thin_bins():
    from predbands.cops import ThinBinWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThinBinWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
