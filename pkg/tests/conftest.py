import os

import numpy as np
import pytest

from hurstlab.asymptotic_constants import get_table

# coarse table shared by every test that needs Sigma^(p); cached across runs
TABLE_GRID = np.round(0.05 + 0.05 * np.arange(19), 10)
TABLE_SAMPLES = 100_000
TABLE_STEP = 0.05

ACCEPTANCE = {}


def pytest_configure(config):
    # without the cache plugin the library default location is used
    if "HURSTLAB_TABLE_CACHE" not in os.environ and getattr(config, "cache", None):
        os.environ["HURSTLAB_TABLE_CACHE"] = str(config.cache.mkdir("hurstlab-tables"))


@pytest.fixture(scope="session")
def table():
    return get_table(p=5, h_grid=TABLE_GRID, samples=TABLE_SAMPLES)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
