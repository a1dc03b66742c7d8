import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stegochain.image_io import Raster  # noqa: E402

DATA = Path(__file__).parent / "data"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def random_raster(rng, width, height, channels=3):
    return Raster(width, height, channels, rng.integers(0, 256, size=width * height * channels, dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def cover(rng):
    return random_raster(rng, 100, 100, 3)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:<3} {'PASS' if ok else 'FAIL'}  {detail}")
