from pathlib import Path

import pytest

from otalign import fixtures as fx

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def fixture_set() -> fx.FixtureSet:
    """The in-memory golden fixture set (same seed as tests/golden)."""
    return fx.build_fixtures(seed=fx.DEFAULT_SEED)
