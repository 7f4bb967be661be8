import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings

from hcbh_lab.lattice import bundled_device

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("suite", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("suite")

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def device():
    return bundled_device()


@pytest.fixture(scope="session")
def reference_subsystems():
    """Reference list of the device's 163 reconstructable subsystems (0-based)."""
    raw = json.loads((DATA_DIR / "subsystems_16q.json").read_text())
    return {tuple(s - 1 for s in row) for row in raw["subsystems"]}
