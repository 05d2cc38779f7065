from collections import namedtuple
from pathlib import Path

import numpy as np
import pytest

from steinbias.config import SBConfig

test_pair = namedtuple("test_pair", "input, expected")

PARENT_DIR = Path(__file__).parent
CONFIG_FILE = PARENT_DIR.parent / "steinbias" / "conf" / "steinbias_config.toml"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def suite(tmp_path):
    """A suite with no experiments; tests add their own."""
    return SBConfig.from_dict({"seed": 7, "threads": 2, "block_size": 4096, "output_dir": str(tmp_path)})
