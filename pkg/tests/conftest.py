import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tgapod.mesh import build_periodic_mesh

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def mesh4():
    return build_periodic_mesh(TWO_PI, 4)


@pytest.fixture(scope="session")
def mesh6():
    return build_periodic_mesh(TWO_PI, 6)


@pytest.fixture(scope="session")
def mesh8():
    return build_periodic_mesh(TWO_PI, 8)
