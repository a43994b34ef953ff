# VSDesign 🚀, GPL-3.0 license
"""
Shared fixtures: the 3x2 toy matrix, identity matrices, random Gaussian matrices and random streams
"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]  # repository root
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH

from models.common import DesignMatrix, factorize  # noqa: E402
from models.sampler import RngStream  # noqa: E402


@pytest.fixture
def toy():
    return DesignMatrix([[1, 0], [0, 1], [1, 1]])


@pytest.fixture
def toy_y():
    return np.array([1.0, 2.0, 4.0])


@pytest.fixture
def toy_factor(toy):
    return factorize(toy)


@pytest.fixture
def eye2():
    return DesignMatrix(np.eye(2))


@pytest.fixture
def rng():
    return RngStream(0)


@pytest.fixture
def gaussian():
    # gaussian(n, d, seed) -> n x d matrix with standard normal entries
    def make(n, d, seed=0):
        return DesignMatrix(np.random.default_rng(seed).normal(size=(n, d)))

    return make


@pytest.fixture
def write_csv(tmp_path):
    # write_csv(text, name) -> path of a UTF-8 file in tmp_path
    def write(text, name='x.csv'):
        f = tmp_path / name
        f.write_bytes(text.encode('utf-8'))
        return f

    return write
