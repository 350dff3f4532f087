from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from impgeod import SeedData, make_background, make_mollifier, profile_catalog  # noqa: E402

REPO = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def ds():
    """Unit de Sitter hyperboloid (lambda = 3, a = 1)."""
    return make_background(3.0)


@pytest.fixture(scope="session")
def ads():
    return make_background(-3.0)


@pytest.fixture(scope="session")
def bump():
    return make_mollifier("bump")


@pytest.fixture(scope="session")
def poly():
    return make_mollifier("polynomial", [4])


@pytest.fixture(scope="session")
def zero():
    return profile_catalog("zero")


@pytest.fixture(scope="session")
def quad():
    return profile_catalog("quadratic", [1.0, -1.0, 0.5])


def scenario_seed(e: int) -> SeedData:
    """sigma = 1, a = 1, Z0 = (1,0,0), V0 = 0, U0dot = 1, Z0dot = (0,1,0); V0dot fixed by e."""
    return SeedData(0.0, [1.0, 0.0, 0.0], 1.0, (1.0 - e) / 2.0, [0.0, 1.0, 0.0], e)


@pytest.fixture(scope="session")
def canonical():
    return scenario_seed(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
