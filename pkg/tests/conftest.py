from __future__ import annotations

import numpy as np
import pytest

from crackchain.geometry import Aggregate, Microstructure, discretize
from crackchain.morphology import MorphologyConfig, generate


def square(x, y, h):
    return [(x - h, y - h), (x + h, y - h), (x + h, y + h), (x - h, y + h)]


@pytest.fixture(scope="session")
def scene():
    """Two squares and a triangle in a unit box."""
    aggs = (
        Aggregate(0, square(0.3, 0.5, 0.1)),
        Aggregate(1, square(0.7, 0.45, 0.1)),
        Aggregate(2, [(0.55, 0.8), (0.75, 0.8), (0.65, 0.95)]),
    )
    return Microstructure(1.0, 1.0, aggs, "scene-a")


@pytest.fixture(scope="session")
def concrete():
    """Default-size square microstructure at 25% aggregates."""
    return generate(MorphologyConfig(seed=7))


@pytest.fixture(scope="session")
def concrete_dm(concrete):
    return discretize(concrete, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
