"""Shared fixtures for the uwradio-loc test suite."""

from pathlib import Path

import numpy as np
import pytest

from uwradio_loc.network import Position, reference_scenario
from uwradio_loc.srls import SrlsInput

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def reference():
    return reference_scenario()


@pytest.fixture
def bundled_scenario_path():
    return REPO_ROOT / "scenarios" / "reference_grid.csv"


@pytest.fixture
def make_instance():
    """
    Factory for random SR-LS instances.

    Anchors and target are drawn in a 20 m square; anchor sets whose smallest
    centered singular value is below 1 m are redrawn so that none is close to
    collinear. Returns (input, true target).
    """

    def make(rng: np.random.Generator, n_anchors: int, sigma: float = 0.0, extent: float = 20.0):
        while True:
            anchors = rng.uniform(0.0, extent, size=(n_anchors, 2))
            spread = np.linalg.svd(anchors - anchors.mean(axis=0), compute_uv=False)
            if spread[-1] > 1.0:
                break
        target = rng.uniform(0.0, extent, size=2)
        d = np.hypot(*(anchors - target).T)
        ranges = np.maximum(d + rng.normal(0.0, sigma, size=n_anchors), 0.01) if sigma > 0 else d
        inp = SrlsInput(tuple(Position.from_array(a) for a in anchors), tuple(float(r) for r in ranges))
        return inp, Position.from_array(target)

    return make
