"""Distance-domain ranging: Gaussian noise added directly to the range."""

import numpy as np

from ..channel_model import sample_distance
from ..errors import DataError
from .base import BaseRanging

DEFAULT_SIGMA_D = 0.63  # m


class DistanceRanging(BaseRanging):
    """Range = d + N(0, sigma_d^2), floored."""

    name = "distance"

    def __init__(self, sigma_d: float = DEFAULT_SIGMA_D):
        if sigma_d < 0:
            raise DataError(f"sigma_d must be >= 0, got {sigma_d}")
        self.sigma_d = float(sigma_d)

    def measure(self, d_true: float, rng: np.random.Generator) -> float:
        return sample_distance(d_true, self.sigma_d, rng)

    def describe(self) -> dict:
        return {"ranging": self.name, "sigma_d_m": self.sigma_d}
