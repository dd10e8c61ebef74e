"""Base class for range measurement back ends."""

from abc import ABC, abstractmethod

import numpy as np


class BaseRanging(ABC):
    """Turns a true node-to-node distance into a noisy range estimate."""

    name = "base"

    @abstractmethod
    def measure(self, d_true: float, rng: np.random.Generator) -> float:
        """
        Draw one range measurement.

        Parameters
        ----------
        d_true : float
            True distance in meters (> 0)
        rng : np.random.Generator
            Stream the noise is drawn from

        Returns
        -------
        float
            Range estimate in meters, never below the channel model's floor
        """

    def describe(self) -> dict:
        """Parameters echoed into output headers."""
        return {"ranging": self.name}
