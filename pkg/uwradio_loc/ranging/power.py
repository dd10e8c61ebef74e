"""Power-based ranging: noisy received power inverted through the gain line."""

import logging

import numpy as np

from ..channel_model import (
    DEFAULT_MODEL,
    DEFAULT_TX_POWER_DBM,
    ChannelModel,
    estimate_distance,
    sample_gain,
    sanitize_distance,
)
from .base import BaseRanging

logger = logging.getLogger(__name__)


class PowerRanging(BaseRanging):
    """Receiver measures p_rx = p_tx + g(d) + eps and inverts the channel model."""

    name = "power"

    def __init__(self, model: ChannelModel = DEFAULT_MODEL, tx_power_dbm: float = DEFAULT_TX_POWER_DBM):
        """
        Parameters
        ----------
        model : ChannelModel
            Channel used both to generate and to invert received powers
        tx_power_dbm : float
            Prefixed transmit power in dBm
        """
        self.model = model
        self.tx_power_dbm = float(tx_power_dbm)

    def measure(self, d_true: float, rng: np.random.Generator) -> float:
        p_rx = self.tx_power_dbm + sample_gain(self.model, d_true, rng)
        return sanitize_distance(estimate_distance(self.model, self.tx_power_dbm, p_rx))

    def describe(self) -> dict:
        return {
            "ranging": self.name,
            "tx_power_dbm": self.tx_power_dbm,
            **self.model.to_dict(),
        }
