"""Range measurement back ends."""

from ..channel_model import DEFAULT_MODEL, DEFAULT_TX_POWER_DBM, ChannelModel
from .base import BaseRanging
from .distance import DEFAULT_SIGMA_D, DistanceRanging
from .power import PowerRanging


def get_ranging(
    mode: str,
    sigma_d: float = DEFAULT_SIGMA_D,
    model: ChannelModel = DEFAULT_MODEL,
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
) -> BaseRanging:
    """
    Get a ranging back end by name.

    Parameters
    ----------
    mode : str
        'distance' or 'power'
    sigma_d : float
        Range noise standard deviation for 'distance'
    model : ChannelModel
        Channel model for 'power'
    tx_power_dbm : float
        Transmit power for 'power'

    Returns
    -------
    BaseRanging
        Ranging instance
    """
    if mode == "distance":
        return DistanceRanging(sigma_d)
    if mode == "power":
        return PowerRanging(model, tx_power_dbm)
    raise ValueError(f"Unknown ranging mode: {mode}. Choose from: ['distance', 'power']")


__all__ = ["BaseRanging", "DistanceRanging", "PowerRanging", "DEFAULT_SIGMA_D", "get_ranging"]
