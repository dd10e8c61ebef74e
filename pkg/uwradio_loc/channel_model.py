"""Linear dB path-loss channel model: calibration, ranging and noise sampling."""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateFit, InvalidDistance

logger = logging.getLogger(__name__)

# Published calibration of the underwater loop-antenna link
DEFAULT_SLOPE_A = -8.5  # dB/m
DEFAULT_INTERCEPT_B = -54.85  # dB
DEFAULT_NOISE_VAR = 1.15  # dB^2
DEFAULT_TX_POWER_DBM = 20.0

# Smallest range a sampler may return
D_MIN = 0.01  # m


@dataclass(frozen=True)
class ChannelModel:
    """Fitted gain-vs-distance line g = a d + b + eps, eps ~ N(0, noise_var)."""

    slope_a: float  # dB per meter
    intercept_b: float  # dB
    noise_var: float = 0.0  # dB^2

    def __post_init__(self):
        if not math.isfinite(self.slope_a) or self.slope_a == 0:
            raise DataError(f"slope_a must be finite and nonzero, got {self.slope_a}")
        if not math.isfinite(self.intercept_b):
            raise DataError(f"intercept_b must be finite, got {self.intercept_b}")
        if not (self.noise_var >= 0):
            raise DataError(f"noise_var must be >= 0, got {self.noise_var}")

    def to_dict(self) -> dict:
        """Convert to the key-value layout of the model file."""
        return {
            "slope_a_db_per_m": float(self.slope_a),
            "intercept_b_db": float(self.intercept_b),
            "noise_var_db2": float(self.noise_var),
        }


DEFAULT_MODEL = ChannelModel(DEFAULT_SLOPE_A, DEFAULT_INTERCEPT_B, DEFAULT_NOISE_VAR)


@dataclass(frozen=True)
class GainSample:
    """One calibration measurement."""

    distance: float  # m
    gain: float  # dB

    def __post_init__(self):
        if not (self.distance > 0):
            raise InvalidDistance(f"sample distance must be > 0, got {self.distance}")


def _design(samples: Sequence[GainSample]) -> tuple[np.ndarray, np.ndarray]:
    d = np.array([s.distance for s in samples], dtype=float)
    g = np.array([s.gain for s in samples], dtype=float)
    return np.column_stack([d, np.ones_like(d)]), g


def fit_linear_model(samples: Sequence[GainSample]) -> ChannelModel:
    """
    Least-squares fit of the gain line to calibration samples.

    Parameters
    ----------
    samples : Sequence[GainSample]
        At least two samples at two or more distinct distances

    Returns
    -------
    ChannelModel
        Slope and intercept minimizing sum (a d_k + b - g_k)^2, with
        noise_var set to the mean squared residual

    Raises
    ------
    DegenerateFit
        If fewer than two distinct distances are present
    """
    if len(samples) < 2:
        raise DegenerateFit(f"need at least 2 samples to fit a line, got {len(samples)}")
    design, gains = _design(samples)
    if np.ptp(design[:, 0]) == 0:
        raise DegenerateFit("all samples share one distance; normal matrix is singular")

    (slope, intercept), _, rank, _ = np.linalg.lstsq(design, gains, rcond=None)
    if rank < 2:
        raise DegenerateFit("normal matrix is numerically singular")
    if slope == 0:
        raise DegenerateFit("fitted slope is exactly zero; gain does not depend on distance")

    line = ChannelModel(float(slope), float(intercept), 0.0)
    model = ChannelModel(line.slope_a, line.intercept_b, estimate_noise_variance(samples, line))
    logger.info(
        f"Fitted channel on {len(samples)} samples: a={model.slope_a:.4f} dB/m, "
        f"b={model.intercept_b:.4f} dB, noise_var={model.noise_var:.4f} dB^2"
    )
    return model


def estimate_noise_variance(samples: Sequence[GainSample], model: ChannelModel) -> float:
    """Mean squared residual (1/n) sum (a d_k + b - g_k)^2 of samples against a model."""
    if len(samples) == 0:
        raise DataError("cannot estimate noise variance from zero samples")
    design, gains = _design(samples)
    residuals = design @ np.array([model.slope_a, model.intercept_b]) - gains
    return float(np.mean(residuals ** 2))


def gain_at(model: ChannelModel, d: float) -> float:
    """Deterministic channel gain a d + b in dB at distance d > 0."""
    if not (d > 0):
        raise InvalidDistance(f"distance must be > 0, got {d}")
    return model.slope_a * d + model.intercept_b


def received_power(model: ChannelModel, p_tx: float, d: float) -> float:
    """Noise-free received power in dBm for a transmitter at p_tx dBm."""
    return p_tx + gain_at(model, d)


def estimate_distance(model: ChannelModel, p_tx: float, p_rx: float) -> float:
    """
    Invert the gain line: the distance whose gain equals p_rx - p_tx.

    The result is not clamped and can be negative for implausible powers;
    pass it through ``sanitize_distance`` before using it as a range.
    """
    return ((p_rx - p_tx) - model.intercept_b) / model.slope_a


def sanitize_distance(d: float) -> float:
    """Clamp a range estimate to the smallest usable distance."""
    return max(float(d), D_MIN)


def sample_gain(model: ChannelModel, d: float, rng: np.random.Generator) -> float:
    """Noisy gain a d + b + eps with eps ~ N(0, noise_var)."""
    return gain_at(model, d) + float(rng.normal(0.0, math.sqrt(model.noise_var)))


def sample_distance(d_true: float, sigma_d: float, rng: np.random.Generator) -> float:
    """Noisy range d_true + N(0, sigma_d^2), floored at D_MIN."""
    if not (d_true > 0):
        raise InvalidDistance(f"true distance must be > 0, got {d_true}")
    if sigma_d < 0:
        raise DataError(f"sigma_d must be >= 0, got {sigma_d}")
    return sanitize_distance(d_true + float(rng.normal(0.0, sigma_d)))
