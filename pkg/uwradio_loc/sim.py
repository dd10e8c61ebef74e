"""Experiment reproduction: measurement generation, loss sweeps and target tracking."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import selfloc, srls
from .channel_model import D_MIN
from .errors import DataError
from .network import Position, Scenario, in_sensing_range, pairwise_distance
from .ranging import DEFAULT_SIGMA_D, BaseRanging, DistanceRanging
from .seeds import Purpose, SeedStreams
from .selfloc import ExperimentTrace, Measurements, SelfLocConfig

logger = logging.getLogger(__name__)

DEFAULT_LOSS_LEVELS = (0.0, 0.05, 0.10, 0.20)
DEFAULT_TRAJECTORY_STEP = 0.5  # m
MIN_ANCHORS = 3

__all__ = [
    "DEFAULT_LOSS_LEVELS",
    "ExperimentTrace",
    "LossCurves",
    "TrackingRun",
    "generate_measurements",
    "make_trajectory",
    "mean_tracking_mae",
    "reference_trajectory",
    "run_selfloc_experiment",
    "run_tracking",
    "run_tracking_experiment",
]


@dataclass(eq=False)
class LossCurves:
    """Per-seed MAE curves of a packet-loss sweep, one (n_seeds, T + 1) array per level."""

    loss_levels: tuple[float, ...]
    per_seed: dict[float, np.ndarray]
    config: dict = field(default_factory=dict)

    def mean_curve(self, level: float) -> np.ndarray:
        return self.per_seed[level].mean(axis=0)

    @property
    def n_iterations(self) -> int:
        return next(iter(self.per_seed.values())).shape[1] - 1


@dataclass(frozen=True)
class TrackingRun:
    """
    Result of tracking a target along a trajectory.

    A sample is flagged, and has no estimate, when fewer than three nodes sense
    it or the sensing nodes are collinear.
    """

    samples: tuple[Position, ...]
    estimates: tuple[Optional[Position], ...]
    n_inrange: tuple[int, ...]
    flagged: tuple[bool, ...]
    mae: Optional[float]

    def __post_init__(self):
        n = len(self.samples)
        if not (len(self.estimates) == len(self.n_inrange) == len(self.flagged) == n):
            raise DataError("tracking run fields have inconsistent lengths")
        for k, (est, flag, count) in enumerate(zip(self.estimates, self.flagged, self.n_inrange)):
            if (est is None) != flag:
                raise DataError(f"sample {k}: estimate present must match not flagged")
            if est is not None and count < MIN_ANCHORS:
                raise DataError(f"sample {k}: estimate with only {count} nodes in range")

    @property
    def n_flagged(self) -> int:
        return sum(self.flagged)

    @property
    def errors(self) -> list[float]:
        """Position error of every solved sample, in sample order."""
        return [
            pairwise_distance(est, truth)
            for truth, est in zip(self.samples, self.estimates)
            if est is not None
        ]


def generate_measurements(
    scenario: Scenario,
    sigma_d: float,
    seed: int,
    ranging: Optional[BaseRanging] = None,
) -> Measurements:
    """
    Draw one symmetric range per neighbor pair.

    Parameters
    ----------
    scenario : Scenario
        Deployment; pairs come from its neighbor relation
    sigma_d : float
        Range noise standard deviation (ignored when ``ranging`` is given)
    seed : int
        Master seed; draws use its MEASUREMENT stream in edge order
    ranging : BaseRanging, optional
        Measurement back end, distance-domain noise by default

    Returns
    -------
    Measurements
        Ranges keyed by (i, j), i < j
    """
    if sigma_d < 0:
        raise DataError(f"sigma_d must be >= 0, got {sigma_d}")
    ranging = ranging or DistanceRanging(sigma_d)
    rng = SeedStreams(seed).generator(Purpose.MEASUREMENT)
    ranges = {(i, j): ranging.measure(float(scenario.distances[i, j]), rng) for i, j in scenario.edges}
    logger.debug(f"Drew {len(ranges)} neighbor ranges ({ranging.describe()})")
    return Measurements(ranges)


def run_selfloc_experiment(
    scenario: Scenario,
    loss_levels: Sequence[float],
    n_seeds: int,
    cfg: SelfLocConfig,
    sigma_d: float = DEFAULT_SIGMA_D,
    ranging: Optional[BaseRanging] = None,
) -> LossCurves:
    """
    Average self-positioning MAE curves over seeds for several loss probabilities.

    Replication k uses the seed ``SeedStreams(cfg.seed).run_seed(k)`` for its
    measurements, initialization and loss draws, so every loss level sees the
    same measurements and starting points.
    """
    levels = tuple(float(p) for p in loss_levels)
    if not levels:
        raise DataError("need at least one loss level")
    bad = [p for p in levels if not 0.0 <= p <= 1.0]
    if bad:
        raise DataError(f"loss levels must lie in [0, 1], got {bad}")
    if n_seeds < 1:
        raise DataError(f"n_seeds must be >= 1, got {n_seeds}")

    streams = SeedStreams(cfg.seed)
    per_seed = {p: np.empty((n_seeds, cfg.max_iters + 1)) for p in levels}
    logger.info(f"Loss sweep: levels={list(levels)}, {n_seeds} seed(s), {cfg.max_iters} iterations")
    for k in range(n_seeds):
        run_seed = streams.run_seed(k)
        measurements = generate_measurements(scenario, sigma_d, run_seed, ranging)
        for p in levels:
            trace = selfloc.run(scenario, measurements, replace(cfg, seed=run_seed, packet_loss_prob=p))
            per_seed[p][k] = trace.mae
    for p in levels:
        logger.info(f"  loss={p:.2f}: final mean MAE {per_seed[p][:, -1].mean():.4f} m")

    config = {**cfg.to_dict(), "sigma_d_m": sigma_d, "n_seeds": n_seeds}
    config.pop("packet_loss_prob", None)
    config["loss_levels"] = ",".join(repr(p) for p in levels)
    return LossCurves(levels, per_seed, config)


def make_trajectory(waypoints: Sequence[Position], step: float) -> list[Position]:
    """
    Sample a piecewise-linear path every ``step`` meters of arc length.

    Both endpoints are included; repeated waypoints are skipped.
    """
    if len(waypoints) < 2:
        raise DataError(f"trajectory needs at least 2 waypoints, got {len(waypoints)}")
    if not (step > 0):
        raise DataError(f"trajectory step must be > 0, got {step}")

    points = [np.array(tuple(waypoints[0]), dtype=float)]
    for w in waypoints[1:]:
        p = np.array(tuple(w), dtype=float)
        if np.hypot(*(p - points[-1])) > 1e-12:
            points.append(p)
    if len(points) == 1:
        return [Position.from_array(points[0])]

    path = np.stack(points)
    seg = np.hypot(*np.diff(path, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])

    n_steps = math.floor(total / step + 1e-9)
    arc = [k * step for k in range(n_steps + 1)]
    if total - arc[-1] > 1e-9 * max(1.0, total):
        arc.append(total)

    samples = []
    for s in arc:
        k = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
        t = min(max((s - cum[k]) / seg[k], 0.0), 1.0)
        samples.append(Position.from_array(path[k] + t * (path[k + 1] - path[k])))
    return samples


def reference_trajectory(scenario: Scenario, step: float = DEFAULT_TRAJECTORY_STEP) -> list[Position]:
    """Serpentine path along the midlines between consecutive grid rows."""
    ys = np.unique(scenario.coords[:, 1])
    xmin, xmax = float(scenario.coords[:, 0].min()), float(scenario.coords[:, 0].max())
    lines = 0.5 * (ys[:-1] + ys[1:]) if len(ys) > 1 else ys
    waypoints = []
    for k, y in enumerate(lines):
        ends = [Position(xmin, float(y)), Position(xmax, float(y))]
        waypoints.extend(ends if k % 2 == 0 else ends[::-1])
    return make_trajectory(waypoints, step)


def run_tracking(
    scenario: Scenario,
    trajectory: Sequence[Position],
    sigma_d: float,
    seed: int,
    ranging: Optional[BaseRanging] = None,
    eps: float = srls.DEFAULT_EPS,
) -> TrackingRun:
    """
    Localize a moving target from the ranges to the nodes that sense it.

    Parameters
    ----------
    scenario : Scenario
        Deployment; nodes within ``sense_radius`` of a sample act as anchors
    trajectory : Sequence[Position]
        True target positions
    sigma_d : float
        Range noise standard deviation (ignored when ``ranging`` is given)
    seed : int
        Master seed; sample k draws from the TRACKING stream with index k
    ranging : BaseRanging, optional
        Measurement back end, distance-domain noise by default
    eps : float
        SR-LS bisection tolerance

    Returns
    -------
    TrackingRun
        Estimates, flags and the MAE over solved samples (None if none solved)
    """
    ranging = ranging or DistanceRanging(sigma_d)
    streams = SeedStreams(seed)
    estimates, counts, flagged = [], [], []
    for k, target in enumerate(trajectory):
        in_range = sorted(in_sensing_range(scenario, target))
        counts.append(len(in_range))
        solution = None
        if len(in_range) >= MIN_ANCHORS:
            rng = streams.generator(Purpose.TRACKING, k)
            anchors = [scenario.positions[i] for i in in_range]
            ranges = [ranging.measure(max(pairwise_distance(p, target), D_MIN), rng) for p in anchors]
            solution = srls.solve_or_none(srls.SrlsInput(anchors, ranges), eps)
        if solution is None:
            logger.debug(f"Sample {k} at ({target.x:.2f}, {target.y:.2f}) flagged: {len(in_range)} node(s) in range")
        estimates.append(solution.position if solution is not None else None)
        flagged.append(solution is None)

    errors = [pairwise_distance(e, t) for e, t in zip(estimates, trajectory) if e is not None]
    mae = float(np.mean(errors)) if errors else None
    n_flagged = sum(flagged)
    if n_flagged:
        logger.warning(f"{n_flagged} of {len(flagged)} tracking sample(s) flagged (insufficient anchors)")
    return TrackingRun(tuple(trajectory), tuple(estimates), tuple(counts), tuple(flagged), mae)


def run_tracking_experiment(
    scenario: Scenario,
    trajectory: Sequence[Position],
    sigma_d: float,
    n_seeds: int,
    seed: int,
    ranging: Optional[BaseRanging] = None,
) -> list[TrackingRun]:
    """Repeat ``run_tracking`` with the replication seeds of a master seed."""
    if n_seeds < 1:
        raise DataError(f"n_seeds must be >= 1, got {n_seeds}")
    streams = SeedStreams(seed)
    return [run_tracking(scenario, trajectory, sigma_d, streams.run_seed(k), ranging) for k in range(n_seeds)]


def mean_tracking_mae(runs: Sequence[TrackingRun]) -> Optional[float]:
    """Mean of the per-run MAEs, skipping runs with no solved sample."""
    values = [r.mae for r in runs if r.mae is not None]
    return float(np.mean(values)) if values else None
