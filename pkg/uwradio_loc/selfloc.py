"""
Distributed self-positioning by successive convex approximation.

Every unknown node i minimizes, in its own coordinates only, a convex surrogate
of its share of

    sum_{i in N_u} sum_{j in N^i} (d_ij^2 - ||x_i - x_j||^2)^2

in which the concave part -2 d_ij^2 ||x_i - x_j||^2 is replaced by its
linearization at the node's current estimate (the pivot). Rounds are
synchronous: all nodes solve against the neighbor values they knew at the
start of the round, then broadcast. A broadcast reaches either all neighbors or,
with probability ``packet_loss_prob``, none of them; receivers keep the last
value they heard.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError, MissingMeasurement, NoNeighbors
from .network import Position, Rect, Scenario
from .seeds import Purpose, SeedStreams

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class Measurements:
    """One symmetric range per unordered neighbor pair, keyed by (i, j) with i < j."""

    ranges: Mapping[tuple[int, int], float]

    def __post_init__(self):
        normalized = {}
        for (i, j), d in self.ranges.items():
            if i == j:
                raise DataError(f"self-range for node {i}")
            if not (d > 0 and math.isfinite(d)):
                raise DataError(f"range between {i} and {j} must be finite and > 0, got {d}")
            key = (min(i, j), max(i, j))
            if key in normalized and normalized[key] != d:
                raise DataError(f"asymmetric ranges for pair {key}")
            normalized[key] = float(d)
        object.__setattr__(self, "ranges", dict(sorted(normalized.items())))

    def range(self, i: int, j: int) -> float:
        try:
            return self.ranges[(min(i, j), max(i, j))]
        except KeyError:
            raise MissingMeasurement(f"no range measured between nodes {i} and {j}") from None

    def __len__(self) -> int:
        return len(self.ranges)


@dataclass(frozen=True)
class SelfLocConfig:
    """Parameters of a self-positioning run."""

    max_iters: int = 50
    inner_tol: float = 1e-9
    inner_max_iters: int = 50
    packet_loss_prob: float = 0.0
    proximal_tau: float = 0.0
    step_size: float = 1.0
    init_box: Optional[Rect] = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise DataError(f"max_iters must be >= 0, got {self.max_iters}")
        if not (self.inner_tol > 0):
            raise DataError(f"inner_tol must be > 0, got {self.inner_tol}")
        if self.inner_max_iters < 1:
            raise DataError(f"inner_max_iters must be >= 1, got {self.inner_max_iters}")
        if not 0.0 <= self.packet_loss_prob <= 1.0:
            raise DataError(f"packet_loss_prob must be in [0, 1], got {self.packet_loss_prob}")
        if not (self.proximal_tau >= 0):
            raise DataError(f"proximal_tau must be >= 0, got {self.proximal_tau}")
        if not 0.0 < self.step_size <= 1.0:
            raise DataError(f"step_size must be in (0, 1], got {self.step_size}")

    def to_dict(self) -> dict:
        """Flat parameters for output headers."""
        params = asdict(self)
        box = params.pop("init_box")
        params["init_box"] = "auto" if box is None else f"{box['xmin']},{box['xmax']},{box['ymin']},{box['ymax']}"
        return params


@dataclass(eq=False)
class SelfLocState:
    """
    Algorithm state between rounds.

    ``estimates[i]`` is node i's current position (truth for anchors);
    ``last_known[i, j]`` is what node i last heard from node j, meaningful for
    neighbors j of i.
    """

    estimates: np.ndarray  # (N, 2)
    last_known: np.ndarray  # (N, N, 2)
    iteration: int = 0


@dataclass(eq=False)
class ExperimentTrace:
    """Per-iteration record of a run; index 0 is the initialization."""

    estimates: np.ndarray  # (T + 1, N, 2)
    mae: np.ndarray  # (T + 1,)
    objective: np.ndarray  # (T + 1,)
    config: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        n = len(self.estimates)
        if len(self.mae) != n or len(self.objective) != n:
            raise DataError(
                f"inconsistent trace lengths: {n} snapshots, {len(self.mae)} MAE, {len(self.objective)} objective"
            )

    @property
    def n_iterations(self) -> int:
        return len(self.estimates) - 1

    @property
    def final_mae(self) -> float:
        return float(self.mae[-1])


@dataclass(frozen=True)
class _LocalProblem:
    neighbors: np.ndarray  # neighbor ids
    d2: np.ndarray  # squared ranges to them


def _as_array(estimates, n: int) -> np.ndarray:
    if isinstance(estimates, Mapping):
        out = np.full((n, 2), np.nan)
        for i, p in estimates.items():
            out[i] = tuple(p)
        if np.isnan(out).any():
            raise DataError("estimates must cover every node")
        return out
    out = np.asarray(estimates, dtype=float)
    if out.shape != (n, 2):
        raise DataError(f"estimates must have shape ({n}, 2), got {out.shape}")
    return out


def _directed_edges(scenario: Scenario, measurements: Measurements) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(i, j, d_ij^2) for every unknown i and neighbor j, i.e. the terms of the double sum."""
    rows, cols, d2 = [], [], []
    for i in scenario.unknowns:
        for j in scenario.neighbor_lists[i]:
            rows.append(i)
            cols.append(j)
            d2.append(measurements.range(i, j) ** 2)
    return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(d2, dtype=float)


def _local_problems(scenario: Scenario, measurements: Measurements) -> dict[int, _LocalProblem]:
    problems = {}
    for i in scenario.unknowns:
        nbrs = scenario.neighbor_lists[i]
        if not nbrs:
            raise NoNeighbors(f"unknown node {i} has no neighbors within {scenario.comm_radius} m")
        problems[i] = _LocalProblem(
            np.array(nbrs, dtype=int),
            np.array([measurements.range(i, j) ** 2 for j in nbrs], dtype=float),
        )
    return problems


def _objective(x: np.ndarray, edges: tuple[np.ndarray, np.ndarray, np.ndarray]) -> float:
    rows, cols, d2 = edges
    diff = x[rows] - x[cols]
    return float(np.sum((d2 - np.sum(diff * diff, axis=1)) ** 2))


def objective_value(estimates, measurements: Measurements, scenario: Scenario) -> float:
    """
    Nonconvex positioning objective sum_{i in N_u} sum_{j in N^i} (d_ij^2 - ||x_i - x_j||^2)^2.

    Edges between two unknown nodes appear once in each endpoint's inner sum.
    """
    x = _as_array(estimates, scenario.n_nodes)
    return _objective(x, _directed_edges(scenario, measurements))


def surrogate_value(x, pivot, measurements: Measurements, scenario: Scenario) -> float:
    """
    Convex surrogate built at ``pivot``:
    sum_{i in N_u} sum_{j in N^i} d_ij^4 + ||x_i - x_j||^4 - 4 d_ij^2 (x_i^k - x_j^k)^T x_i.
    """
    x = _as_array(x, scenario.n_nodes)
    pivot = _as_array(pivot, scenario.n_nodes)
    rows, cols, d2 = _directed_edges(scenario, measurements)
    diff = x[rows] - x[cols]
    sq = np.sum(diff * diff, axis=1)
    lin = np.sum((pivot[rows] - pivot[cols]) * x[rows], axis=1)
    return float(np.sum(d2 * d2 + sq * sq - 4.0 * d2 * lin))


def _newton_minimize(
    pivot: np.ndarray,
    nbrs: np.ndarray,
    d2: np.ndarray,
    tau: float,
    tol: float,
    max_iters: int,
) -> tuple[np.ndarray, int, float]:
    """
    Damped Newton on f(x) = sum_j ||x - x_j||^4 - lin^T x + tau/2 ||x - pivot||^2,
    lin = 4 sum_j d_j^2 (pivot - x_j). Starts at the pivot.

    Returns the minimizer, the iterations used and the final gradient norm.
    """
    lin = 4.0 * np.sum(d2[:, None] * (pivot - nbrs), axis=0)

    def value(x: np.ndarray) -> float:
        diff = x - nbrs
        sq = np.sum(diff * diff, axis=1)
        dev = x - pivot
        return float(np.sum(sq * sq) - lin @ x + 0.5 * tau * (dev @ dev))

    x = pivot.astype(float, copy=True)
    f0 = value(x)
    gnorm = math.inf
    for it in range(max_iters):
        diff = x - nbrs
        sq = np.sum(diff * diff, axis=1)
        grad = 4.0 * np.sum(sq[:, None] * diff, axis=0) - lin + tau * (x - pivot)
        gnorm = math.hypot(grad[0], grad[1])
        if gnorm <= tol:
            return x, it, gnorm

        diag = 4.0 * float(np.sum(sq)) + tau
        outer = 8.0 * (diff.T @ diff)
        h00, h01, h11 = diag + outer[0, 0], outer[0, 1], diag + outer[1, 1]
        det = h00 * h11 - h01 * h01
        if det > 1e-300:
            step = np.array([-(h11 * grad[0] - h01 * grad[1]) / det, -(h00 * grad[1] - h01 * grad[0]) / det])
        else:
            step = -grad
        slope = float(grad @ step)
        if not slope < 0:
            step = -grad
            slope = -gnorm * gnorm

        if -slope <= 1e-12 * max(1.0, abs(f0)):
            # decrease below the resolution of f: take the full Newton step
            x = x + step
            f0 = value(x)
            continue

        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            candidate = x + t * step
            fc = value(candidate)
            if fc <= f0 + ARMIJO_C * t * slope:
                break
            t *= 0.5
        else:
            return x, it + 1, gnorm
        x, f0 = candidate, fc

    diff = x - nbrs
    sq = np.sum(diff * diff, axis=1)
    grad = 4.0 * np.sum(sq[:, None] * diff, axis=0) - lin + tau * (x - pivot)
    return x, max_iters, math.hypot(grad[0], grad[1])


def local_subproblem_solve(
    i: int,
    pivot_i: Position | Sequence[float],
    neighbor_positions: Mapping[int, Position | Sequence[float]],
    ranges: Mapping[int, float],
    cfg: SelfLocConfig,
) -> Position:
    """
    Minimize node i's convex surrogate in x_i with its neighbors held fixed.

    Parameters
    ----------
    i : int
        Node solving the problem (used in messages only)
    pivot_i : Position
        The node's current estimate, around which the surrogate is built
    neighbor_positions : Mapping[int, Position]
        The neighbor values node i treats as fixed
    ranges : Mapping[int, float]
        Measured range to each neighbor
    cfg : SelfLocConfig
        Supplies proximal_tau, inner_tol and inner_max_iters

    Returns
    -------
    Position
        Minimizer of the surrogate
    """
    if not neighbor_positions:
        raise NoNeighbors(f"node {i} has no neighbors to localize against")
    ids = sorted(neighbor_positions)
    missing = [j for j in ids if j not in ranges]
    if missing:
        raise MissingMeasurement(f"node {i} has no range to neighbors {missing}")
    nbrs = np.array([tuple(neighbor_positions[j]) for j in ids], dtype=float)
    d2 = np.array([ranges[j] ** 2 for j in ids], dtype=float)
    x, n_iter, gnorm = _newton_minimize(
        np.asarray(tuple(pivot_i), dtype=float), nbrs, d2, cfg.proximal_tau, cfg.inner_tol, cfg.inner_max_iters
    )
    if gnorm > cfg.inner_tol:
        logger.warning(f"Node {i}: inner solver stopped after {n_iter} iterations with |grad|={gnorm:.3e}")
    return Position.from_array(x)


def mean_absolute_error(estimates, truth, unknown_set) -> float:
    """Mean Euclidean error (1/|N_u|) sum ||x_hat_i - x_i|| over the unknown nodes."""
    ids = np.array(sorted(unknown_set), dtype=int)
    if len(ids) == 0:
        return 0.0
    est = np.asarray([tuple(estimates[i]) for i in ids], dtype=float)
    tru = np.asarray([tuple(truth[i]) for i in ids], dtype=float)
    return float(np.mean(np.hypot(est[:, 0] - tru[:, 0], est[:, 1] - tru[:, 1])))


def default_init_box(scenario: Scenario) -> Rect:
    """Bounding box of the anchors inflated by one communication radius."""
    anchors = sorted(scenario.anchors)
    return Rect.bounding(scenario.coords[anchors]).inflate(scenario.comm_radius)


def init_state(scenario: Scenario, cfg: SelfLocConfig) -> SelfLocState:
    """
    Draw the initial estimates and perform the reliable round-0 exchange.

    Unknown nodes start uniformly inside the init box (node-id order, INIT
    stream); anchors hold their true position. Every node hears every
    neighbor's initial value.
    """
    if not scenario.anchors:
        raise DataError("self-positioning needs at least one anchor")
    box = cfg.init_box if cfg.init_box is not None else default_init_box(scenario)
    rng = SeedStreams(cfg.seed).generator(Purpose.INIT)
    estimates = scenario.coords.copy()
    unknowns = list(scenario.unknowns)
    if unknowns:
        draws = rng.uniform(size=(len(unknowns), 2))
        estimates[unknowns, 0] = box.xmin + draws[:, 0] * (box.xmax - box.xmin)
        estimates[unknowns, 1] = box.ymin + draws[:, 1] * (box.ymax - box.ymin)
    last_known = np.broadcast_to(estimates, (scenario.n_nodes, scenario.n_nodes, 2)).copy()
    return SelfLocState(estimates, last_known, 0)


def run_round(
    state: SelfLocState,
    scenario: Scenario,
    measurements: Measurements,
    cfg: SelfLocConfig,
    rng: np.random.Generator,
    problems: Optional[dict] = None,
) -> SelfLocState:
    """
    One synchronous round: local solves, then lossy broadcasts.

    Parameters
    ----------
    state : SelfLocState
        State at the start of the round (left untouched)
    scenario : Scenario
        Deployment
    measurements : Measurements
        Neighbor ranges
    cfg : SelfLocConfig
        Run parameters
    rng : np.random.Generator
        This round's packet-loss stream; one uniform per node in node-id order
    problems : dict, optional
        Precomputed per-node neighbor arrays, reused across rounds by ``run``

    Returns
    -------
    SelfLocState
        State after the round
    """
    if problems is None:
        problems = _local_problems(scenario, measurements)

    estimates = state.estimates.copy()
    for i in scenario.unknowns:
        problem = problems[i]
        pivot = state.estimates[i]
        x_hat, n_iter, gnorm = _newton_minimize(
            pivot,
            state.last_known[i, problem.neighbors],
            problem.d2,
            cfg.proximal_tau,
            cfg.inner_tol,
            cfg.inner_max_iters,
        )
        if n_iter >= cfg.inner_max_iters and gnorm > cfg.inner_tol:
            logger.warning(f"Round {state.iteration}: node {i} inner solver hit cap, |grad|={gnorm:.3e}")
        estimates[i] = pivot + cfg.step_size * (x_hat - pivot)

    lost = rng.random(scenario.n_nodes) < cfg.packet_loss_prob
    last_known = state.last_known.copy()
    for j in scenario.node_ids:
        if lost[j]:
            continue
        receivers = list(scenario.neighbor_lists[j])
        if receivers:
            last_known[receivers, j] = estimates[j]
    if lost.any():
        logger.debug(f"Round {state.iteration}: {int(lost.sum())} broadcast(s) lost")
    return SelfLocState(estimates, last_known, state.iteration + 1)


def run(scenario: Scenario, measurements: Measurements, cfg: SelfLocConfig) -> ExperimentTrace:
    """
    Run the self-positioning algorithm for ``cfg.max_iters`` rounds.

    Parameters
    ----------
    scenario : Scenario
        Deployment with at least one anchor
    measurements : Measurements
        Neighbor ranges measured once at start-up
    cfg : SelfLocConfig
        Run parameters; ``cfg.seed`` drives initialization and packet losses

    Returns
    -------
    ExperimentTrace
        Estimates, MAE and objective for iterations 0..max_iters
    """
    state = init_state(scenario, cfg)
    problems = _local_problems(scenario, measurements)
    edges = _directed_edges(scenario, measurements)
    streams = SeedStreams(cfg.seed)
    truth = scenario.coords
    unknowns = scenario.unknowns

    snapshots = [state.estimates.copy()]
    mae = [mean_absolute_error(state.estimates, truth, unknowns)]
    objective = [_objective(state.estimates, edges)]
    for k in range(cfg.max_iters):
        state = run_round(state, scenario, measurements, cfg, streams.generator(Purpose.PACKET_LOSS, k), problems)
        snapshots.append(state.estimates.copy())
        mae.append(mean_absolute_error(state.estimates, truth, unknowns))
        objective.append(_objective(state.estimates, edges))
        logger.debug(f"Iteration {k + 1}: MAE={mae[-1]:.4f} m, objective={objective[-1]:.4g}")

    logger.info(
        f"Self-positioning finished: {cfg.max_iters} iterations, loss={cfg.packet_loss_prob}, "
        f"MAE {mae[0]:.3f} -> {mae[-1]:.3f} m"
    )
    return ExperimentTrace(
        estimates=np.stack(snapshots),
        mae=np.array(mae),
        objective=np.array(objective),
        config=cfg.to_dict(),
        seed=cfg.seed,
    )
