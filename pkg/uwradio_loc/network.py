"""Network world model: node positions, anchors and radius-based neighborhoods."""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, InvalidAnchor, UnknownNode

logger = logging.getLogger(__name__)

# Reference deployment: 27 nodes on a 5 m grid, anchors on the corners
REFERENCE_ROWS = 3
REFERENCE_COLS = 9
REFERENCE_SPACING = 5.0  # m
REFERENCE_COMM_RADIUS = 10.0  # m
REFERENCE_SENSE_RADIUS = 8.0  # m


@dataclass(frozen=True)
class Position:
    """Planar position in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError(f"position components must be finite, got ({self.x}, {self.y})")

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def from_array(cls, xy: Sequence[float]) -> "Position":
        return cls(float(xy[0]), float(xy[1]))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax] in meters."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin <= self.xmax and self.ymin <= self.ymax):
            raise DataError(f"empty rectangle {self}")

    def inflate(self, margin: float) -> "Rect":
        return Rect(self.xmin - margin, self.xmax + margin, self.ymin - margin, self.ymax + margin)

    @classmethod
    def bounding(cls, points: np.ndarray) -> "Rect":
        """Bounding box of an (n, 2) array of points."""
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        return cls(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


def pairwise_distance(p: Position, q: Position) -> float:
    """Euclidean distance between two positions."""
    return math.hypot(p.x - q.x, p.y - q.y)


@dataclass(frozen=True)
class Scenario:
    """
    Ground-truth description of a deployment.

    Node ids are the dense integers ``0..N-1``; ``positions[i]`` is node i.
    """

    positions: tuple[Position, ...]
    anchors: frozenset[int]
    comm_radius: float
    sense_radius: float

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "anchors", frozenset(int(a) for a in self.anchors))
        n = len(self.positions)
        if n == 0:
            raise DataError("scenario needs at least one node")
        bad = sorted(a for a in self.anchors if not 0 <= a < n)
        if bad:
            raise InvalidAnchor(f"anchor ids {bad} outside node range 0..{n - 1}")
        if not (self.comm_radius > 0):
            raise DataError(f"comm_radius must be > 0, got {self.comm_radius}")
        if not (self.sense_radius > 0):
            raise DataError(f"sense_radius must be > 0, got {self.sense_radius}")

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def node_ids(self) -> range:
        return range(len(self.positions))

    @cached_property
    def unknowns(self) -> tuple[int, ...]:
        """Ids of nodes that must estimate their position, ascending."""
        return tuple(i for i in self.node_ids if i not in self.anchors)

    @cached_property
    def coords(self) -> np.ndarray:
        """Ground truth as an (N, 2) array."""
        coords = np.array([[p.x, p.y] for p in self.positions], dtype=float)
        coords.setflags(write=False)
        return coords

    @cached_property
    def distances(self) -> np.ndarray:
        """Ground-truth (N, N) distance matrix."""
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=-1))
        dist.setflags(write=False)
        return dist

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbor ids of every node (closed ball of radius comm_radius)."""
        adjacency = self.distances <= self.comm_radius
        np.fill_diagonal(adjacency, False)
        return tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in adjacency)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Unordered neighbor pairs (i, j) with i < j, in lexicographic order."""
        return tuple((i, j) for i, nbrs in enumerate(self.neighbor_lists) for j in nbrs if i < j)

    def check_node(self, i: int) -> int:
        if not 0 <= i < self.n_nodes:
            raise UnknownNode(f"node {i} not in scenario with {self.n_nodes} nodes")
        return int(i)

    def with_radii(self, comm_radius: float | None = None, sense_radius: float | None = None) -> "Scenario":
        """Copy of the scenario with one or both radii replaced."""
        return Scenario(
            positions=self.positions,
            anchors=self.anchors,
            comm_radius=self.comm_radius if comm_radius is None else comm_radius,
            sense_radius=self.sense_radius if sense_radius is None else sense_radius,
        )


def build_grid(
    rows: int,
    cols: int,
    spacing: float,
    anchor_ids: Iterable[int],
    comm_radius: float,
    sense_radius: float,
) -> Scenario:
    """
    Build a rectangular grid deployment.

    Parameters
    ----------
    rows, cols : int
        Grid shape; node ``r * cols + c`` sits at ``(c * spacing, r * spacing)``
    spacing : float
        Horizontal and vertical separation in meters
    anchor_ids : Iterable[int]
        Nodes whose position is known
    comm_radius, sense_radius : float
        Radio reach between nodes and target sensing reach, in meters

    Returns
    -------
    Scenario
        Grid scenario with row-major node ids
    """
    if rows < 1 or cols < 1:
        raise DataError(f"grid needs rows, cols >= 1, got {rows}x{cols}")
    if not (spacing > 0):
        raise DataError(f"grid spacing must be > 0, got {spacing}")
    anchors = frozenset(int(a) for a in anchor_ids)
    n = rows * cols
    bad = sorted(a for a in anchors if not 0 <= a < n)
    if bad:
        raise InvalidAnchor(f"anchor ids {bad} exceed grid of {n} nodes (max id {n - 1})")
    positions = tuple(Position(c * spacing, r * spacing) for r in range(rows) for c in range(cols))
    return Scenario(positions, anchors, comm_radius, sense_radius)


def corner_ids(rows: int, cols: int) -> frozenset[int]:
    """Ids of the four corners of a row-major grid."""
    return frozenset({0, cols - 1, (rows - 1) * cols, rows * cols - 1})


def reference_scenario() -> Scenario:
    """The 3 x 9 grid, 5 m spacing, corner anchors, 10 m links and 8 m sensing."""
    return build_grid(
        REFERENCE_ROWS,
        REFERENCE_COLS,
        REFERENCE_SPACING,
        corner_ids(REFERENCE_ROWS, REFERENCE_COLS),
        REFERENCE_COMM_RADIUS,
        REFERENCE_SENSE_RADIUS,
    )


def neighbors(s: Scenario, i: int) -> set[int]:
    """Nodes within comm_radius of node i, excluding i."""
    return set(s.neighbor_lists[s.check_node(i)])


def in_sensing_range(s: Scenario, target: Position) -> set[int]:
    """Nodes within sense_radius of a target position."""
    dist = np.hypot(s.coords[:, 0] - target.x, s.coords[:, 1] - target.y)
    return {int(i) for i in np.flatnonzero(dist <= s.sense_radius)}
