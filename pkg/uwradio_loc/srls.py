"""
Squared-range least-squares (SR-LS) localization.

Minimizes sum_i (d_i^2 - ||x_i - u||^2)^2 over the target u exactly, by
rewriting it over y = (u, ||u||^2) as a quadratic problem with one quadratic
equality constraint and finding the constraint multiplier lambda by bisection on
the secular function

    phi(lambda) = y(lambda)^T D y(lambda) + 2 f^T y(lambda),
    y(lambda) = (B^T B + lambda D)^{-1} (B^T c - lambda f),

which is decreasing on the interval where B^T B + lambda D is positive definite.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DataError, NearSingular, NoBracket, RankDeficient
from .network import Position, Rect

logger = logging.getLogger(__name__)

D_MATRIX = np.diag([1.0, 1.0, 0.0])
F_VECTOR = np.array([0.0, 0.0, -0.5])

RANK_TOL = 1e-10
PIVOT_TOL = 1e-12
DEFAULT_EPS = 1e-7
INITIAL_UPPER = 100.0
MAX_DOUBLINGS = 60
LOWER_OFFSET = 1e-9

D_MATRIX.setflags(write=False)
F_VECTOR.setflags(write=False)


@dataclass(frozen=True)
class SrlsInput:
    """Anchor positions and the (estimated) ranges from each anchor to the target."""

    anchors: tuple[Position, ...]
    ranges: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "ranges", tuple(float(r) for r in self.ranges))
        if len(self.anchors) != len(self.ranges):
            raise DataError(f"{len(self.anchors)} anchors but {len(self.ranges)} ranges")
        if len(self.anchors) < 3:
            raise DataError(f"planar SR-LS needs at least 3 anchors, got {len(self.anchors)}")
        if not all(math.isfinite(r) and r >= 0 for r in self.ranges):
            raise DataError("ranges must be finite and >= 0")

    @property
    def anchor_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.anchors], dtype=float)

    @property
    def range_array(self) -> np.ndarray:
        return np.array(self.ranges, dtype=float)


@dataclass(frozen=True, eq=False)
class SrlsMatrices:
    """The (B, c, D, f) system; B^T B and B^T c are computed once on construction."""

    B: np.ndarray
    c: np.ndarray
    D: np.ndarray = field(default_factory=lambda: D_MATRIX.copy())
    f: np.ndarray = field(default_factory=lambda: F_VECTOR.copy())
    BtB: np.ndarray = field(init=False, repr=False)
    Btc: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "BtB", B.T @ B)
        object.__setattr__(self, "Btc", B.T @ c)


@dataclass(frozen=True)
class SrlsSolution:
    """Solver output with the diagnostics of the bisection."""

    position: Position
    lambda_star: float
    phi_residual: float
    n_doublings: int
    brackets: tuple[tuple[float, float], ...] = ()


def squared_range_objective(inp: SrlsInput, u: Position | Sequence[float]) -> float:
    """sum_i (d_i^2 - ||x_i - u||^2)^2 at a candidate target position."""
    ux, uy = u
    anchors = inp.anchor_array
    sq = (anchors[:, 0] - ux) ** 2 + (anchors[:, 1] - uy) ** 2
    return float(np.sum((inp.range_array ** 2 - sq) ** 2))


def assemble(inp: SrlsInput) -> SrlsMatrices:
    """
    Build the stacked system with rows (-2 x_i^T, 1) and c_i = d_i^2 - ||x_i||^2.

    Raises
    ------
    RankDeficient
        If B^T B is singular relative to its largest eigenvalue (collinear anchors)
    """
    anchors = inp.anchor_array
    B = np.column_stack([-2.0 * anchors, np.ones(len(anchors))])
    c = inp.range_array ** 2 - np.sum(anchors ** 2, axis=1)
    m = SrlsMatrices(B, c)
    eig = np.linalg.eigvalsh(m.BtB)
    if eig[0] <= RANK_TOL * max(eig[-1], 1.0):
        raise RankDeficient(
            f"anchor geometry is degenerate (eigenvalues of B^T B: {eig.tolist()}); "
            "anchors are collinear or coincident"
        )
    return m


def y_hat(lam: float, m: SrlsMatrices) -> np.ndarray:
    """Solve (B^T B + lam D) y = B^T c - lam f through a Cholesky factorization."""
    K = m.BtB + lam * m.D
    try:
        factor = scipy.linalg.cho_factor(K, lower=True)
    except np.linalg.LinAlgError as e:
        raise NearSingular(f"B^T B + {lam} D is not positive definite: {e}") from e
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() < PIVOT_TOL * math.sqrt(max(float(np.max(np.diag(K))), 1.0)):
        raise NearSingular(f"Cholesky pivot {pivots.min():.3e} collapsed at lambda={lam}")
    return scipy.linalg.cho_solve(factor, m.Btc - lam * m.f)


def phi(lam: float, m: SrlsMatrices) -> float:
    """Secular function y^T D y + 2 f^T y; equals ||u||^2 - alpha for y = (u, alpha)."""
    y = y_hat(lam, m)
    return float(y @ m.D @ y + 2.0 * m.f @ y)


def lambda_lower(m: SrlsMatrices) -> float:
    """
    Lower end -1/mu of the feasible multiplier interval.

    mu is the largest generalized eigenvalue of D v = mu B^T B v, computed by
    whitening with the Cholesky factor: mu = max eig(L^{-1} D L^{-T}), B^T B = L L^T.
    """
    try:
        L = np.linalg.cholesky(m.BtB)
    except np.linalg.LinAlgError as e:
        raise RankDeficient(f"B^T B is not positive definite: {e}") from e
    left = scipy.linalg.solve_triangular(L, m.D, lower=True)
    whitened = scipy.linalg.solve_triangular(L, left.T, lower=True)
    mu = float(np.linalg.eigvalsh(0.5 * (whitened + whitened.T))[-1])
    if mu <= 0:
        raise RankDeficient(f"largest generalized eigenvalue is {mu}")
    return -1.0 / mu


def solve_detailed(inp: SrlsInput, eps: float = DEFAULT_EPS, record_brackets: bool = False) -> SrlsSolution:
    """
    Solve SR-LS and report the multiplier and residual of the secular equation.

    Parameters
    ----------
    inp : SrlsInput
        Anchors and ranges
    eps : float
        Width of the final multiplier bracket
    record_brackets : bool
        Keep every (lower, upper) pair visited by the bisection

    Returns
    -------
    SrlsSolution
        Global minimizer of the squared-range objective plus diagnostics
    """
    if not (eps > 0):
        raise DataError(f"bisection tolerance must be > 0, got {eps}")
    m = assemble(inp)

    lower = lambda_lower(m)
    lower += LOWER_OFFSET * (1.0 + abs(lower))
    phi_lower = phi(lower, m)
    if phi_lower < 0:
        # No root right of the bound: the minimizer sits on the boundary multiplier
        logger.warning(f"Secular function negative at lower bound {lower:.6g}; returning boundary solution")
        y = y_hat(lower, m)
        return SrlsSolution(Position(float(y[0]), float(y[1])), lower, phi_lower, 0,
                            ((lower, lower),) if record_brackets else ())

    upper = INITIAL_UPPER
    phi_upper = phi(upper, m)
    n_doublings = 0
    while phi_upper >= 0:
        if n_doublings >= MAX_DOUBLINGS:
            raise NoBracket(f"secular function still >= 0 at lambda={upper:.6g} after {n_doublings} doublings")
        upper *= 2.0
        phi_upper = phi(upper, m)
        n_doublings += 1

    brackets = [(lower, upper)] if record_brackets else []
    while upper - lower >= eps:
        mid = 0.5 * (lower + upper)
        if mid <= lower or mid >= upper:
            break
        phi_mid = phi(mid, m)
        if phi_mid >= 0:
            lower, phi_lower = mid, phi_mid
        else:
            upper, phi_upper = mid, phi_mid
        if record_brackets:
            brackets.append((lower, upper))

    # false-position step inside the final bracket
    lam = lower + phi_lower * (upper - lower) / (phi_lower - phi_upper)
    y = y_hat(lam, m)
    residual = float(y @ m.D @ y + 2.0 * m.f @ y)
    logger.debug(f"SR-LS root lambda*={lam:.9g}, phi={residual:.3e}, doublings={n_doublings}")
    return SrlsSolution(Position(float(y[0]), float(y[1])), float(lam), residual, n_doublings, tuple(brackets))


def solve(inp: SrlsInput, eps: float = DEFAULT_EPS) -> Position:
    """Global minimizer of the squared-range objective."""
    return solve_detailed(inp, eps).position


def brute_force_oracle(inp: SrlsInput, bounds: Rect, resolution: float, chunk: int = 256) -> Position:
    """
    Exhaustive minimization of the squared-range objective on a grid.

    The grid holds the centers of cells no wider than ``resolution``; ties go to
    the smallest x, then the smallest y.
    """
    if not (resolution > 0):
        raise DataError(f"resolution must be > 0, got {resolution}")

    def centers(lo: float, hi: float) -> np.ndarray:
        n = max(1, math.ceil((hi - lo) / resolution - 1e-9))
        return lo + (np.arange(n) + 0.5) * (hi - lo) / n

    xs = centers(bounds.xmin, bounds.xmax)
    ys = centers(bounds.ymin, bounds.ymax)
    anchors = inp.anchor_array
    r2 = inp.range_array ** 2

    best_value = math.inf
    best = (float(xs[0]), float(ys[0]))
    for start in range(0, len(xs), chunk):
        gx = xs[start:start + chunk, None]
        values = np.zeros((len(gx), len(ys)))
        for (ax, ay), rr in zip(anchors, r2):
            values += (rr - ((gx - ax) ** 2 + (ys[None, :] - ay) ** 2)) ** 2
        k = int(np.argmin(values))
        value = float(values.flat[k])
        if value < best_value:
            best_value = value
            ix, iy = divmod(k, len(ys))
            best = (float(xs[start + ix]), float(ys[iy]))
    return Position(*best)


def solve_or_none(inp: SrlsInput, eps: float = DEFAULT_EPS) -> Optional[SrlsSolution]:
    """solve_detailed, returning None when the anchor geometry is degenerate."""
    try:
        return solve_detailed(inp, eps)
    except RankDeficient as e:
        logger.debug(f"SR-LS skipped: {e}")
        return None
