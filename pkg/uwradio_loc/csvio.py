"""CSV readers and writers for samples, scenarios, instances and experiment outputs."""

import csv
import logging
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional, Sequence

from . import __version__
from .channel_model import GainSample
from .config import load_radii, radii_path, save_radii
from .errors import DataError, DataFormatError
from .network import Position, Scenario
from .selfloc import ExperimentTrace
from .sim import LossCurves, TrackingRun
from .srls import SrlsInput

logger = logging.getLogger(__name__)

GAIN_SAMPLES_HEADER = ("distance_m", "gain_db")
SCENARIO_HEADER = ("id", "x_m", "y_m", "is_anchor")
TRAJECTORY_HEADER = ("x_m", "y_m")
INSTANCE_HEADER = ("x_m", "y_m", "range_m")
TRACE_HEADER = ("iteration", "node_id", "x_est_m", "y_est_m")
SUMMARY_HEADER = ("iteration", "mae_m", "objective")
CURVES_HEADER = ("loss_prob", "iteration", "mae_m")
TRACKING_HEADER = ("sample", "true_x", "true_y", "est_x", "est_y", "n_inrange", "flagged")

_TRUE = {"1", "true", "yes"}
_FALSE = {"0", "false", "no"}


def _read_rows(path: Path | str, header: Sequence[str]) -> Iterator[tuple[int, dict[str, str]]]:
    """
    Yield (line number, row) pairs of a CSV file, skipping '#' comments and blank lines.

    The first non-comment line must be exactly ``header``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, encoding="utf-8", newline="") as f:
        lines = ((n, line) for n, line in enumerate(f, 1) if line.strip() and not line.lstrip().startswith("#"))
        seen_header = False
        for n, line in lines:
            fields = [v.strip() for v in next(csv.reader([line]))]
            if not seen_header:
                if tuple(fields) != tuple(header):
                    raise DataFormatError(f"expected header {','.join(header)}, got {','.join(fields)}", str(path), n)
                seen_header = True
                continue
            if len(fields) != len(header):
                raise DataFormatError(f"expected {len(header)} fields, got {len(fields)}", str(path), n)
            yield n, dict(zip(header, fields))
        if not seen_header:
            raise DataFormatError(f"missing header {','.join(header)}", str(path))


def _float(row: dict[str, str], key: str, path: Path | str, line: int) -> float:
    try:
        return float(row[key])
    except ValueError:
        raise DataFormatError(f"{key}={row[key]!r} is not a number", str(path), line) from None


def _flag(value: str, path: Path | str, line: int) -> bool:
    v = value.lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise DataFormatError(f"is_anchor={value!r} is not a boolean", str(path), line)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


class _Writer:
    """CSV writer that starts every file with a version line and '# key = value' parameters."""

    def __init__(self, path: Path | str, title: str, params: Optional[Mapping[str, Any]], header: Sequence[str]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8", newline="")
        self._file.write(f"# uwradio-loc {__version__} {title}\n")
        for key, value in (params or {}).items():
            self._file.write(f"# {key} = {value}\n")
        self._csv = csv.writer(self._file, lineterminator="\n")
        self._csv.writerow(header)

    def row(self, *values: Any) -> None:
        self._csv.writerow(values)

    def __enter__(self) -> "_Writer":
        return self

    def __exit__(self, *exc) -> None:
        self._file.close()
        if exc[0] is None:
            logger.info(f"Wrote {self.path}")


def read_gain_samples(path: Path | str) -> list[GainSample]:
    """Read calibration samples from a ``distance_m,gain_db`` CSV."""
    samples = []
    for n, row in _read_rows(path, GAIN_SAMPLES_HEADER):
        d = _float(row, "distance_m", path, n)
        g = _float(row, "gain_db", path, n)
        try:
            samples.append(GainSample(d, g))
        except DataError as e:
            raise DataFormatError(str(e), str(path), n) from e
    return samples


def write_gain_samples(samples: Sequence[GainSample], path: Path | str, params: Optional[Mapping] = None) -> None:
    with _Writer(path, "gain samples", params, GAIN_SAMPLES_HEADER) as w:
        for s in samples:
            w.row(_fmt(s.distance), _fmt(s.gain))


def read_scenario(path: Path | str, radii: Optional[tuple[float, float]] = None) -> Scenario:
    """
    Read a scenario CSV and its radii sidecar.

    Ids must be exactly 0..N-1 (any row order). ``radii`` overrides the sidecar.
    """
    positions: dict[int, Position] = {}
    anchors = set()
    for n, row in _read_rows(path, SCENARIO_HEADER):
        try:
            i = int(row["id"])
        except ValueError:
            raise DataFormatError(f"id={row['id']!r} is not an integer", str(path), n) from None
        if i in positions:
            raise DataFormatError(f"duplicate node id {i}", str(path), n)
        try:
            positions[i] = Position(_float(row, "x_m", path, n), _float(row, "y_m", path, n))
        except DataFormatError:
            raise
        except DataError as e:
            raise DataFormatError(str(e), str(path), n) from e
        if _flag(row["is_anchor"], path, n):
            anchors.add(i)
    if sorted(positions) != list(range(len(positions))):
        raise DataFormatError(f"node ids must be 0..{len(positions) - 1}", str(path))
    comm_radius, sense_radius = radii if radii is not None else load_radii(radii_path(path))
    return Scenario(tuple(positions[i] for i in range(len(positions))), frozenset(anchors), comm_radius, sense_radius)


def write_scenario(scenario: Scenario, path: Path | str, params: Optional[Mapping] = None) -> None:
    """Write a scenario CSV plus its radii sidecar."""
    with _Writer(path, "scenario", params, SCENARIO_HEADER) as w:
        for i, p in enumerate(scenario.positions):
            w.row(i, _fmt(p.x), _fmt(p.y), int(i in scenario.anchors))
    save_radii(scenario.comm_radius, scenario.sense_radius, radii_path(path))


def read_trajectory(path: Path | str) -> list[Position]:
    """Read target positions from an ``x_m,y_m`` CSV."""
    return [Position(_float(row, "x_m", path, n), _float(row, "y_m", path, n)) for n, row in _read_rows(path, TRAJECTORY_HEADER)]


def write_trajectory(points: Sequence[Position], path: Path | str, params: Optional[Mapping] = None) -> None:
    with _Writer(path, "trajectory", params, TRAJECTORY_HEADER) as w:
        for p in points:
            w.row(_fmt(p.x), _fmt(p.y))


def read_instance(path: Path | str) -> SrlsInput:
    """Read an SR-LS instance, one anchor per ``x_m,y_m,range_m`` row."""
    anchors, ranges = [], []
    for n, row in _read_rows(path, INSTANCE_HEADER):
        anchors.append(Position(_float(row, "x_m", path, n), _float(row, "y_m", path, n)))
        ranges.append(_float(row, "range_m", path, n))
    return SrlsInput(tuple(anchors), tuple(ranges))


def write_instance(inp: SrlsInput, path: Path | str, params: Optional[Mapping] = None) -> None:
    with _Writer(path, "srls instance", params, INSTANCE_HEADER) as w:
        for p, r in zip(inp.anchors, inp.ranges):
            w.row(_fmt(p.x), _fmt(p.y), _fmt(r))


def write_trace(trace: ExperimentTrace, path: Path | str, params: Optional[Mapping] = None) -> None:
    """Per-iteration node estimates."""
    with _Writer(path, "self-positioning trace", params, TRACE_HEADER) as w:
        for k, snapshot in enumerate(trace.estimates):
            for i, (x, y) in enumerate(snapshot):
                w.row(k, i, _fmt(x), _fmt(y))


def write_summary(trace: ExperimentTrace, path: Path | str, params: Optional[Mapping] = None) -> None:
    """Per-iteration MAE and objective."""
    with _Writer(path, "self-positioning summary", params, SUMMARY_HEADER) as w:
        for k, (mae, obj) in enumerate(zip(trace.mae, trace.objective)):
            w.row(k, _fmt(mae), _fmt(obj))


def write_curves(curves: LossCurves, path: Path | str, params: Optional[Mapping] = None) -> None:
    """Seed-averaged MAE per loss level and iteration."""
    with _Writer(path, "packet-loss sweep", params, CURVES_HEADER) as w:
        for p in curves.loss_levels:
            for k, mae in enumerate(curves.mean_curve(p)):
                w.row(_fmt(p), k, _fmt(mae))


def write_tracking(run: TrackingRun, path: Path | str, params: Optional[Mapping] = None) -> None:
    """Per-sample truth, estimate, in-range count and flag."""
    with _Writer(path, "tracking", params, TRACKING_HEADER) as w:
        for k, (truth, est, count, flag) in enumerate(zip(run.samples, run.estimates, run.n_inrange, run.flagged)):
            w.row(
                k,
                _fmt(truth.x),
                _fmt(truth.y),
                _fmt(est.x if est is not None else None),
                _fmt(est.y if est is not None else None),
                count,
                int(flag),
            )
