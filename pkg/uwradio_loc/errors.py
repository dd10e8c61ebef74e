"""Exception hierarchy for uwradio-loc."""

from typing import Optional


class LocalizationError(Exception):
    """Base class for all uwradio-loc errors."""


class DataError(LocalizationError, ValueError):
    """Invalid input data: bad files, bad ids, bad parameters."""


class NumericalError(LocalizationError, ArithmeticError):
    """A solver could not produce a well-defined answer."""


class DataFormatError(DataError):
    """Malformed row or key in an input file."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class InvalidDistance(DataError):
    """A distance that must be positive was not."""


class InvalidAnchor(DataError):
    """Anchor id outside the scenario's node range."""


class UnknownNode(DataError):
    """Node id not present in the scenario."""


class MissingMeasurement(DataError):
    """No range measurement for a neighbor pair that needs one."""


class NoNeighbors(DataError):
    """A node has nothing to localize against."""


class DegenerateFit(NumericalError):
    """Least-squares line fit with a singular normal matrix."""


class RankDeficient(NumericalError):
    """Anchor geometry does not determine a position (collinear anchors)."""


class NearSingular(NumericalError):
    """Cholesky pivot collapsed while solving the secular system."""


class NoBracket(NumericalError):
    """The secular function never became negative while doubling the upper bound."""
