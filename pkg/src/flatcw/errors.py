"""Exception hierarchy for flatcw."""

__all__ = [
    "FlatCWError",
    "DimensionError",
    "ArityError",
    "DegreeError",
    "GridMismatchError",
    "BidegreeError",
    "InvalidGroupElement",
    "InvalidGaugeField",
    "InvalidDirection",
    "NonClosedFormError",
    "NonCommutingError",
    "NonFlatError",
    "OpenLoopError",
    "ConfigError",
]


class FlatCWError(Exception):
    """Base class for all errors raised by flatcw."""


class DimensionError(FlatCWError, ValueError):
    pass


class ArityError(FlatCWError, ValueError):
    pass


class DegreeError(FlatCWError, ValueError):
    pass


class GridMismatchError(FlatCWError, ValueError):
    pass


class BidegreeError(FlatCWError, ValueError):
    pass


class InvalidGroupElement(FlatCWError, ValueError):
    pass


class InvalidGaugeField(FlatCWError, ValueError):
    pass


class InvalidDirection(FlatCWError, ValueError):
    pass


class NonClosedFormError(FlatCWError, ValueError):
    def __init__(self, residual: float, tolerance: float, message: str | None = None):
        self.residual = float(residual)
        self.tolerance = float(tolerance)
        super().__init__(message or f"form is not closed: residual {residual:.3e} > {tolerance:.3e}")


class NonCommutingError(FlatCWError, ValueError):
    def __init__(self, pair: tuple[int, int], norm: float):
        self.pair = pair
        self.norm = float(norm)
        super().__init__(f"components {pair[0]} and {pair[1]} do not commute (|[.,.]| = {norm:.3e})")


class NonFlatError(FlatCWError, ValueError):
    def __init__(self, residual: float, tolerance: float, what: str = "connection"):
        self.residual = float(residual)
        self.tolerance = float(tolerance)
        super().__init__(f"{what} is not flat: curvature {residual:.3e} > {tolerance:.3e}")


class OpenLoopError(FlatCWError, ValueError):
    pass


class ConfigError(FlatCWError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
