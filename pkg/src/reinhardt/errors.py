"""Exception hierarchy shared by the library and the CLI exit-code map."""


class ReinhardtError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ReinhardtError, ValueError):
    pass


class GeometryError(ReinhardtError, ValueError):
    """A domain descriptor is invalid or fails validation (e.g. non-convex rho)."""


class WeightError(ReinhardtError, ValueError):
    pass


class QuadratureError(ReinhardtError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``achieved`` carries the best relative error estimate reached.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class MomentRangeError(ReinhardtError, KeyError):
    """A multi-index outside the range covered by a moment table."""

    def __str__(self):
        return str(self.args[0]) if self.args else "moment out of range"


class TableFormatError(ReinhardtError, ValueError):
    pass


class ConfigError(ReinhardtError, ValueError):
    pass
