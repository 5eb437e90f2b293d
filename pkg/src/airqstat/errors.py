"""Exception types shared across the package."""


class AirqstatError(Exception):
    """Base class for every error raised by this package."""


# --- input / schema -------------------------------------------------------

class SchemaError(AirqstatError):
    """Malformed input file. Carries the offending 1-based line numbers."""

    def __init__(self, message, lines=()):
        super().__init__(message)
        self.lines = tuple(lines)


class UnknownStationError(AirqstatError):
    """A station id does not resolve against the panel's station list."""


class SchemaMismatchError(AirqstatError):
    """Feature names do not match the schema a model was trained with."""


class LengthMismatchError(AirqstatError):
    """Paired sequences have different lengths."""


class DimensionMismatchError(AirqstatError):
    """An array's size does not match the object it is paired with."""


# --- statistical preconditions --------------------------------------------

class TooFewValuesError(AirqstatError):
    """Not enough values for the requested summary."""


class TooFewSamplesError(AirqstatError):
    """Not enough spatial samples for the requested operation."""


class TooFewRowsError(AirqstatError):
    """Not enough panel rows for the requested fit."""


class TooFewBinsError(AirqstatError):
    """Not enough nonempty distance bins to fit a variogram."""


class SeriesTooShortError(AirqstatError):
    """The series is shorter than the operation requires."""


class ZeroVarianceError(AirqstatError):
    """All values are equal, so the statistic is undefined."""


class AllTiedError(AirqstatError):
    """Every pair of values is tied; rank correlation is undefined."""


class LagTooLargeError(AirqstatError):
    """Requested lag is not smaller than the series length."""


class MissingDataError(AirqstatError):
    """The operation needs a gap-free window but the series has gaps."""


class NonPositiveBaselineError(AirqstatError):
    """A relative change needs a strictly positive baseline mean."""


# --- data availability -----------------------------------------------------

class NoDataError(AirqstatError):
    """No observations satisfy the requested selection."""


class InsufficientCoverageError(AirqstatError):
    """A season has no defined moving-average ratios."""


class EmptyCellError(AirqstatError):
    """A 2x2 design cell is empty; the interaction is not estimable."""


class EmptyNeighborhoodError(AirqstatError):
    """No samples fall inside the configured neighborhood."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NoOobCoverageError(AirqstatError):
    """Some training rows were never out of bag."""


class EmptyTrainingSetError(AirqstatError):
    """The training set is empty or too small to fit."""


# --- geometry / numerics ----------------------------------------------------

class DuplicateCoordinatesError(AirqstatError):
    """Two distinct entries share a location (zero off-diagonal distance)."""


class AllCoincidentError(AirqstatError):
    """All sample locations coincide; no distance structure exists."""


class SingularSystemError(AirqstatError):
    """The kriging system stayed singular after the regularization retry."""


class DegenerateFitError(AirqstatError):
    """The variogram optimizer was pinned to the bounds of every parameter."""


class GridNodeError(AirqstatError):
    """Interpolation failed at a specific grid node."""

    def __init__(self, message, lon, lat):
        super().__init__(message)
        self.lon = lon
        self.lat = lat
