"""Spatio-temporal statistics for station-level air quality panels.

The package covers temporal decomposition and trend tests, Moran's I
screening of weekly cross-sections, three spatial interpolators (inverse
distance weighting, ordinary kriging, and random-forest regression
kriging) with cross-validated accuracy scoring, and a
difference-in-difference estimator of the lockdown intervention.
"""

__version__ = "0.1.0"

from .errors import AirqstatError
from .geometry import SpatialSample
from .model import (
    POLLUTANTS,
    ActivityZone,
    DateRange,
    DescriptiveSummary,
    Observation,
    Period,
    PeriodSpec,
    Season,
    StationMeta,
    StationPanel,
    descriptive_summary,
    period_of,
    season_of,
    weekly_average,
    weekly_cross_section,
)

__all__ = [
    "__version__",
    "AirqstatError",
    "SpatialSample",
    "POLLUTANTS",
    "ActivityZone",
    "DateRange",
    "DescriptiveSummary",
    "Observation",
    "Period",
    "PeriodSpec",
    "Season",
    "StationMeta",
    "StationPanel",
    "descriptive_summary",
    "period_of",
    "season_of",
    "weekly_average",
    "weekly_cross_section",
]
