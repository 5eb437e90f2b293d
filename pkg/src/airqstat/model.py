"""Domain types, calendar mapping, and descriptive statistics for
station-level pollutant panels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import TooFewValuesError, UnknownStationError, ZeroVarianceError

#: Pollutant keys in observation-file column order. Concentrations are
#: ug/m3 except ``aqi``, which is a unitless index.
POLLUTANTS = ("no", "no2", "nox", "co", "pm10", "pm25", "aqi")


class ActivityZone(Enum):
    """Dominant land-use activity around a monitoring station."""

    TRANSPORT = "transport"
    RESIDENTIAL = "residential"
    COMMERCIAL = "commercial"
    INSTITUTIONAL = "institutional"
    UNCLASSIFIED = "unclassified"

    @classmethod
    def parse(cls, text: str) -> "ActivityZone":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown activity zone {text!r}") from None


class Season(Enum):
    SPRING = "spring"    # Feb-Mar
    SUMMER = "summer"    # Apr-Jul
    MONSOON = "monsoon"  # Aug-Sep
    WINTER = "winter"    # Oct-Jan


_SEASON_BY_MONTH = {
    1: Season.WINTER,
    2: Season.SPRING,
    3: Season.SPRING,
    4: Season.SUMMER,
    5: Season.SUMMER,
    6: Season.SUMMER,
    7: Season.SUMMER,
    8: Season.MONSOON,
    9: Season.MONSOON,
    10: Season.WINTER,
    11: Season.WINTER,
    12: Season.WINTER,
}


def season_of(day: date) -> Season:
    """Season of a calendar date. Winter runs October through January."""
    return _SEASON_BY_MONTH[day.month]


class Period(Enum):
    BL = "bl"  # before lockdown
    DL = "dl"  # during lockdown
    AL = "al"  # after lockdown


@dataclass(frozen=True)
class DateRange:
    """Inclusive date interval."""

    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"range start {self.start} is after end {self.end}")

    def __contains__(self, day: date) -> bool:
        return self.start <= day <= self.end

    def days(self) -> Iterator[date]:
        d = self.start
        while d <= self.end:
            yield d
            d += timedelta(days=1)

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def overlaps(self, other: "DateRange") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class PeriodSpec:
    """Before/during/after lockdown windows."""

    bl: DateRange
    dl: DateRange
    al: DateRange

    def __post_init__(self):
        pairs = [(self.bl, self.dl), (self.bl, self.al), (self.dl, self.al)]
        if any(a.overlaps(b) for a, b in pairs):
            raise ValueError("period windows must not overlap")

    @classmethod
    def default(cls) -> "PeriodSpec":
        return cls(
            bl=DateRange(date(2019, 3, 17), date(2019, 6, 29)),
            dl=DateRange(date(2020, 3, 22), date(2020, 6, 27)),
            al=DateRange(date(2020, 6, 28), date(2020, 8, 29)),
        )


def period_of(day: date, spec: PeriodSpec) -> Optional[Period]:
    """The lockdown window containing ``day``, or None when outside all."""
    if day in spec.bl:
        return Period.BL
    if day in spec.dl:
        return Period.DL
    if day in spec.al:
        return Period.AL
    return None


@dataclass(frozen=True)
class StationMeta:
    id: str
    name: str
    lat: float
    lon: float
    zone: ActivityZone

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"station {self.id}: latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"station {self.id}: longitude {self.lon} out of range")


@dataclass(frozen=True)
class Observation:
    """One station-day of pollutant readings; absent keys or None mean missing."""

    station_id: str
    date: date
    values: Mapping[str, Optional[float]]

    def __post_init__(self):
        for key, val in self.values.items():
            if key not in POLLUTANTS:
                raise ValueError(f"unknown pollutant column {key!r}")
            if val is not None and (not math.isfinite(val) or val < 0.0):
                raise ValueError(
                    f"{self.station_id} {self.date}: {key} must be finite and >= 0, got {val}"
                )

    def value(self, pollutant: str) -> Optional[float]:
        return self.values.get(pollutant)


@dataclass(frozen=True, eq=False)
class StationPanel:
    """Validated container of stations and their daily observations."""

    stations: tuple[StationMeta, ...]
    observations: tuple[Observation, ...]
    date_range: DateRange

    def __post_init__(self):
        by_id: dict[str, StationMeta] = {}
        for st in self.stations:
            if st.id in by_id:
                raise ValueError(f"duplicate station id {st.id!r}")
            by_id[st.id] = st
        by_key: dict[tuple[str, date], Observation] = {}
        for obs in self.observations:
            if obs.station_id not in by_id:
                raise UnknownStationError(f"observation references unknown station {obs.station_id!r}")
            if obs.date not in self.date_range:
                raise ValueError(f"observation date {obs.date} outside panel range")
            key = (obs.station_id, obs.date)
            if key in by_key:
                raise ValueError(f"duplicate observation for {key}")
            by_key[key] = obs
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_by_key", by_key)

    def station(self, station_id: str) -> StationMeta:
        try:
            return self._by_id[station_id]
        except KeyError:
            raise UnknownStationError(f"unknown station {station_id!r}") from None

    def stations_in_zone(self, zone: ActivityZone) -> tuple[StationMeta, ...]:
        return tuple(st for st in self.stations if st.zone is zone)

    def value(self, station_id: str, day: date, pollutant: str) -> Optional[float]:
        obs = self._by_key.get((station_id, day))
        return None if obs is None else obs.value(pollutant)

    def daily_series(self, station_id: str, pollutant: str) -> tuple[list[date], np.ndarray]:
        """Dates of the full panel range and the station's values (NaN = missing)."""
        self.station(station_id)
        days = list(self.date_range.days())
        vals = np.full(len(days), np.nan)
        for i, d in enumerate(days):
            v = self.value(station_id, d, pollutant)
            if v is not None:
                vals[i] = v
        return days, vals

    def zone_daily_mean(self, pollutant: str, zone: ActivityZone) -> tuple[list[date], np.ndarray]:
        """Per-day mean over the zone's stations (NaN when no station reports)."""
        members = self.stations_in_zone(zone)
        days = list(self.date_range.days())
        vals = np.full(len(days), np.nan)
        for i, d in enumerate(days):
            present = [
                v for st in members
                if (v := self.value(st.id, d, pollutant)) is not None
            ]
            if present:
                vals[i] = sum(present) / len(present)
        return days, vals


IsoWeek = tuple[int, int]


def iso_week_of(day: date) -> IsoWeek:
    iso = day.isocalendar()
    return (iso[0], iso[1])


def iso_weeks_in(date_range: DateRange) -> list[IsoWeek]:
    """ISO weeks intersecting the range, in chronological order."""
    weeks: list[IsoWeek] = []
    seen = set()
    for d in date_range.days():
        wk = iso_week_of(d)
        if wk not in seen:
            seen.add(wk)
            weeks.append(wk)
    return weeks


def week_dates(week: IsoWeek) -> list[date]:
    year, number = week
    return [date.fromisocalendar(year, number, dow) for dow in range(1, 8)]


def weekly_average(
    panel: StationPanel, pollutant: str, station_id: str
) -> list[tuple[IsoWeek, Optional[float]]]:
    """Mean of the present daily values per ISO week.

    Emits every ISO week intersecting the panel range; weeks with no present
    value carry None.
    """
    panel.station(station_id)
    sums: dict[IsoWeek, float] = {}
    counts: dict[IsoWeek, int] = {}
    order = iso_weeks_in(panel.date_range)
    for d in panel.date_range.days():
        v = panel.value(station_id, d, pollutant)
        if v is not None:
            wk = iso_week_of(d)
            sums[wk] = sums.get(wk, 0.0) + v
            counts[wk] = counts.get(wk, 0) + 1
    return [
        (wk, sums[wk] / counts[wk] if counts.get(wk) else None)
        for wk in order
    ]


def weekly_cross_section(
    panel: StationPanel, pollutant: str, week: IsoWeek
) -> list[tuple[StationMeta, float]]:
    """Per-station weekly means for one ISO week, skipping empty stations."""
    out: list[tuple[StationMeta, float]] = []
    days = [d for d in week_dates(week) if d in panel.date_range]
    for st in panel.stations:
        present = [
            v for d in days
            if (v := panel.value(st.id, d, pollutant)) is not None
        ]
        if present:
            out.append((st, sum(present) / len(present)))
    return out


@dataclass(frozen=True)
class DescriptiveSummary:
    minimum: float
    q1: float
    median: float
    mean: float
    q3: float
    maximum: float
    mode: float
    sd: float
    skewness_pearson1: float
    excess_kurtosis: float
    ci95_mean: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "minimum": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "mean": self.mean,
            "q3": self.q3,
            "maximum": self.maximum,
            "mode": self.mode,
            "sd": self.sd,
            "skewness_pearson1": self.skewness_pearson1,
            "excess_kurtosis": self.excess_kurtosis,
            "ci95_mean": list(self.ci95_mean),
        }


def binned_mode(values: Sequence[float], bin_width: float) -> float:
    """Center of the densest histogram bin.

    Bins are centered on integer multiples of ``bin_width`` so the estimate
    scales with the data; count ties go to the lower bin. Values exactly on
    a bin edge join the upper bin.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    v = np.asarray(values, dtype=float)
    idx = np.floor(v / bin_width + 0.5).astype(np.int64)
    bins, counts = np.unique(idx, return_counts=True)
    return float(bins[int(np.argmax(counts))]) * bin_width


def pearson_skewness(mean: float, mode: float, sd: float) -> float:
    """Pearson's first skewness coefficient, (mean - mode) / sd."""
    if sd <= 0:
        raise ZeroVarianceError("skewness is undefined when sd is zero")
    return (mean - mode) / sd


def descriptive_summary(values: Sequence[float], mode_bin_width: float = 5.0) -> DescriptiveSummary:
    """Descriptive summary of a sample of concentrations.

    Quartiles use linear interpolation of order statistics; the mode is the
    center of the densest histogram bin of width ``mode_bin_width``; the
    95% CI of the mean uses the normal approximation.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise TooFewValuesError(f"need at least 2 values, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must all be finite")
    q1, median, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    mean = float(v.mean())
    sd = float(v.std(ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("all values are equal; skewness is undefined")
    mode = binned_mode(v, mode_bin_width)
    centered = v - mean
    m2 = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    half = 1.96 * sd / math.sqrt(v.size)
    return DescriptiveSummary(
        minimum=float(v.min()),
        q1=float(q1),
        median=float(median),
        mean=mean,
        q3=float(q3),
        maximum=float(v.max()),
        mode=mode,
        sd=sd,
        skewness_pearson1=pearson_skewness(mean, mode, sd),
        excess_kurtosis=m4 / m2**2 - 3.0,
        ci95_mean=(mean - half, mean + half),
    )
