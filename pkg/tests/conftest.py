from datetime import date, timedelta

import numpy as np
import pytest

from airqstat.model import (
    ActivityZone,
    DateRange,
    Observation,
    StationMeta,
    StationPanel,
    season_of,
)


def make_station(sid="s1", lat=28.5, lon=77.0, zone=ActivityZone.UNCLASSIFIED, name=None):
    return StationMeta(id=sid, name=name or sid, lat=lat, lon=lon, zone=zone)


def make_panel(stations, values_by_station, start, pollutant="pm25"):
    """Panel from per-station daily value lists (None = missing)."""
    n_days = max(len(v) for v in values_by_station.values())
    observations = []
    for sid, series in values_by_station.items():
        for i, value in enumerate(series):
            observations.append(
                Observation(
                    station_id=sid,
                    date=start + timedelta(days=i),
                    values={pollutant: value},
                )
            )
    return StationPanel(
        stations=tuple(stations),
        observations=tuple(observations),
        date_range=DateRange(start, start + timedelta(days=n_days - 1)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def seasonal_multipliers():
    from airqstat.model import Season

    return {
        Season.WINTER: 1.6,
        Season.SPRING: 1.0,
        Season.SUMMER: 0.7,
        Season.MONSOON: 0.7,
    }


def multiplicative_panel(multipliers, start=date(2018, 1, 1), end=date(2020, 12, 31), base=100.0):
    """Single-station flat-trend series driven by per-season multipliers."""
    st = make_station("s1", zone=ActivityZone.TRANSPORT)
    observations = []
    d = start
    while d <= end:
        observations.append(
            Observation("s1", d, {"pm25": base * multipliers[season_of(d)]})
        )
        d += timedelta(days=1)
    return StationPanel((st,), tuple(observations), DateRange(start, end))
