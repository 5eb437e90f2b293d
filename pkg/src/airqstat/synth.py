"""Seeded synthetic panel generator.

Produces a station panel with planted seasonality, a mild secular trend,
spatially correlated weekly fields (simulated from a spherical covariance),
correlated covariate pollutants, random missingness, and an additive
lockdown effect per activity zone, so every paper-shaped report table can
be checked against planted truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping

import numpy as np

from .io import write_observations_csv, write_stations_csv
from .model import (
    ActivityZone,
    DateRange,
    Observation,
    Period,
    PeriodSpec,
    Season,
    StationMeta,
    StationPanel,
    iso_week_of,
    period_of,
    season_of,
)

_ZONE_COUNTS = (
    (ActivityZone.TRANSPORT, 3),
    (ActivityZone.RESIDENTIAL, 5),
    (ActivityZone.COMMERCIAL, 3),
    (ActivityZone.INSTITUTIONAL, 5),
)


def _default_season_multipliers() -> dict[Season, float]:
    return {
        Season.WINTER: 1.6,
        Season.SPRING: 1.0,
        Season.SUMMER: 0.7,
        Season.MONSOON: 0.55,
    }


def _default_did_effects() -> dict[ActivityZone, float]:
    return {
        ActivityZone.TRANSPORT: -8.0,
        ActivityZone.RESIDENTIAL: -0.5,
        ActivityZone.COMMERCIAL: -2.5,
        ActivityZone.INSTITUTIONAL: -1.5,
    }


@dataclass(frozen=True)
class SynthConfig:
    n_stations: int = 38
    start: date = date(2019, 1, 1)
    end: date = date(2020, 12, 31)
    seed: int = 42
    # lon_min, lon_max, lat_min, lat_max (roughly the Delhi bounding box)
    bbox: tuple[float, float, float, float] = (76.85, 77.35, 28.40, 28.88)
    base_level: float = 95.0
    season_multipliers: Mapping[Season, float] = field(default_factory=_default_season_multipliers)
    trend_per_year: float = -0.05
    spatial_sill: float = 180.0
    spatial_range: float = 0.25
    spatial_nugget: float = 15.0
    noise_sd: float = 7.0
    lockdown_shift: float = -18.0
    did_effects: Mapping[ActivityZone, float] = field(default_factory=_default_did_effects)
    missing_rate: float = 0.015


def _spatial_cov(dist: np.ndarray, sill: float, nugget: float, rng_deg: float) -> np.ndarray:
    hr = np.minimum(dist / rng_deg, 1.0)
    gamma = nugget + (sill - nugget) * (1.5 * hr - 0.5 * hr**3)
    gamma[dist == 0.0] = 0.0
    return sill - gamma


def synth_stations(config: SynthConfig, rng: np.random.Generator) -> list[StationMeta]:
    lon_min, lon_max, lat_min, lat_max = config.bbox
    coords: list[tuple[float, float]] = []
    while len(coords) < config.n_stations:
        lon = float(rng.uniform(lon_min, lon_max))
        lat = float(rng.uniform(lat_min, lat_max))
        if all(abs(lon - a) + abs(lat - b) > 1e-3 for a, b in coords):
            coords.append((lon, lat))
    zones: list[ActivityZone] = []
    for zone, count in _ZONE_COUNTS:
        zones.extend([zone] * count)
    zones.extend([ActivityZone.UNCLASSIFIED] * (config.n_stations - len(zones)))
    stations = []
    for i, ((lon, lat), zone) in enumerate(zip(coords, zones[: config.n_stations]), start=1):
        stations.append(
            StationMeta(
                id=f"S{i:02d}",
                name=f"Station {i:02d} ({zone.value})",
                lat=round(lat, 6),
                lon=round(lon, 6),
                zone=zone,
            )
        )
    return stations


def synth_panel(config: SynthConfig = SynthConfig()) -> StationPanel:
    """Deterministic panel for the given config (single seeded generator)."""
    rng = np.random.default_rng(config.seed)
    stations = synth_stations(config, rng)
    n = len(stations)
    lon = np.array([st.lon for st in stations])
    lat = np.array([st.lat for st in stations])
    diff = np.stack([lon, lat], axis=1)
    dist = np.sqrt(((diff[:, None, :] - diff[None, :, :]) ** 2).sum(axis=2))
    cov = _spatial_cov(dist, config.spatial_sill, config.spatial_nugget, config.spatial_range)
    chol = np.linalg.cholesky(cov + 1e-9 * np.eye(n))

    # smooth static base field so weekly cross-sections stay autocorrelated
    base = config.base_level + 0.12 * config.base_level / np.sqrt(config.spatial_sill) * (
        chol @ rng.standard_normal(n)
    )
    base = np.maximum(base, 25.0)

    days = list(DateRange(config.start, config.end).days())
    weeks = sorted({iso_week_of(d) for d in days})
    weekly_field = {wk: chol @ rng.standard_normal(n) for wk in weeks}

    periods = PeriodSpec.default()
    zone_effect = np.array([config.did_effects.get(st.zone, 0.0) for st in stations])
    n_days = len(days)
    year_fraction = np.array([(d - config.start).days / 365.25 for d in days])
    season_mult = np.array([config.season_multipliers[season_of(d)] for d in days])
    in_dl = np.array([period_of(d, periods) is Period.DL for d in days])

    noise = rng.normal(0.0, config.noise_sd, size=(n_days, n))
    pm25 = (
        base[None, :] * season_mult[:, None] * (1.0 + config.trend_per_year * year_fraction[:, None])
        + np.stack([weekly_field[iso_week_of(d)] for d in days])
        + noise
    )
    pm25 = pm25 + in_dl[:, None] * (config.lockdown_shift + zone_effect[None, :])
    pm25 = np.maximum(pm25, 0.5)

    pm10 = np.maximum(pm25 * 1.75 + rng.normal(0, 6.0, pm25.shape), 0.5)
    no2 = np.maximum(18.0 + 0.18 * pm25 + rng.normal(0, 3.0, pm25.shape), 0.2)
    no = np.maximum(0.55 * no2 + rng.normal(0, 2.0, pm25.shape), 0.1)
    nox = np.maximum(no + no2 + rng.normal(0, 2.0, pm25.shape), 0.2)
    co = np.maximum(0.8 + 0.008 * pm25 + rng.normal(0, 0.12, pm25.shape), 0.05)
    aqi = np.maximum(20.0 + 0.85 * pm25 + 0.12 * pm10 + rng.normal(0, 5.0, pm25.shape), 1.0)
    columns = {"no": no, "no2": no2, "nox": nox, "co": co, "pm10": pm10, "pm25": pm25, "aqi": aqi}

    drop = rng.random((n_days, n, len(columns))) < config.missing_rate
    # a planted multi-week outage, in the style of real archives
    gap_station = min(5, n - 1)
    gap_start = min(100, n_days - 1)
    gap_end = min(gap_start + 14, n_days)
    observations = []
    pollutant_names = list(columns)
    for di, d in enumerate(days):
        for si, st in enumerate(stations):
            values = {}
            for pi, p in enumerate(pollutant_names):
                if drop[di, si, pi]:
                    values[p] = None
                elif si == gap_station and p == "pm25" and gap_start <= di < gap_end:
                    values[p] = None
                else:
                    values[p] = round(float(columns[p][di, si]), 4)
            observations.append(Observation(station_id=st.id, date=d, values=values))
    return StationPanel(
        stations=tuple(stations),
        observations=tuple(observations),
        date_range=DateRange(config.start, config.end),
    )


def write_fixture(config: SynthConfig, out_dir: str | Path) -> tuple[Path, Path]:
    """Write stations.csv and observations.csv for the synthetic panel."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    panel = synth_panel(config)
    stations_path = out / "stations.csv"
    observations_path = out / "observations.csv"
    write_stations_csv(stations_path, panel.stations)
    write_observations_csv(observations_path, panel.observations)
    return stations_path, observations_path
