"""CSV ingestion and file output helpers.

Stations file: header ``id,name,lat,lon,zone``. Observations file: header
``station_id,date,no,no2,nox,co,pm10,pm25,aqi`` with ISO dates and empty
fields for missing readings.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

from .errors import SchemaError
from .model import (
    POLLUTANTS,
    ActivityZone,
    DateRange,
    Observation,
    StationMeta,
    StationPanel,
)

STATIONS_HEADER = ["id", "name", "lat", "lon", "zone"]
OBSERVATIONS_HEADER = ["station_id", "date"] + list(POLLUTANTS)


@dataclass(frozen=True)
class IngestReport:
    n_stations: int
    n_observations: int
    start: date
    end: date
    missing: dict[str, int]
    present: dict[str, int]

    def to_dict(self) -> dict:
        total = {p: self.missing[p] + self.present[p] for p in POLLUTANTS}
        return {
            "n_stations": self.n_stations,
            "n_observations": self.n_observations,
            "date_range": {"start": self.start.isoformat(), "end": self.end.isoformat()},
            "missingness": {
                p: {
                    "missing": self.missing[p],
                    "present": self.present[p],
                    "fraction_missing": (self.missing[p] / total[p]) if total[p] else 0.0,
                }
                for p in POLLUTANTS
            },
        }


def _parse_float(text: str, what: str, line: int, problems: list) -> Optional[float]:
    try:
        value = float(text)
    except ValueError:
        problems.append((line, f"{what}: not a number: {text!r}"))
        return None
    if not math.isfinite(value):
        problems.append((line, f"{what}: must be finite"))
        return None
    return value


def _content_rows(reader):
    """(line number, row) pairs, skipping blank and ``#`` comment lines."""
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        yield reader.line_num, row


def read_stations_csv(path: str | Path) -> list[StationMeta]:
    problems: list[tuple[int, str]] = []
    stations: list[StationMeta] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = _content_rows(reader)
        try:
            _, header = next(rows)
        except StopIteration:
            raise SchemaError(f"{path}: empty stations file", lines=(1,)) from None
        if [h.strip().lower() for h in header] != STATIONS_HEADER:
            raise SchemaError(
                f"{path}: expected header {','.join(STATIONS_HEADER)}", lines=(1,)
            )
        for lineno, row in rows:
            if len(row) != len(STATIONS_HEADER):
                problems.append((lineno, f"expected {len(STATIONS_HEADER)} fields, got {len(row)}"))
                continue
            sid, name, lat_s, lon_s, zone_s = (cell.strip() for cell in row)
            if not sid:
                problems.append((lineno, "empty station id"))
                continue
            if sid in seen:
                problems.append((lineno, f"duplicate station id {sid!r}"))
                continue
            lat = _parse_float(lat_s, "lat", lineno, problems)
            lon = _parse_float(lon_s, "lon", lineno, problems)
            try:
                zone = ActivityZone.parse(zone_s)
            except ValueError as exc:
                problems.append((lineno, str(exc)))
                continue
            if lat is None or lon is None:
                continue
            try:
                stations.append(StationMeta(id=sid, name=name, lat=lat, lon=lon, zone=zone))
            except ValueError as exc:
                problems.append((lineno, str(exc)))
                continue
            seen.add(sid)
    if problems:
        raise SchemaError(_format_problems(path, problems), lines=[ln for ln, _ in problems])
    if not stations:
        raise SchemaError(f"{path}: no stations found", lines=(1,))
    return stations


def read_observations_csv(path: str | Path, stations: Sequence[StationMeta]) -> list[Observation]:
    known = {st.id for st in stations}
    problems: list[tuple[int, str]] = []
    observations: list[Observation] = []
    seen: set[tuple[str, date]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = _content_rows(reader)
        try:
            _, header = next(rows)
        except StopIteration:
            raise SchemaError(f"{path}: empty observations file", lines=(1,)) from None
        if [h.strip().lower() for h in header] != OBSERVATIONS_HEADER:
            raise SchemaError(
                f"{path}: expected header {','.join(OBSERVATIONS_HEADER)}", lines=(1,)
            )
        for lineno, row in rows:
            if len(row) != len(OBSERVATIONS_HEADER):
                problems.append((lineno, f"expected {len(OBSERVATIONS_HEADER)} fields, got {len(row)}"))
                continue
            sid = row[0].strip()
            if sid not in known:
                problems.append((lineno, f"unknown station {sid!r}"))
                continue
            try:
                day = date.fromisoformat(row[1].strip())
            except ValueError:
                problems.append((lineno, f"bad date {row[1]!r}"))
                continue
            if (sid, day) in seen:
                problems.append((lineno, f"duplicate observation for ({sid!r}, {day})"))
                continue
            values: dict[str, Optional[float]] = {}
            bad = False
            for pollutant, cell in zip(POLLUTANTS, row[2:]):
                cell = cell.strip()
                if not cell:
                    values[pollutant] = None
                    continue
                parsed = _parse_float(cell, pollutant, lineno, problems)
                if parsed is None:
                    bad = True
                    break
                if parsed < 0:
                    problems.append((lineno, f"{pollutant}: must be >= 0"))
                    bad = True
                    break
                values[pollutant] = parsed
            if bad:
                continue
            observations.append(Observation(station_id=sid, date=day, values=values))
            seen.add((sid, day))
    if problems:
        raise SchemaError(_format_problems(path, problems), lines=[ln for ln, _ in problems])
    if not observations:
        raise SchemaError(f"{path}: no observations found", lines=(1,))
    return observations


def _format_problems(path, problems) -> str:
    head = "; ".join(f"line {ln}: {msg}" for ln, msg in problems[:20])
    more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
    return f"{path}: {head}{more}"


def load_panel(stations_path: str | Path, observations_path: str | Path) -> tuple[StationPanel, IngestReport]:
    """Read both files and return a validated panel plus an ingest report."""
    stations = read_stations_csv(stations_path)
    observations = read_observations_csv(observations_path, stations)
    start = min(o.date for o in observations)
    end = max(o.date for o in observations)
    panel = StationPanel(
        stations=tuple(stations),
        observations=tuple(observations),
        date_range=DateRange(start, end),
    )
    missing = {p: 0 for p in POLLUTANTS}
    present = {p: 0 for p in POLLUTANTS}
    for obs in observations:
        for p in POLLUTANTS:
            if obs.value(p) is None:
                missing[p] += 1
            else:
                present[p] += 1
    report = IngestReport(
        n_stations=len(stations),
        n_observations=len(observations),
        start=start,
        end=end,
        missing=missing,
        present=present,
    )
    return panel, report


def write_stations_csv(
    path: str | Path, stations: Sequence[StationMeta], meta: Optional[dict] = None
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if meta:
            fh.write(_meta_comment(meta) + "\n")
        writer = csv.writer(fh)
        writer.writerow(STATIONS_HEADER)
        for st in stations:
            writer.writerow([st.id, st.name, f"{st.lat:.6f}", f"{st.lon:.6f}", st.zone.value])


def write_observations_csv(
    path: str | Path, observations: Sequence[Observation], meta: Optional[dict] = None
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if meta:
            fh.write(_meta_comment(meta) + "\n")
        writer = csv.writer(fh)
        writer.writerow(OBSERVATIONS_HEADER)
        for obs in observations:
            row = [obs.station_id, obs.date.isoformat()]
            for p in POLLUTANTS:
                v = obs.value(p)
                row.append("" if v is None else f"{v:.4f}")
            writer.writerow(row)


def _meta_comment(meta: dict) -> str:
    return "# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta))


def write_grid_csv(path: str | Path, field: Sequence[tuple[float, float, float]], meta: dict) -> None:
    """Row-major grid CSV with a leading ``#`` metadata comment line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_meta_comment(meta) + "\n")
        fh.write("lon,lat,value\n")
        for lon, lat, value in field:
            fh.write(f"{lon:.6f},{lat:.6f},{value:.10g}\n")


def write_grid_geojson(path: str | Path, field: Sequence[tuple[float, float, float]], meta: dict) -> None:
    collection = {
        "type": "FeatureCollection",
        "meta": meta,
        "features": [
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [round(lon, 6), round(lat, 6)]},
                "properties": {"value": value},
            }
            for lon, lat, value in field
        ],
    }
    write_json(path, collection)


def write_json(path: str | Path, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
