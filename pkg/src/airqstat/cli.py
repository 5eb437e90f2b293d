"""Batch command-line frontend: ingestion, Moran screening, interpolation,
intervention estimation, and the combined report.

Exit codes: 0 success, 2 input schema, 3 statistical precondition,
4 gating or data availability. Every output file embeds the seed, a hash
of the resolved configuration, and the tool version, so identical inputs,
config, and seed reproduce byte-identical outputs.

Period windows are configured by dates; week labels always mean ISO-8601
weeks (``2019-W20``), which only approximates any other week numbering.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import (
    AirqstatError,
    EmptyCellError,
    InsufficientCoverageError,
    NoDataError,
    SchemaError,
    SchemaMismatchError,
    UnknownStationError,
)
from .forest import FeatureRow, ForestConfig, RfkPredictor
from .geometry import SpatialSample
from .interpolation import (
    CvConfig,
    DEFAULT_POWER_GRID,
    GridSpec,
    IdwParams,
    IdwPredictor,
    OkPredictor,
    grid_interpolate,
    idw_select_power,
    kfold_cv,
)
from .intervention import did_by_zone
from .io import (
    load_panel,
    write_grid_csv,
    write_grid_geojson,
    write_json,
    write_observations_csv,
    write_stations_csv,
)
from .model import (
    POLLUTANTS,
    ActivityZone,
    DateRange,
    IsoWeek,
    Period,
    PeriodSpec,
    Season,
    StationPanel,
    descriptive_summary,
    iso_weeks_in,
    period_of,
    season_of,
    week_dates,
    weekly_cross_section,
)
from .spatial import InverseDistance, KNearest, build_weights, morans_test
from .synth import SynthConfig, synth_panel
from .timeseries import average_declination, mann_kendall, seasonal_influence
from .variogram import FAMILIES

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_STATISTICAL = 3
EXIT_AVAILABILITY = 4

_SEASON_ORDER = (Season.WINTER, Season.SPRING, Season.SUMMER, Season.MONSOON)


class GatingError(AirqstatError):
    """The requested week failed the spatial-autocorrelation gate."""


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, (SchemaError, UnknownStationError, SchemaMismatchError, ValueError)):
        return EXIT_SCHEMA
    if isinstance(exc, (NoDataError, InsufficientCoverageError, EmptyCellError, GatingError)):
        return EXIT_AVAILABILITY
    return EXIT_STATISTICAL


# --- configuration ----------------------------------------------------------

DEFAULTS = {
    "pollutant": "pm25",
    "seed": "0",
    "out_dir": ".",
    "metric": "planar",
    "moran_scheme": "idw",
    "moran_power": "1.0",
    "moran_cutoff_km": "50.0",
    "moran_k": "5",
    "permutations": "999",
    "method": "auto",
    "power": "auto",
    "family": "spherical",
    "n_bins": "12",
    "max_dist_fraction": "0.5",
    "cv_k": "10",
    "ntree": "1000",
    "min_leaf": "5",
    "grid_cell": "0.01",
    "zones": "transport,residential,commercial,institutional",
    "bl": "2019-03-17:2019-06-29",
    "dl": "2020-03-22:2020-06-27",
    "al": "2020-06-28:2020-08-29",
    "n_stations": "38",
    "start": "2019-01-01",
    "end": "2020-12-31",
}

_OPTIONAL_KEYS = ("mtry", "max_depth", "lon_min", "lon_max", "lat_min", "lat_max")


def load_config_file(path: str | Path) -> dict[str, str]:
    """Line-oriented ``key = value`` config; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class RunConfig:
    """Resolved settings: flags override the config file, which overrides
    the built-in defaults."""

    command: str
    settings: dict[str, str]

    def get(self, key: str) -> Optional[str]:
        return self.settings.get(key)

    def require(self, key: str) -> str:
        value = self.settings.get(key)
        if value is None:
            raise ValueError(f"missing required setting {key!r} (flag --{key.replace('_', '-')})")
        return value

    def get_int(self, key: str) -> int:
        return int(self.require(key))

    def get_float(self, key: str) -> float:
        return float(self.require(key))

    def opt_int(self, key: str) -> Optional[int]:
        value = self.settings.get(key)
        return None if value in (None, "") else int(value)

    def opt_float(self, key: str) -> Optional[float]:
        value = self.settings.get(key)
        return None if value in (None, "") else float(value)

    @property
    def seed(self) -> int:
        return self.get_int("seed")

    def hash(self) -> str:
        payload = {k: v for k, v in sorted(self.settings.items()) if k != "out_dir"}
        payload["command"] = self.command
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
        return digest[:12]

    def meta(self) -> dict:
        return {"seed": self.seed, "config_hash": self.hash(), "version": __version__}


def resolve_config(args: argparse.Namespace, command: str) -> RunConfig:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "func", "command"):
            continue
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        settings[key] = str(value)
    for key in _OPTIONAL_KEYS:
        settings.setdefault(key, "")
    return RunConfig(command=command, settings=settings)


def _parse_week(text: str) -> IsoWeek:
    try:
        year_s, week_s = text.upper().split("-W")
        return (int(year_s), int(week_s))
    except Exception:
        raise ValueError(f"week must look like 2019-W20, got {text!r}") from None


def _parse_range(text: str) -> DateRange:
    try:
        start_s, end_s = text.split(":")
        return DateRange(date.fromisoformat(start_s), date.fromisoformat(end_s))
    except AirqstatError:
        raise
    except Exception:
        raise ValueError(f"date range must look like 2019-03-17:2019-06-29, got {text!r}") from None


def _period_spec(config: RunConfig) -> PeriodSpec:
    return PeriodSpec(
        bl=_parse_range(config.require("bl")),
        dl=_parse_range(config.require("dl")),
        al=_parse_range(config.require("al")),
    )


def _parse_zones(config: RunConfig) -> list[ActivityZone]:
    return [ActivityZone.parse(z) for z in config.require("zones").split(",") if z.strip()]


def _load_panel(config: RunConfig) -> StationPanel:
    panel, _ = load_panel(config.require("stations"), config.require("obs"))
    return panel


def _check_pollutant(config: RunConfig) -> str:
    pollutant = config.require("pollutant")
    if pollutant not in POLLUTANTS:
        raise ValueError(f"pollutant must be one of {POLLUTANTS}, got {pollutant!r}")
    return pollutant


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.require("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _week_seed(seed: int, week: IsoWeek) -> int:
    return seed * 1_000_000 + week[0] * 100 + week[1]


def _moran_weights(config: RunConfig, stations):
    if config.require("moran_scheme") == "knn":
        scheme = KNearest(k=config.get_int("moran_k"))
    elif config.require("moran_scheme") == "idw":
        scheme = InverseDistance(
            power=config.get_float("moran_power"),
            cutoff_km=config.get_float("moran_cutoff_km"),
        )
    else:
        raise ValueError("moran_scheme must be 'idw' or 'knn'")
    return build_weights(stations, scheme)


def _moran_for_week(config: RunConfig, panel: StationPanel, pollutant: str, week: IsoWeek):
    section = weekly_cross_section(panel, pollutant, week)
    if len(section) < 3:
        raise NoDataError(f"week {week[0]}-W{week[1]:02d} has fewer than 3 reporting stations")
    stations = [st for st, _ in section]
    values = [v for _, v in section]
    weights = _moran_weights(config, stations)
    result = morans_test(
        values, weights, config.get_int("permutations"), seed=_week_seed(config.seed, week)
    )
    return section, result


def _forest_config(config: RunConfig, seed: int) -> ForestConfig:
    return ForestConfig(
        ntree=config.get_int("ntree"),
        mtry=config.opt_int("mtry"),
        min_leaf=config.get_int("min_leaf"),
        max_depth=config.opt_int("max_depth"),
        seed=seed,
    )


def _week_label(week: IsoWeek) -> str:
    return f"{week[0]}-W{week[1]:02d}"


def _covariate_names(pollutant: str) -> tuple[str, ...]:
    covars = [p for p in ("no", "no2", "nox", "co", "pm10") if p != pollutant]
    return tuple(covars) + ("east", "north")


def _week_features(
    panel: StationPanel, pollutant: str, week: IsoWeek, section
) -> dict[tuple[float, float], FeatureRow]:
    """Weekly-mean covariates per reporting station."""
    days = [d for d in week_dates(week) if d in panel.date_range]
    features: dict[tuple[float, float], FeatureRow] = {}
    covars = [p for p in ("no", "no2", "nox", "co", "pm10") if p != pollutant]
    for st, _ in section:
        kwargs = {}
        for p in covars:
            values = [v for d in days if (v := panel.value(st.id, d, p)) is not None]
            if values:
                kwargs[p] = sum(values) / len(values)
        features[(st.lon, st.lat)] = FeatureRow(east=st.lon, north=st.lat, **kwargs)
    return features


def _grid_spec(config: RunConfig, samples: Sequence[SpatialSample]) -> GridSpec:
    cell = config.get_float("grid_cell")
    bounds = [config.opt_float(k) for k in ("lon_min", "lon_max", "lat_min", "lat_max")]
    if all(b is not None for b in bounds):
        return GridSpec(bounds[0], bounds[1], bounds[2], bounds[3], cell)
    if any(b is not None for b in bounds):
        raise ValueError("set all four of lon_min/lon_max/lat_min/lat_max or none")
    return GridSpec.around(samples, cell)


def _stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


# --- commands ---------------------------------------------------------------

def cmd_ingest(config: RunConfig) -> int:
    panel, report = load_panel(config.require("stations"), config.require("obs"))
    info = report.to_dict()
    print(f"stations: {info['n_stations']}")
    print(f"observations: {info['n_observations']}")
    print(f"date range: {info['date_range']['start']} .. {info['date_range']['end']}")
    print("missingness:")
    for pollutant in POLLUTANTS:
        row = info["missingness"][pollutant]
        print(
            f"  {pollutant:>5}: {row['missing']:>7} missing / {row['missing'] + row['present']:>7}"
            f" ({100 * row['fraction_missing']:.2f}%)"
        )
    if config.get("out_dir") not in (None, "."):
        out = _out_dir(config)
        write_json(out / "ingest.json", {"meta": config.meta(), "ingest": info})
    return EXIT_OK


def cmd_moran(config: RunConfig) -> int:
    panel = _load_panel(config)
    pollutant = _check_pollutant(config)
    week = _parse_week(config.require("week"))
    section, result = _moran_for_week(config, panel, pollutant, week)
    gated = result.p_value < 0.05
    out = _out_dir(config)
    payload = {
        "meta": config.meta(),
        "week": _week_label(week),
        "pollutant": pollutant,
        "n_stations": len(section),
        "scheme": config.require("moran_scheme"),
        "result": result.to_dict(),
        "gated": gated,
    }
    path = out / f"moran_{_week_label(week)}.json"
    write_json(path, payload)
    print(f"moran I = {result.i_statistic:.4f}, p = {result.p_value:.4f}, gated = {gated}")
    print(f"wrote {path}")
    return EXIT_OK


def _predictors_for(config: RunConfig, method: str, pollutant: str, week: IsoWeek, features):
    metric = config.require("metric")
    n_bins = config.get_int("n_bins")
    max_frac = config.get_float("max_dist_fraction")
    family = config.require("family")
    if method == "idw":
        power = config.require("power")
        return None if power == "auto" else IdwPredictor(IdwParams(power=float(power)), metric)
    if method == "ok":
        return OkPredictor(family=family, n_bins=n_bins, max_dist_fraction=max_frac, metric=metric)
    if method == "rfk":
        return RfkPredictor(
            features,
            config=_forest_config(config, _week_seed(config.seed, week)),
            family=family if family != "auto" else "auto",
            n_bins=n_bins,
            max_dist_fraction=max_frac,
            metric=metric,
            feature_names=_covariate_names(pollutant),
        )
    raise ValueError(f"unknown method {method!r}")


def cmd_interpolate(config: RunConfig) -> int:
    panel = _load_panel(config)
    pollutant = _check_pollutant(config)
    week = _parse_week(config.require("week"))
    method = config.require("method")
    if method not in ("idw", "ok", "rfk", "auto"):
        raise ValueError("method must be idw, ok, rfk, or auto")
    force = config.get("force") == "true"
    try:
        section, moran = _moran_for_week(config, panel, pollutant, week)
    except AirqstatError:
        if not force:
            raise
        # forced runs skip the gate entirely, even when it cannot be computed
        section = weekly_cross_section(panel, pollutant, week)
        if not section:
            raise NoDataError(f"week {_week_label(week)} has no data") from None
        moran = None
    gated = moran is not None and moran.p_value < 0.05
    if not gated and not force:
        raise GatingError(
            f"week {_week_label(week)} is not spatially autocorrelated"
            f" (p = {moran.p_value:.4f}); re-run with --force to interpolate anyway"
        )
    samples = [SpatialSample(st.lon, st.lat, v) for st, v in section]
    features = _week_features(panel, pollutant, week, section)
    out = _out_dir(config)
    cv = CvConfig(k=config.get_int("cv_k"), seed=_week_seed(config.seed, week))
    metric = config.require("metric")
    grid = _grid_spec(config, samples)
    meta = config.meta()
    methods = ("idw", "ok", "rfk") if method == "auto" else (method,)

    accuracy_payload: dict = {
        "meta": meta,
        "week": _week_label(week),
        "pollutant": pollutant,
        "moran": moran.to_dict() if moran is not None else None,
        "gated": gated,
        "cv": {"k": cv.k, "seed": cv.seed},
        "methods": {},
    }
    for m in methods:
        detail: dict = {}
        if m == "idw" and config.require("power") == "auto":
            p_star, per_p = idw_select_power(samples, DEFAULT_POWER_GRID, cv, metric)
            detail["power"] = p_star
            sweep = {
                "meta": meta,
                "week": _week_label(week),
                "pollutant": pollutant,
                "selected_power": p_star,
                "sweep": [{"p": p, "rmse": rmse, "r2": r2} for p, rmse, r2 in per_p],
            }
            write_json(out / "power_sweep.json", sweep)
            predictor = IdwPredictor(IdwParams(power=p_star), metric)
        else:
            predictor = _predictors_for(config, m, pollutant, week, features)
            if m == "idw":
                detail["power"] = float(config.require("power"))
        report = kfold_cv(samples, cv.k, predictor, cv.seed)
        detail["accuracy"] = report.to_dict()
        field = grid_interpolate(samples, grid, predictor)
        # recorded after the grid pass so they describe the full-sample fit
        if m in ("ok", "rfk") and getattr(predictor, "last_fit", None) is not None:
            detail["variogram"] = predictor.last_fit.to_dict()
        if m == "rfk" and getattr(predictor, "last_importance", None) is not None:
            detail["importance"] = predictor.last_importance.to_dict()["importance"]
        suffix = f"_{m}" if method == "auto" else ""
        grid_path = out / f"grid{suffix}.csv"
        write_grid_csv(grid_path, field, meta)
        if config.get("geojson") == "true":
            write_grid_geojson(out / f"grid{suffix}.geojson", field, meta)
        accuracy_payload["methods"][m] = detail
        print(f"{m}: cv rmse = {report.rmse:.4f}, grid -> {grid_path}")
    if method == "auto":
        accuracy_payload["comparison"] = {
            "week": _week_label(week),
            "rmse": {m: accuracy_payload["methods"][m]["accuracy"]["rmse"] for m in methods},
        }
    write_json(out / "accuracy.json", accuracy_payload)
    return EXIT_OK


def _did_rows(config: RunConfig, panel: StationPanel, pollutant: str, zones):
    period = _period_spec(config)
    clustered = config.get("cluster_se") == "true"
    rows = []
    for zone in zones:
        fit = did_by_zone(panel, pollutant, period, zone, cluster_by_station=clustered)
        row = {"zone": zone.value}
        row.update(fit.to_dict())
        row["stars"] = _stars(fit.p_value[3])
        rows.append(row)
    return rows


def _render_did_table(rows) -> str:
    lines = [
        "zone            beta3        se(beta3)    p-value      ",
        "--------------- ------------ ------------ -------------",
    ]
    for row in rows:
        lines.append(
            f"{row['zone']:<15} {row['beta'][3]:>12.4f} {row['se'][3]:>12.4f}"
            f" {row['p'][3]:>12.5g} {row['stars']}"
        )
    lines.append("")
    lines.append("signif: '***' p<0.001, '**' p<0.01, '*' p<0.05, '.' p<0.1")
    return "\n".join(lines) + "\n"


def cmd_did(config: RunConfig) -> int:
    panel = _load_panel(config)
    pollutant = _check_pollutant(config)
    zones = _parse_zones(config)
    rows = _did_rows(config, panel, pollutant, zones)
    out = _out_dir(config)
    payload = {
        "meta": config.meta(),
        "pollutant": pollutant,
        "period": {k: config.require(k) for k in ("bl", "dl", "al")},
        "zones": rows,
    }
    write_json(out / "did.json", payload)
    table = _render_did_table(rows)
    meta = config.meta()
    stamp = " ".join(f"{k}={meta[k]}" for k in sorted(meta))
    (out / "did.txt").write_text(table + f"# {stamp}\n", encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_synth_fixture(config: RunConfig) -> int:
    synth_config = SynthConfig(
        n_stations=config.get_int("n_stations"),
        start=date.fromisoformat(config.require("start")),
        end=date.fromisoformat(config.require("end")),
        seed=config.seed,
    )
    out = _out_dir(config)
    panel = synth_panel(synth_config)
    meta = config.meta()
    stations_path = out / "stations.csv"
    observations_path = out / "observations.csv"
    write_stations_csv(stations_path, panel.stations, meta)
    write_observations_csv(observations_path, panel.observations, meta)
    print(f"wrote {stations_path}")
    print(f"wrote {observations_path}")
    return EXIT_OK


# --- report -----------------------------------------------------------------

def _section(builder, *args):
    try:
        return {"status": "ok", "data": builder(*args)}
    except AirqstatError as exc:
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}


def _report_descriptives(config: RunConfig, panel: StationPanel, pollutant: str) -> dict:
    values = [
        v for obs in panel.observations if (v := obs.value(pollutant)) is not None
    ]
    if not values:
        raise NoDataError(f"no {pollutant} observations")
    return descriptive_summary(values).to_dict()


def _report_seasonal(config: RunConfig, panel: StationPanel, pollutant: str, zones) -> dict:
    years = sorted({d.year for d in (panel.date_range.start, panel.date_range.end)})
    years = list(range(years[0], years[-1] + 1))
    rows = []
    for zone in zones:
        for year in [None] + years:
            label = "all" if year is None else str(year)
            try:
                influence = seasonal_influence(panel, pollutant, zone, year=year)
                rows.append(
                    {
                        "zone": zone.value,
                        "year": label,
                        "status": "ok",
                        "deviations": {s.value: influence.deviations[s] for s in _SEASON_ORDER},
                    }
                )
            except AirqstatError as exc:
                rows.append(
                    {
                        "zone": zone.value,
                        "year": label,
                        "status": "error",
                        "error": f"{type(exc).__name__}: {exc}",
                    }
                )
    if not any(r["status"] == "ok" for r in rows):
        raise NoDataError("no zone/year combination had sufficient coverage")
    return {"rows": rows}


def _report_declination(config: RunConfig, panel: StationPanel, zones) -> dict:
    period = _period_spec(config)
    out: dict = {}
    for pollutant in ("pm25", "pm10", "aqi"):
        row = {}
        for zone in zones:
            before: list[float] = []
            during: list[float] = []
            members = {st.id for st in panel.stations_in_zone(zone)}
            for obs in panel.observations:
                if obs.station_id not in members:
                    continue
                window = period_of(obs.date, period)
                value = obs.value(pollutant)
                if value is None:
                    continue
                if window is Period.BL:
                    before.append(value)
                elif window is Period.DL:
                    during.append(value)
            if before and during:
                row[zone.value] = average_declination(
                    sum(before) / len(before), sum(during) / len(during)
                )
            else:
                row[zone.value] = None
        out[pollutant] = row
    return out


def _report_interpolation(config: RunConfig, panel: StationPanel, pollutant: str) -> dict:
    period = _period_spec(config)
    metric = config.require("metric")
    rows = []
    for week in iso_weeks_in(panel.date_range):
        midweek = date.fromisocalendar(week[0], week[1], 4)
        if period_of(midweek, period) not in (Period.BL, Period.DL):
            continue
        try:
            section, moran = _moran_for_week(config, panel, pollutant, week)
        except AirqstatError as exc:
            rows.append(
                {
                    "week": _week_label(week),
                    "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
            continue
        if moran.p_value >= 0.05:
            rows.append(
                {"week": _week_label(week), "status": "ungated", "p_value": moran.p_value}
            )
            continue
        samples = [SpatialSample(st.lon, st.lat, v) for st, v in section]
        features = _week_features(panel, pollutant, week, section)
        cv = CvConfig(k=config.get_int("cv_k"), seed=_week_seed(config.seed, week))
        rmse = {}
        try:
            for m in ("idw", "ok", "rfk"):
                if m == "idw":
                    predictor = IdwPredictor(IdwParams(power=1.0), metric)
                else:
                    predictor = _predictors_for(config, m, pollutant, week, features)
                rmse[m] = kfold_cv(samples, cv.k, predictor, cv.seed).rmse
        except AirqstatError as exc:
            rows.append(
                {
                    "week": _week_label(week),
                    "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
            continue
        rows.append(
            {
                "week": _week_label(week),
                "status": "ok",
                "p_value": moran.p_value,
                "rmse": rmse,
            }
        )
    if not any(r["status"] == "ok" for r in rows):
        raise NoDataError("no gated week could be interpolated")
    return {"rows": rows}


def _report_did(config: RunConfig, panel: StationPanel, pollutant: str, zones) -> dict:
    return {"rows": _did_rows(config, panel, pollutant, zones)}


def _report_mann_kendall(config: RunConfig, panel: StationPanel, pollutant: str) -> dict:
    rows = []
    for st in panel.stations:
        days, values = panel.daily_series(st.id, pollutant)
        by_season: dict = {}
        for season in _SEASON_ORDER:
            series = [
                values[i] for i, d in enumerate(days) if season_of(d) is season
            ]
            try:
                result = mann_kendall(series)
                by_season[season.value] = result.tau
            except AirqstatError:
                by_season[season.value] = None
        rows.append({"station": st.id, "name": st.name, "tau": by_season})
    return {"rows": rows}


def _render_report_md(payload: dict) -> str:
    lines = [
        "# Air quality report",
        "",
        f"- pollutant: {payload['pollutant']}",
        f"- seed: {payload['meta']['seed']}",
        f"- config hash: {payload['meta']['config_hash']}",
        f"- version: {payload['meta']['version']}",
        "",
    ]
    sections = payload["sections"]

    lines.append("## Descriptive summary")
    sec = sections["descriptives"]
    if sec["status"] == "ok":
        lines.append("")
        lines.append("| statistic | value |")
        lines.append("|---|---|")
        data = sec["data"]
        for key in (
            "minimum", "q1", "median", "mean", "q3", "maximum", "mode", "sd",
            "skewness_pearson1", "excess_kurtosis",
        ):
            lines.append(f"| {key} | {data[key]:.4f} |")
        lo, hi = data["ci95_mean"]
        lines.append(f"| ci95_mean | {lo:.4f} .. {hi:.4f} |")
    else:
        lines.append(f"skipped: {sec['error']}")
    lines.append("")

    lines.append("## Seasonal influence (index - 100)")
    sec = sections["seasonal_influence"]
    if sec["status"] == "ok":
        lines.append("")
        lines.append("| zone | year | winter | spring | summer | monsoon |")
        lines.append("|---|---|---|---|---|---|")
        for row in sec["data"]["rows"]:
            if row["status"] == "ok":
                d = row["deviations"]
                lines.append(
                    f"| {row['zone']} | {row['year']} | {d['winter']:.2f} | {d['spring']:.2f}"
                    f" | {d['summer']:.2f} | {d['monsoon']:.2f} |"
                )
            else:
                lines.append(f"| {row['zone']} | {row['year']} | skipped: {row['error']} | | | |")
    else:
        lines.append(f"skipped: {sec['error']}")
    lines.append("")

    lines.append("## Average declination, BL to DL (%)")
    sec = sections["declination"]
    if sec["status"] == "ok":
        lines.append("")
        zones = list(next(iter(sec["data"].values())).keys())
        lines.append("| component | " + " | ".join(zones) + " |")
        lines.append("|---" * (len(zones) + 1) + "|")
        for pollutant, row in sec["data"].items():
            cells = [
                f"{row[z]:.2f}%" if row[z] is not None else "n/a" for z in zones
            ]
            lines.append(f"| {pollutant} | " + " | ".join(cells) + " |")
    else:
        lines.append(f"skipped: {sec['error']}")
    lines.append("")

    lines.append("## Interpolator comparison (pooled CV RMSE, gated weeks)")
    sec = sections["interpolation"]
    if sec["status"] == "ok":
        lines.append("")
        lines.append("| week | IDW | OK | RFK |")
        lines.append("|---|---|---|---|")
        for row in sec["data"]["rows"]:
            if row["status"] == "ok":
                r = row["rmse"]
                lines.append(
                    f"| {row['week']} | {r['idw']:.3f} | {r['ok']:.3f} | {r['rfk']:.3f} |"
                )
            else:
                lines.append(f"| {row['week']} | {row['status']} | | |")
    else:
        lines.append(f"skipped: {sec['error']}")
    lines.append("")

    lines.append("## Lockdown intervention (difference-in-difference)")
    sec = sections["did"]
    if sec["status"] == "ok":
        lines.append("")
        lines.append("| zone | beta3 | p-value | |")
        lines.append("|---|---|---|---|")
        for row in sec["data"]["rows"]:
            lines.append(
                f"| {row['zone']} | {row['beta'][3]:.4f} | {row['p'][3]:.5g} | {row['stars']} |"
            )
        lines.append("")
        lines.append("signif: '***' p<0.001, '**' p<0.01, '*' p<0.05, '.' p<0.1")
    else:
        lines.append(f"skipped: {sec['error']}")
    lines.append("")

    lines.append("## Mann-Kendall tau per station and season")
    sec = sections["mann_kendall"]
    if sec["status"] == "ok":
        lines.append("")
        lines.append("| station | winter | spring | summer | monsoon |")
        lines.append("|---|---|---|---|---|")
        for row in sec["data"]["rows"]:
            taus = row["tau"]
            cells = [
                f"{taus[s.value]:.4f}" if taus[s.value] is not None else "n/a"
                for s in _SEASON_ORDER
            ]
            lines.append(f"| {row['station']} | " + " | ".join(cells) + " |")
    else:
        lines.append(f"skipped: {sec['error']}")
    lines.append("")
    return "\n".join(lines)


def cmd_report(config: RunConfig) -> int:
    panel = _load_panel(config)
    pollutant = _check_pollutant(config)
    zones = _parse_zones(config)
    sections = {
        "descriptives": _section(_report_descriptives, config, panel, pollutant),
        "seasonal_influence": _section(_report_seasonal, config, panel, pollutant, zones),
        "declination": _section(_report_declination, config, panel, zones),
        "interpolation": _section(_report_interpolation, config, panel, pollutant),
        "did": _section(_report_did, config, panel, pollutant, zones),
        "mann_kendall": _section(_report_mann_kendall, config, panel, pollutant),
    }
    payload = {"meta": config.meta(), "pollutant": pollutant, "sections": sections}
    out = _out_dir(config)
    write_json(out / "report.json", payload)
    (out / "report.md").write_text(_render_report_md(payload), encoding="utf-8")
    ok = sum(1 for sec in sections.values() if sec["status"] == "ok")
    for name, sec in sections.items():
        print(f"section {name}: {sec['status']}")
    print(f"wrote {out / 'report.json'} and {out / 'report.md'}")
    return EXIT_OK if ok >= 1 else EXIT_AVAILABILITY


# --- argument parsing --------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file; flags win")
    parser.add_argument("--stations", help="stations CSV path")
    parser.add_argument("--obs", help="observations CSV path")
    parser.add_argument("--pollutant", help=f"one of {', '.join(POLLUTANTS)} (default pm25)")
    parser.add_argument("--seed", type=int, help="random seed recorded in all outputs")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airqstat",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"airqstat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate input files and report coverage")
    _add_common(p)

    p = sub.add_parser("moran", help="spatial-autocorrelation test for one ISO week")
    _add_common(p)
    p.add_argument("--week", help="ISO week, e.g. 2019-W20")
    p.add_argument("--moran-scheme", dest="moran_scheme", choices=("idw", "knn"))
    p.add_argument("--moran-power", dest="moran_power", type=float)
    p.add_argument("--moran-cutoff-km", dest="moran_cutoff_km", type=float)
    p.add_argument("--moran-k", dest="moran_k", type=int)
    p.add_argument("--permutations", type=int)

    p = sub.add_parser("interpolate", help="grid interpolation + CV accuracy for one week")
    _add_common(p)
    p.add_argument("--week", help="ISO week, e.g. 2019-W20")
    p.add_argument("--method", choices=("idw", "ok", "rfk", "auto"))
    p.add_argument("--power", help="IDW power or 'auto'")
    p.add_argument("--family", help=f"variogram family: auto or one of {', '.join(FAMILIES)}")
    p.add_argument("--metric", choices=("planar", "haversine"))
    p.add_argument("--cv-k", dest="cv_k", type=int)
    p.add_argument("--n-bins", dest="n_bins", type=int)
    p.add_argument("--max-dist-fraction", dest="max_dist_fraction", type=float)
    p.add_argument("--ntree", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-leaf", dest="min_leaf", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--grid-cell", dest="grid_cell", type=float)
    p.add_argument("--lon-min", dest="lon_min", type=float)
    p.add_argument("--lon-max", dest="lon_max", type=float)
    p.add_argument("--lat-min", dest="lat_min", type=float)
    p.add_argument("--lat-max", dest="lat_max", type=float)
    p.add_argument("--moran-scheme", dest="moran_scheme", choices=("idw", "knn"))
    p.add_argument("--moran-power", dest="moran_power", type=float)
    p.add_argument("--moran-cutoff-km", dest="moran_cutoff_km", type=float)
    p.add_argument("--moran-k", dest="moran_k", type=int)
    p.add_argument("--permutations", type=int)
    p.add_argument("--force", action="store_true", default=None,
                   help="interpolate even when the Moran gate fails")
    p.add_argument("--geojson", action="store_true", default=None,
                   help="also write a GeoJSON point collection")

    p = sub.add_parser("did", help="difference-in-difference estimate per zone")
    _add_common(p)
    p.add_argument("--zones", help="comma-separated activity zones")
    p.add_argument("--bl", help="before-lockdown window start:end (ISO dates)")
    p.add_argument("--dl", help="during-lockdown window start:end")
    p.add_argument("--al", help="after-lockdown window start:end")
    p.add_argument("--cluster-se", dest="cluster_se", action="store_true", default=None,
                   help="station-clustered standard errors instead of homoskedastic")

    p = sub.add_parser("report", help="full JSON + markdown bundle")
    _add_common(p)
    p.add_argument("--zones", help="comma-separated activity zones")
    p.add_argument("--bl", help="before-lockdown window start:end (ISO dates)")
    p.add_argument("--dl", help="during-lockdown window start:end")
    p.add_argument("--al", help="after-lockdown window start:end")
    p.add_argument("--metric", choices=("planar", "haversine"))
    p.add_argument("--family", help="variogram family for OK/RFK")
    p.add_argument("--cv-k", dest="cv_k", type=int)
    p.add_argument("--n-bins", dest="n_bins", type=int)
    p.add_argument("--max-dist-fraction", dest="max_dist_fraction", type=float)
    p.add_argument("--ntree", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-leaf", dest="min_leaf", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--moran-scheme", dest="moran_scheme", choices=("idw", "knn"))
    p.add_argument("--moran-power", dest="moran_power", type=float)
    p.add_argument("--moran-cutoff-km", dest="moran_cutoff_km", type=float)
    p.add_argument("--moran-k", dest="moran_k", type=int)
    p.add_argument("--permutations", type=int)

    p = sub.add_parser("synth-fixture", help="write a deterministic synthetic fixture")
    _add_common(p)
    p.add_argument("--n-stations", dest="n_stations", type=int)
    p.add_argument("--start", help="first day (ISO date)")
    p.add_argument("--end", help="last day (ISO date)")

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "moran": cmd_moran,
    "interpolate": cmd_interpolate,
    "did": cmd_did,
    "report": cmd_report,
    "synth-fixture": cmd_synth_fixture,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        config = resolve_config(args, command)
        return _COMMANDS[command](config)
    except AirqstatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if isinstance(exc, SchemaError) and exc.lines:
            print(f"offending lines: {', '.join(str(n) for n in exc.lines[:20])}", file=sys.stderr)
        return _exit_code_for(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
