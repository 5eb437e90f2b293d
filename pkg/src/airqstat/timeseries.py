"""Autocorrelation, additive decomposition, seasonal indices, the
Mann-Kendall trend test, and the lockdown declination percentage."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AllTiedError,
    InsufficientCoverageError,
    LagTooLargeError,
    MissingDataError,
    NoDataError,
    NonPositiveBaselineError,
    SeriesTooShortError,
    ZeroVarianceError,
)
from .model import ActivityZone, Season, StationPanel, season_of


def _to_float_array(series: Sequence, allow_missing: bool = True) -> np.ndarray:
    vals = np.array(
        [np.nan if v is None else float(v) for v in series], dtype=float
    )
    if not allow_missing and np.isnan(vals).any():
        raise MissingDataError("series has gaps; a gap-free window is required")
    return vals


@dataclass(frozen=True)
class AcfResult:
    lags: tuple[int, ...]
    acf: tuple[float, ...]


def acf(series: Sequence[Optional[float]], max_lag: int) -> AcfResult:
    """Sample autocorrelation with biased (lag-0 sum) normalization.

    Missing values are dropped pairwise: lag k uses only the t where both
    y_t and y_{t+k} are present, while the mean and the denominator use all
    present values.
    """
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    y = _to_float_array(series)
    n = y.size
    if n <= max_lag:
        raise LagTooLargeError(f"series length {n} must exceed max_lag {max_lag}")
    present = np.isfinite(y)
    if present.sum() < 2:
        raise ZeroVarianceError("fewer than 2 present values")
    mean = y[present].mean()
    z = np.where(present, y - mean, 0.0)
    denom = float(np.sum(z[present] ** 2))
    if denom == 0.0:
        raise ZeroVarianceError("series has zero variance")
    values = [1.0]
    for k in range(1, max_lag + 1):
        both = present[:-k] & present[k:]
        num = float(np.sum(z[:-k][both] * z[k:][both]))
        values.append(num / denom)
    return AcfResult(lags=tuple(range(max_lag + 1)), acf=tuple(values))


@dataclass(frozen=True)
class DecompositionResult:
    """Additive decomposition; trend and remainder are NaN where the
    centered moving average is undefined (series edges)."""

    trend: np.ndarray
    seasonal: np.ndarray
    remainder: np.ndarray
    period: int


def centered_moving_average(values: np.ndarray, period: int) -> np.ndarray:
    """Centered MA of window ``period`` (2 x period when even); NaN at edges."""
    if period % 2 == 0:
        weights = np.full(period + 1, 1.0 / period)
        weights[0] = weights[-1] = 0.5 / period
    else:
        weights = np.full(period, 1.0 / period)
    core = np.convolve(values, weights, mode="valid")
    half = (len(weights) - 1) // 2
    out = np.full(values.size, np.nan)
    out[half : half + core.size] = core
    return out


def decompose_additive(series: Sequence[float], period: int) -> DecompositionResult:
    """Split a gap-free series into trend + seasonal + remainder.

    The reconstruction identity y = T + S + R holds exactly wherever the
    trend is defined.
    """
    if period < 2:
        raise ValueError("period must be >= 2")
    y = _to_float_array(series, allow_missing=False)
    if y.size < 2 * period:
        raise SeriesTooShortError(
            f"series length {y.size} must be at least 2 x period ({2 * period})"
        )
    trend = centered_moving_average(y, period)
    detrended = y - trend
    phases = np.arange(y.size) % period
    means = np.empty(period)
    for ph in range(period):
        vals = detrended[phases == ph]
        means[ph] = np.nanmean(vals)
    means -= means.mean()
    seasonal = means[phases]
    remainder = y - trend - seasonal
    return DecompositionResult(trend=trend, seasonal=seasonal, remainder=remainder, period=period)


_SEASON_ORDER = (Season.WINTER, Season.SPRING, Season.SUMMER, Season.MONSOON)


@dataclass(frozen=True)
class SeasonalInfluence:
    """Per-season deviation of the seasonal index from 100.

    Indices are normalized so their ratio-count-weighted mean is exactly
    100, making the weighted deviations sum to zero.
    """

    deviations: dict[Season, float]
    ratio_counts: dict[Season, int]

    def index(self, season: Season) -> float:
        return self.deviations[season] + 100.0

    def to_dict(self) -> dict:
        return {s.value: self.deviations[s] for s in _SEASON_ORDER}


def seasonal_influence(
    panel: StationPanel,
    pollutant: str,
    zone: ActivityZone,
    year: Optional[int] = None,
    window_days: int = 365,
    min_coverage: float = 0.9,
) -> SeasonalInfluence:
    """Ratio-to-moving-average seasonal indices for a zone's daily mean.

    The zone-mean daily series is divided by a centered moving average of
    ``window_days`` (full annual cycle), ratios are scaled by 100, the
    per-season medians are taken, and the indices are renormalized to a
    weighted mean of 100. ``year`` restricts ratios to one calendar year;
    None pools every defined ratio, which is the only option that covers
    all four seasons on a panel just two cycles long.
    """
    if window_days < 3 or window_days % 2 == 0:
        raise ValueError("window_days must be odd and >= 3")
    members = panel.stations_in_zone(zone)
    if not members:
        raise NoDataError(f"no stations in zone {zone.value}")
    days, values = panel.zone_daily_mean(pollutant, zone)
    if not np.isfinite(values).any():
        raise NoDataError(f"zone {zone.value} has no {pollutant} data")

    half = window_days // 2
    present = np.isfinite(values).astype(float)
    filled = np.where(np.isfinite(values), values, 0.0)
    kernel = np.ones(window_days)
    sums = np.convolve(filled, kernel, mode="valid")
    counts = np.convolve(present, kernel, mode="valid")
    cma = np.full(values.size, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        core = np.where(counts >= min_coverage * window_days, sums / counts, np.nan)
    cma[half : half + core.size] = core

    ratios: dict[Season, list[float]] = {s: [] for s in _SEASON_ORDER}
    for i, d in enumerate(days):
        if year is not None and d.year != year:
            continue
        if np.isfinite(values[i]) and np.isfinite(cma[i]) and cma[i] > 0:
            ratios[season_of(d)].append(100.0 * values[i] / cma[i])
    empty = [s.value for s in _SEASON_ORDER if not ratios[s]]
    if empty:
        scope = f"year {year}" if year is not None else "the panel"
        raise InsufficientCoverageError(
            f"no defined moving-average ratios for {', '.join(empty)} in {scope}"
        )
    indices = {s: float(np.median(ratios[s])) for s in _SEASON_ORDER}
    counts_by_season = {s: len(ratios[s]) for s in _SEASON_ORDER}
    total = sum(counts_by_season.values())
    weighted_mean = sum(indices[s] * counts_by_season[s] for s in _SEASON_ORDER) / total
    deviations = {s: indices[s] * 100.0 / weighted_mean - 100.0 for s in _SEASON_ORDER}
    return SeasonalInfluence(deviations=deviations, ratio_counts=counts_by_season)


@dataclass(frozen=True)
class MkResult:
    s_statistic: int
    tau: float
    variance: float
    z: float
    p_value: float


def mann_kendall(series: Sequence[Optional[float]]) -> MkResult:
    """Mann-Kendall trend test with tau-b ties handling.

    Uses the tie-corrected variance and a +/-1 continuity correction for the
    normal approximation; missing values are dropped before testing.
    """
    y = _to_float_array(series)
    y = y[np.isfinite(y)]
    n = y.size
    if n < 3:
        raise SeriesTooShortError(f"need at least 3 present values, got {n}")
    diff_sign = np.sign(y[np.newaxis, :] - y[:, np.newaxis])
    s = int(np.triu(diff_sign, k=1).sum())
    _, tie_counts = np.unique(y, return_counts=True)
    ties = tie_counts[tie_counts > 1].astype(float)
    n0 = n * (n - 1) / 2.0
    tie_pairs = float(np.sum(ties * (ties - 1) / 2.0))
    denom_sq = n0 * (n0 - tie_pairs)
    if denom_sq <= 0.0:
        raise AllTiedError("all values are tied; tau is undefined")
    tau = s / math.sqrt(denom_sq)
    variance = (
        n * (n - 1) * (2 * n + 5) - float(np.sum(ties * (ties - 1) * (2 * ties + 5)))
    ) / 18.0
    if s > 0:
        z = (s - 1) / math.sqrt(variance)
    elif s < 0:
        z = (s + 1) / math.sqrt(variance)
    else:
        z = 0.0
    p_value = math.erfc(abs(z) / math.sqrt(2.0))
    return MkResult(s_statistic=s, tau=tau, variance=variance, z=z, p_value=p_value)


def average_declination(mean_before: float, mean_during: float) -> float:
    """Relative change of the during-window mean versus the before-window
    mean, as a percentage (negative = decline)."""
    if mean_before <= 0:
        raise NonPositiveBaselineError("baseline mean must be positive")
    return (mean_during - mean_before) / mean_before * 100.0
