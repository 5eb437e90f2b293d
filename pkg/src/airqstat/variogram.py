"""Empirical semivariogram estimation and parametric model fitting by
weighted least squares, with RMSE-based model selection.

Model families use the standard closed forms with a practical-range
factor of 3 for the exponential and Gaussian curves. gamma(0) is 0 by
convention exactly at h = 0; the nugget is the h -> 0+ limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    AirqstatError,
    AllCoincidentError,
    DegenerateFitError,
    TooFewBinsError,
    TooFewSamplesError,
)
from .geometry import SpatialSample, pairwise_distances, sample_coords, sample_values

#: Family precedence used to break RMSE ties during selection.
FAMILIES = ("spherical", "exponential", "gaussian", "linear")


@dataclass(frozen=True, eq=False)
class EmpiricalVariogram:
    bin_centers: np.ndarray
    semivariances: np.ndarray
    pair_counts: np.ndarray
    distance_unit: str = "degrees"


@dataclass(frozen=True)
class VariogramModel:
    family: str
    nugget: float
    sill: Optional[float] = None
    range: Optional[float] = None
    slope: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.nugget < 0:
            raise ValueError("nugget must be >= 0")
        if self.family == "linear":
            if self.slope is None or self.slope < 0:
                raise ValueError("linear model needs slope >= 0")
        else:
            if self.sill is None or self.range is None:
                raise ValueError(f"{self.family} model needs sill and range")
            if self.sill < self.nugget:
                raise ValueError("sill must be >= nugget")
            if self.range <= 0:
                raise ValueError("range must be positive")

    def to_dict(self) -> dict:
        out: dict = {"family": self.family, "nugget": self.nugget}
        if self.family == "linear":
            out["slope"] = self.slope
        else:
            out["sill"] = self.sill
            out["range"] = self.range
        return out


def _structure(family: str, h: np.ndarray, a: float) -> np.ndarray:
    """Unit-sill structure curve rising from 0 toward 1."""
    if family == "spherical":
        hr = np.minimum(h / a, 1.0)
        return 1.5 * hr - 0.5 * hr**3
    if family == "exponential":
        return 1.0 - np.exp(-3.0 * h / a)
    if family == "gaussian":
        return 1.0 - np.exp(-3.0 * h**2 / a**2)
    raise ValueError(f"no structure curve for family {family!r}")


def model_gamma(model: VariogramModel, h) -> Union[float, np.ndarray]:
    """Semivariance of a fitted model at separation distance(s) h >= 0."""
    hs = np.asarray(h, dtype=float)
    if np.any(hs < 0):
        raise ValueError("separation distances must be >= 0")
    if model.family == "linear":
        g = model.nugget + model.slope * hs
    else:
        g = model.nugget + (model.sill - model.nugget) * _structure(model.family, hs, model.range)
    g = np.where(hs == 0.0, 0.0, g)
    return float(g) if np.isscalar(h) else g


def empirical_variogram(
    samples: Sequence[SpatialSample],
    n_bins: int = 12,
    max_dist_fraction: float = 0.5,
    metric: str = "planar",
) -> EmpiricalVariogram:
    """Binned semivariance estimate gamma(h_k) = sum (y_i - y_j)^2 / (2 N_k).

    Bins are equal-width over (0, max_dist_fraction x max pairwise
    distance]; empty bins are dropped and zero-distance pairs ignored.
    """
    if n_bins < 3:
        raise ValueError("n_bins must be >= 3")
    if not 0 < max_dist_fraction <= 1:
        raise ValueError("max_dist_fraction must be in (0, 1]")
    if len(samples) < 2:
        raise TooFewSamplesError(f"need at least 2 samples, got {len(samples)}")
    coords = sample_coords(samples)
    values = sample_values(samples)
    dist = pairwise_distances(coords, metric)
    iu = np.triu_indices(len(samples), k=1)
    d = dist[iu]
    if np.all(d == 0.0):
        raise AllCoincidentError("all sample locations coincide")
    sq = (values[iu[0]] - values[iu[1]]) ** 2
    dmax = max_dist_fraction * d.max()
    keep = (d > 0.0) & (d <= dmax)
    d, sq = d[keep], sq[keep]
    width = dmax / n_bins
    idx = np.minimum(np.ceil(d / width).astype(int) - 1, n_bins - 1)
    centers, gammas, counts = [], [], []
    for k in range(n_bins):
        mask = idx == k
        n_k = int(mask.sum())
        if n_k == 0:
            continue
        centers.append((k + 0.5) * width)
        gammas.append(float(sq[mask].sum()) / (2.0 * n_k))
        counts.append(n_k)
    unit = "degrees" if metric == "planar" else "km"
    return EmpiricalVariogram(
        bin_centers=np.array(centers),
        semivariances=np.array(gammas),
        pair_counts=np.array(counts),
        distance_unit=unit,
    )


@dataclass(frozen=True)
class VariogramFit:
    model: VariogramModel
    fit_rmse: float
    n_bins_used: int

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out["fit_rmse"] = self.fit_rmse
        return out


def _weighted_line(h, g, w):
    """Pair-count-weighted least squares of g on [1, h] with both
    coefficients clamped to be nonnegative."""
    sw = w.sum()
    swh = (w * h).sum()
    swh2 = (w * h * h).sum()
    swg = (w * g).sum()
    swhg = (w * h * g).sum()
    det = sw * swh2 - swh**2
    if det > 0:
        b0 = (swh2 * swg - swh * swhg) / det
        b1 = (sw * swhg - swh * swg) / det
    else:
        b0, b1 = swg / sw, 0.0
    if b1 < 0:
        b1, b0 = 0.0, max(0.0, swg / sw)
    elif b0 < 0:
        b0 = 0.0
        b1 = max(0.0, swhg / swh2) if swh2 > 0 else 0.0
    return b0, b1


def _profile_fit(family, h, g, w, a):
    """Best (nugget, partial sill) for a fixed range, plus the weighted SSE."""
    x = _structure(family, h, a)
    b0, b1 = _weighted_line(x, g, w)
    resid = g - (b0 + b1 * x)
    return float((w * resid**2).sum()), b0, b1


_GOLDEN = (5.0**0.5 - 1.0) / 2.0


def _golden_min(f, lo: float, hi: float, iters: int = 90) -> tuple[float, float]:
    """Deterministic golden-section minimization on [lo, hi]."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if b - a < 1e-14 * max(1.0, abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def fit_variogram(emp: EmpiricalVariogram, family: str) -> VariogramFit:
    """Fit one family to an empirical variogram.

    The objective is the pair-count-weighted squared error over bins. For
    the bounded families the nugget and partial sill are profiled out by a
    constrained linear solve, and the range is located with a deterministic
    grid seed refined by bounded scalar minimization. ``fit_rmse`` is the
    unweighted RMSE over the bins used.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    h = np.asarray(emp.bin_centers, dtype=float)
    g = np.asarray(emp.semivariances, dtype=float)
    w = np.asarray(emp.pair_counts, dtype=float)
    if h.size < 3:
        raise TooFewBinsError(f"need at least 3 nonempty bins, got {h.size}")

    if family == "linear":
        b0, b1 = _weighted_line(h, g, w)
        model = VariogramModel(family="linear", nugget=b0, slope=b1)
        return _finish_fit(model, h, g)

    a_lo = max(1e-12, 0.25 * h[0])
    a_hi = 3.0 * h[-1]
    grid = np.linspace(a_lo, a_hi, 64)
    sses = np.array([_profile_fit(family, h, g, w, a)[0] for a in grid])
    best = int(np.argmin(sses))
    lo = grid[max(0, best - 1)]
    hi = grid[min(grid.size - 1, best + 1)]
    a_refined, sse_refined = _golden_min(
        lambda a: _profile_fit(family, h, g, w, a)[0], lo, hi
    )
    candidates = [(sses[best], grid[best]), (sse_refined, a_refined)]
    _, a_star = min(candidates, key=lambda t: t[0])
    sse, b0, b1 = _profile_fit(family, h, g, w, a_star)

    scale = max(float(g.max()), 1.0)
    pinned = b0 == 0.0 and b1 == 0.0 and (a_star in (a_lo, a_hi))
    if pinned and sse > 1e-12 * scale:
        raise DegenerateFitError(f"{family} fit pinned to parameter bounds")
    model = VariogramModel(family=family, nugget=b0, sill=b0 + b1, range=a_star)
    return _finish_fit(model, h, g)


def _finish_fit(model: VariogramModel, h: np.ndarray, g: np.ndarray) -> VariogramFit:
    resid = g - model_gamma(model, h)
    rmse = float(np.sqrt(np.mean(resid**2)))
    return VariogramFit(model=model, fit_rmse=rmse, n_bins_used=int(h.size))


def best_fit(fits: Sequence[VariogramFit]) -> VariogramFit:
    """Minimum-RMSE fit; exact ties go to the earlier family in the
    precedence order spherical > exponential > gaussian > linear."""
    if not fits:
        raise ValueError("no fits to choose from")
    return min(fits, key=lambda f: (f.fit_rmse, FAMILIES.index(f.model.family)))


def select_variogram(
    emp: EmpiricalVariogram, families: Sequence[str] = FAMILIES
) -> VariogramFit:
    """Fit every candidate family and keep the minimum-RMSE fit."""
    if not families:
        raise ValueError("need at least one family")
    fits: list[VariogramFit] = []
    last_error: Optional[AirqstatError] = None
    for family in families:
        try:
            fits.append(fit_variogram(emp, family))
        except AirqstatError as exc:
            last_error = exc
    if not fits:
        assert last_error is not None
        raise last_error
    return best_fit(fits)
