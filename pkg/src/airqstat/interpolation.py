"""IDW and ordinary kriging point/grid interpolation, power selection,
and the SSE/MSE/TSS accuracy machinery shared by every interpolator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AirqstatError,
    DuplicateCoordinatesError,
    EmptyNeighborhoodError,
    GridNodeError,
    LengthMismatchError,
    SingularSystemError,
    TooFewSamplesError,
)
from .geometry import (
    SpatialSample,
    cross_distances,
    pairwise_distances,
    sample_coords,
    sample_values,
)
from .variogram import (
    FAMILIES,
    VariogramModel,
    empirical_variogram,
    model_gamma,
    select_variogram,
)

__all__ = [
    "SpatialSample",
    "GridSpec",
    "IdwParams",
    "AccuracyReport",
    "KrigingWeights",
    "CvConfig",
    "idw_interpolate",
    "idw_select_power",
    "best_power",
    "ok_weights",
    "ok_interpolate",
    "grid_interpolate",
    "accuracy",
    "kfold_cv",
    "IdwPredictor",
    "OkPredictor",
]

#: Coincidence tolerance in the active distance unit.
COINCIDENT_EPS = 1e-12

#: Default power sweep, 0.1 through 2.0 in steps of 0.1.
DEFAULT_POWER_GRID = tuple(round(0.1 * i, 1) for i in range(1, 21))


@dataclass(frozen=True)
class GridSpec:
    """Regular lon/lat grid, both bounds inclusive."""

    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    cell: float = 0.01

    def __post_init__(self):
        if self.lon_min >= self.lon_max or self.lat_min >= self.lat_max:
            raise ValueError("grid bounds must satisfy min < max on both axes")
        if self.cell <= 0:
            raise ValueError("cell size must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        n_lon = int(np.floor((self.lon_max - self.lon_min) / self.cell + 1e-9)) + 1
        n_lat = int(np.floor((self.lat_max - self.lat_min) / self.cell + 1e-9)) + 1
        return n_lon, n_lat

    def nodes(self) -> np.ndarray:
        """(m, 2) lon/lat nodes in row-major order (lon outer, lat inner)."""
        n_lon, n_lat = self.shape
        lon = self.lon_min + self.cell * np.arange(n_lon)
        lat = self.lat_min + self.cell * np.arange(n_lat)
        out = np.empty((n_lon * n_lat, 2))
        out[:, 0] = np.repeat(lon, n_lat)
        out[:, 1] = np.tile(lat, n_lon)
        return out

    @classmethod
    def around(cls, samples: Sequence[SpatialSample], cell: float = 0.01) -> "GridSpec":
        """Bounding box of the samples padded by one cell."""
        coords = sample_coords(samples)
        return cls(
            lon_min=float(coords[:, 0].min()) - cell,
            lon_max=float(coords[:, 0].max()) + cell,
            lat_min=float(coords[:, 1].min()) - cell,
            lat_max=float(coords[:, 1].max()) + cell,
            cell=cell,
        )


@dataclass(frozen=True)
class IdwParams:
    """Inverse-distance weighting parameters.

    The neighbourhood is every sample by default; set ``k_nearest`` or
    ``radius`` (not both) to bound it.
    """

    power: float = 1.0
    k_nearest: Optional[int] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("power must be positive")
        if self.k_nearest is not None and self.radius is not None:
            raise ValueError("set at most one of k_nearest and radius")
        if self.k_nearest is not None and self.k_nearest < 1:
            raise ValueError("k_nearest must be >= 1")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius must be positive")


def _idw_point(d: np.ndarray, values: np.ndarray, params: IdwParams) -> float:
    near = int(np.argmin(d))
    if d[near] < COINCIDENT_EPS:
        return float(values[near])
    if params.k_nearest is not None:
        order = np.argsort(d, kind="stable")[: params.k_nearest]
        d, values = d[order], values[order]
    elif params.radius is not None:
        mask = d <= params.radius
        if not mask.any():
            raise EmptyNeighborhoodError("no samples within the radius")
        d, values = d[mask], values[mask]
    w = 1.0 / d**params.power
    return float(np.sum(w * values) / np.sum(w))


def idw_interpolate(
    samples: Sequence[SpatialSample],
    target: tuple[float, float],
    params: IdwParams = IdwParams(),
    metric: str = "planar",
) -> float:
    """Inverse-distance-weighted value at a (lon, lat) target.

    A target coinciding with a sample returns that sample's value exactly.
    """
    if not samples:
        raise EmptyNeighborhoodError("no samples provided", point=target)
    coords = sample_coords(samples)
    values = sample_values(samples)
    d = cross_distances(np.array([target]), coords, metric)[0]
    return _idw_point(d, values, params)


def accuracy(observed: Sequence[float], predicted: Sequence[float]) -> "AccuracyReport":
    """SSE/MSE/TSS/RMSE/R2 bundle; r2 is None on zero total variance."""
    obs = np.asarray(observed, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if obs.size != pred.size:
        raise LengthMismatchError(f"{obs.size} observed vs {pred.size} predicted")
    if obs.size < 2:
        raise ValueError("need at least 2 paired values")
    sse = float(np.sum((obs - pred) ** 2))
    mse = sse / obs.size
    tss = float(np.sum((obs - obs.mean()) ** 2))
    r2 = 1.0 - sse / tss if tss > 0 else None
    return AccuracyReport(sse=sse, mse=mse, tss=tss, rmse=float(np.sqrt(mse)), r2=r2)


@dataclass(frozen=True)
class AccuracyReport:
    sse: float
    mse: float
    tss: float
    rmse: float
    r2: Optional[float]

    def to_dict(self) -> dict:
        return {"sse": self.sse, "mse": self.mse, "tss": self.tss, "rmse": self.rmse, "r2": self.r2}


@dataclass(frozen=True)
class KrigingWeights:
    weights: np.ndarray
    lagrange: float


def _kriging_matrix(coords: np.ndarray, model: VariogramModel, metric: str) -> np.ndarray:
    n = coords.shape[0]
    dist = pairwise_distances(coords, metric)
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] < COINCIDENT_EPS):
        raise DuplicateCoordinatesError("two samples share a location")
    a = np.empty((n + 1, n + 1))
    a[:n, :n] = model_gamma(model, dist)
    a[n, :] = 1.0
    a[:, n] = 1.0
    a[n, n] = 0.0
    return a


def _ridge_scale(model: VariogramModel, dmax: float) -> float:
    if model.family == "linear":
        return model.nugget + model.slope * dmax
    return model.sill


def _ok_solve(
    samples: Sequence[SpatialSample],
    points: np.ndarray,
    model: VariogramModel,
    metric: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the ordinary-kriging system for many targets at once.

    Returns (weights, lagrange) with weights of shape (n_points, n_samples).
    """
    if len(samples) < 2:
        raise TooFewSamplesError(f"kriging needs at least 2 samples, got {len(samples)}")
    coords = sample_coords(samples)
    n = coords.shape[0]
    a = _kriging_matrix(coords, model, metric)
    d_to_targets = cross_distances(coords, points, metric)
    b = np.empty((n + 1, points.shape[0]))
    b[:n, :] = model_gamma(model, d_to_targets)
    b[n, :] = 1.0
    try:
        solution = np.linalg.solve(a, b)
        ok = np.all(np.isfinite(solution))
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        ridge = 1e-10 * _ridge_scale(model, float(pairwise_distances(coords, metric).max()))
        a2 = a.copy()
        a2[:n, :n] += ridge * np.eye(n)
        try:
            solution = np.linalg.solve(a2, b)
        except np.linalg.LinAlgError:
            raise SingularSystemError("kriging system singular after regularization") from None
        if not np.all(np.isfinite(solution)):
            raise SingularSystemError("kriging system singular after regularization")
    return solution[:n, :].T, solution[n, :]


def ok_weights(
    samples: Sequence[SpatialSample],
    target: tuple[float, float],
    model: VariogramModel,
    metric: str = "planar",
) -> KrigingWeights:
    """Ordinary-kriging weights at one target.

    Solves the bordered (n+1) system with a sum-to-one constraint by direct
    factorization with partial pivoting, retrying once with a tiny diagonal
    ridge on singularity.
    """
    w, mu = _ok_solve(samples, np.array([target], dtype=float), model, metric)
    return KrigingWeights(weights=w[0], lagrange=float(mu[0]))


def ok_interpolate(
    samples: Sequence[SpatialSample],
    target: tuple[float, float],
    model: VariogramModel,
    metric: str = "planar",
) -> float:
    kw = ok_weights(samples, target, model, metric)
    return float(kw.weights @ sample_values(samples))


#: A predictor maps (training samples, (m, 2) lon/lat points) to m values.
Predictor = Callable[[Sequence[SpatialSample], np.ndarray], np.ndarray]


class IdwPredictor:
    """IDW as a reusable predictor for grids and cross-validation."""

    def __init__(self, params: IdwParams = IdwParams(), metric: str = "planar"):
        self.params = params
        self.metric = metric

    def __call__(self, train: Sequence[SpatialSample], points: np.ndarray) -> np.ndarray:
        if not train:
            raise EmptyNeighborhoodError("no training samples")
        coords = sample_coords(train)
        values = sample_values(train)
        dists = cross_distances(np.asarray(points, dtype=float), coords, self.metric)
        out = np.empty(dists.shape[0])
        for i, d in enumerate(dists):
            try:
                out[i] = _idw_point(d, values, self.params)
            except EmptyNeighborhoodError as exc:
                raise EmptyNeighborhoodError(str(exc), point=tuple(points[i])) from None
        return out


class OkPredictor:
    """Ordinary kriging with a fixed model or a per-call variogram fit."""

    def __init__(
        self,
        model: Optional[VariogramModel] = None,
        family: str = "spherical",
        n_bins: int = 12,
        max_dist_fraction: float = 0.5,
        metric: str = "planar",
    ):
        if model is None and family != "auto" and family not in FAMILIES:
            raise ValueError(f"family must be 'auto' or one of {FAMILIES}")
        self.model = model
        self.family = family
        self.n_bins = n_bins
        self.max_dist_fraction = max_dist_fraction
        self.metric = metric
        self.last_fit = None

    def _resolve_model(self, train: Sequence[SpatialSample]) -> VariogramModel:
        if self.model is not None:
            return self.model
        emp = empirical_variogram(train, self.n_bins, self.max_dist_fraction, self.metric)
        families = FAMILIES if self.family == "auto" else (self.family,)
        fit = select_variogram(emp, families)
        self.last_fit = fit
        return fit.model

    def __call__(self, train: Sequence[SpatialSample], points: np.ndarray) -> np.ndarray:
        model = self._resolve_model(train)
        weights, _ = _ok_solve(train, np.asarray(points, dtype=float), model, self.metric)
        return weights @ sample_values(train)


def grid_interpolate(
    samples: Sequence[SpatialSample],
    grid: GridSpec,
    predictor: Predictor,
) -> list[tuple[float, float, float]]:
    """One value per grid node, row-major; node failures carry the node."""
    points = grid.nodes()
    try:
        values = predictor(samples, points)
    except EmptyNeighborhoodError as exc:
        if exc.point is not None:
            lon, lat = exc.point
            raise GridNodeError(str(exc), lon=lon, lat=lat) from exc
        raise
    except AirqstatError as exc:
        raise GridNodeError(str(exc), lon=points[0, 0], lat=points[0, 1]) from exc
    return [(float(p[0]), float(p[1]), float(v)) for p, v in zip(points, values)]


@dataclass(frozen=True)
class CvConfig:
    k: int = 10
    seed: int = 0


def kfold_cv(
    samples: Sequence[SpatialSample],
    k: int,
    predictor: Predictor,
    seed: int = 0,
) -> AccuracyReport:
    """K-fold cross-validation with pooled held-out accuracy.

    Folds come from a seeded shuffle and differ in size by at most one;
    each fold is predicted from the remaining samples.
    """
    n = len(samples)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise TooFewSamplesError(f"need at least k={k} samples, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    folds = np.array_split(order, k)
    observed: list[float] = []
    predicted: list[float] = []
    for fold in folds:
        held = set(int(i) for i in fold)
        train = [s for i, s in enumerate(samples) if i not in held]
        test_points = np.array([(samples[i].lon, samples[i].lat) for i in fold])
        preds = predictor(train, test_points)
        observed.extend(samples[i].value for i in fold)
        predicted.extend(float(v) for v in preds)
    return accuracy(observed, predicted)


def best_power(per_p: Sequence[tuple[float, float, Optional[float]]]) -> float:
    """Argmin-RMSE power from (p, rmse, r2) rows; ties go to the smaller p."""
    if not per_p:
        raise ValueError("empty power table")
    return min(per_p, key=lambda row: (row[1], row[0]))[0]


def idw_select_power(
    samples: Sequence[SpatialSample],
    p_grid: Sequence[float] = DEFAULT_POWER_GRID,
    cv: CvConfig = CvConfig(),
    metric: str = "planar",
) -> tuple[float, list[tuple[float, float, Optional[float]]]]:
    """Cross-validated IDW power sweep.

    Every power is scored on the same seeded folds; returns the argmin-RMSE
    power and the full (p, rmse, r2) table.
    """
    if not p_grid:
        raise ValueError("p_grid must be nonempty")
    per_p: list[tuple[float, float, Optional[float]]] = []
    for p in p_grid:
        report = kfold_cv(samples, cv.k, IdwPredictor(IdwParams(power=p), metric), cv.seed)
        per_p.append((float(p), report.rmse, report.r2))
    return best_power(per_p), per_p
