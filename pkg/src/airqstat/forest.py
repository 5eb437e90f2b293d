"""Regression random forest with out-of-bag residuals and impurity-based
importance, composed with ordinary kriging of the OOB residual field to
form random-forest regression kriging.

Trees split on the variance-reduction criterion. Rows missing the chosen
split feature follow the child holding the majority of the present rows,
both while training and at prediction time, so a query carrying only
coordinates is still routable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    EmptyTrainingSetError,
    NoOobCoverageError,
    SchemaMismatchError,
)
from .geometry import SpatialSample
from .interpolation import _ok_solve
from .variogram import (
    FAMILIES,
    VariogramFit,
    VariogramModel,
    empirical_variogram,
    select_variogram,
)

#: Table-style feature schema: pollutant covariates plus position.
DEFAULT_FEATURES = ("no", "no2", "nox", "co", "pm10", "east", "north")


@dataclass(frozen=True)
class ForestConfig:
    ntree: int = 1000
    mtry: Optional[int] = None
    min_leaf: int = 5
    max_depth: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.ntree < 1:
            raise ValueError("ntree must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class FeatureRow:
    """Covariates at one location; position is mandatory, pollutants may
    all be missing (a bare grid node)."""

    east: float
    north: float
    no: Optional[float] = None
    no2: Optional[float] = None
    nox: Optional[float] = None
    co: Optional[float] = None
    pm10: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.east) and math.isfinite(self.north)):
            raise ValueError("east and north must be finite")

    def to_array(self, feature_names: Sequence[str]) -> np.ndarray:
        out = np.empty(len(feature_names))
        for i, name in enumerate(feature_names):
            try:
                v = getattr(self, name)
            except AttributeError:
                raise SchemaMismatchError(f"feature row has no feature {name!r}") from None
            out[i] = np.nan if v is None else float(v)
        return out


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "missing_left", "value")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.missing_left: list[bool] = []
        self.value: list[float] = []

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.missing_left.append(True)
        self.value.append(value)
        return len(self.feature) - 1

    def freeze(self):
        self.feature = np.asarray(self.feature, dtype=np.int32)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int32)
        self.right = np.asarray(self.right, dtype=np.int32)
        self.missing_left = np.asarray(self.missing_left, dtype=bool)
        self.value = np.asarray(self.value, dtype=float)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, rows = stack.pop()
            f = self.feature[node]
            if f < 0:
                out[rows] = self.value[node]
                continue
            col = x[rows, f]
            missing = np.isnan(col)
            with np.errstate(invalid="ignore"):
                go_left = (col <= self.threshold[node]) | (missing & self.missing_left[node])
            left_rows = rows[go_left]
            right_rows = rows[~go_left]
            if left_rows.size:
                stack.append((self.left[node], left_rows))
            if right_rows.size:
                stack.append((self.right[node], right_rows))
        return out


def _best_split_for_feature(col: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (score_children_sse, gain, threshold, missing_left) on one
    feature, or None when no admissible boundary exists."""
    present = ~np.isnan(col)
    pv = col[present]
    m = pv.size
    if m < 2:
        return None
    py = y[present]
    order = np.argsort(pv, kind="stable")
    sv = pv[order]
    sy = py[order]
    boundaries = sv[1:] > sv[:-1]
    if not boundaries.any():
        return None
    c1 = np.cumsum(sy)
    c2 = np.cumsum(sy * sy)
    tot1, tot2 = c1[-1], c2[-1]
    k = np.arange(1, m)
    left1, left2 = c1[:-1], c2[:-1]
    sse_left = left2 - left1**2 / k
    sse_right = (tot2 - left2) - (tot1 - left1) ** 2 / (m - k)
    n_missing = col.size - m
    maj_left = k >= (m - k)
    left_total = k + n_missing * maj_left
    right_total = (m - k) + n_missing * (~maj_left)
    valid = boundaries & (left_total >= min_leaf) & (right_total >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, sse_left + sse_right, np.inf)
    best = int(np.argmin(score))
    parent_sse = tot2 - tot1**2 / m
    gain = max(0.0, parent_sse - float(score[best]))
    threshold = 0.5 * (sv[best] + sv[best + 1])
    return float(score[best]), gain, float(threshold), bool(maj_left[best])


def _grow(tree: _Tree, x, y, idx, depth, rng, mtry, min_leaf, max_depth, importance):
    node = tree.add_leaf(float(y[idx].mean()))
    if idx.size < 2 * min_leaf:
        return node
    if max_depth is not None and depth >= max_depth:
        return node
    if np.all(y[idx] == y[idx][0]):
        return node
    n_features = x.shape[1]
    feats = rng.choice(n_features, size=mtry, replace=False)
    best = None
    for f in feats:
        cand = _best_split_for_feature(x[idx, f], y[idx], min_leaf)
        if cand is None:
            continue
        # Compare by variance reduction: present-row counts differ across
        # features, so raw child SSE values are not comparable.
        if best is None or cand[1] > best[1][1]:
            best = (int(f), cand)
    if best is None:
        return node
    f, (_, gain, threshold, missing_left) = best
    importance[f] += gain
    col = x[idx, f]
    missing = np.isnan(col)
    with np.errstate(invalid="ignore"):
        go_left = (col <= threshold) | (missing & missing_left)
    left_idx = idx[go_left]
    right_idx = idx[~go_left]
    left_node = _grow(tree, x, y, left_idx, depth + 1, rng, mtry, min_leaf, max_depth, importance)
    right_node = _grow(tree, x, y, right_idx, depth + 1, rng, mtry, min_leaf, max_depth, importance)
    tree.feature[node] = f
    tree.threshold[node] = threshold
    tree.left[node] = left_node
    tree.right[node] = right_node
    tree.missing_left[node] = missing_left
    return node


@dataclass(frozen=True, eq=False)
class RegressionForest:
    trees: tuple[_Tree, ...]
    oob_predictions: np.ndarray
    oob_counts: np.ndarray
    feature_names: tuple[str, ...]
    config: ForestConfig
    mtry: int
    training_rows: tuple[FeatureRow, ...]
    targets: np.ndarray
    importance_raw: np.ndarray = field(repr=False)

    def predict_rows(self, rows: Sequence[FeatureRow]) -> np.ndarray:
        x = np.array([row.to_array(self.feature_names) for row in rows]).reshape(
            len(rows), len(self.feature_names)
        )
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.predict(x)
        return total / len(self.trees)


def fit_forest(
    rows: Sequence[tuple[FeatureRow, float]],
    config: ForestConfig = ForestConfig(),
    feature_names: Sequence[str] = DEFAULT_FEATURES,
) -> RegressionForest:
    """Fit a seeded bootstrap ensemble of variance-reduction trees.

    Each tree draws its bootstrap and per-node feature subsets from a
    generator keyed by (seed, tree index), so results are bit-reproducible
    and independent of evaluation order.
    """
    if len(rows) < 2:
        raise EmptyTrainingSetError(f"need at least 2 training rows, got {len(rows)}")
    names = tuple(feature_names)
    x = np.array([row.to_array(names) for row, _ in rows])
    y = np.array([float(t) for _, t in rows])
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    n, m = x.shape
    mtry = config.mtry if config.mtry is not None else max(1, m // 3)
    if not 1 <= mtry <= m:
        raise ValueError(f"mtry must be in [1, {m}], got {mtry}")

    trees: list[_Tree] = []
    oob_sum = np.zeros(n)
    oob_count = np.zeros(n, dtype=np.int64)
    importance = np.zeros(m)
    for t in range(config.ntree):
        rng = np.random.default_rng((config.seed, t))
        boot = rng.integers(0, n, size=n)
        tree = _Tree()
        tree_importance = np.zeros(m)
        _grow(
            tree,
            x[boot],
            y[boot],
            np.arange(n),
            0,
            rng,
            mtry,
            config.min_leaf,
            config.max_depth,
            tree_importance,
        )
        tree.freeze()
        trees.append(tree)
        importance += tree_importance
        out_of_bag = np.flatnonzero(np.bincount(boot, minlength=n) == 0)
        if out_of_bag.size:
            oob_sum[out_of_bag] += tree.predict(x[out_of_bag])
            oob_count[out_of_bag] += 1

    with np.errstate(invalid="ignore", divide="ignore"):
        oob_pred = np.where(oob_count > 0, oob_sum / np.maximum(oob_count, 1), np.nan)
    return RegressionForest(
        trees=tuple(trees),
        oob_predictions=oob_pred,
        oob_counts=oob_count,
        feature_names=names,
        config=config,
        mtry=mtry,
        training_rows=tuple(row for row, _ in rows),
        targets=y,
        importance_raw=importance / config.ntree,
    )


def predict(forest: RegressionForest, row: FeatureRow) -> float:
    """Mean of the per-tree leaf means at one feature row."""
    return float(forest.predict_rows([row])[0])


@dataclass(frozen=True, eq=False)
class OobResiduals:
    """Out-of-bag residuals located at their training rows' coordinates."""

    east: np.ndarray
    north: np.ndarray
    residual: np.ndarray
    row_indices: np.ndarray

    def samples(self) -> list[SpatialSample]:
        return [
            SpatialSample(lon=float(e), lat=float(n), value=float(r))
            for e, n, r in zip(self.east, self.north, self.residual)
        ]


def oob_residuals(forest: RegressionForest) -> OobResiduals:
    """Residual y - OOB prediction per covered training row.

    Rows never out of bag are dropped with a warning when the ensemble is
    large enough to make that a fluke; tiny ensembles fail instead.
    """
    covered = forest.oob_counts > 0
    if not covered.all():
        if forest.config.ntree < 10:
            raise NoOobCoverageError(
                "some rows were never out of bag; increase ntree (>= 10)"
            )
        warnings.warn(
            f"{int((~covered).sum())} rows had no out-of-bag trees and were dropped",
            stacklevel=2,
        )
    kept = np.flatnonzero(covered)
    east = np.array([forest.training_rows[i].east for i in kept])
    north = np.array([forest.training_rows[i].north for i in kept])
    residual = forest.targets[kept] - forest.oob_predictions[kept]
    return OobResiduals(east=east, north=north, residual=residual, row_indices=kept)


@dataclass(frozen=True)
class ImportanceReport:
    """Mean impurity decrease per feature, normalized to sum to one and
    ranked in descending order. All-zero when no split ever improved."""

    ranking: tuple[tuple[str, float], ...]

    def as_dict(self) -> dict[str, float]:
        return dict(self.ranking)

    def to_dict(self) -> dict:
        return {"importance": [{"feature": f, "value": v} for f, v in self.ranking]}


def importance(forest: RegressionForest) -> ImportanceReport:
    raw = forest.importance_raw
    total = float(raw.sum())
    values = raw / total if total > 0 else np.zeros_like(raw)
    order = sorted(
        zip(forest.feature_names, values), key=lambda kv: (-kv[1], kv[0])
    )
    return ImportanceReport(ranking=tuple((name, float(v)) for name, v in order))


def _is_flat_zero(model: VariogramModel) -> bool:
    if model.family == "linear":
        return model.nugget == 0.0 and model.slope == 0.0
    return model.sill == 0.0


MeanModel = Callable[[FeatureRow], float]


@dataclass(frozen=True, eq=False)
class RfkModel:
    """Fitted regression-kriging model: a mean stage plus kriged residuals."""

    forest: Optional[RegressionForest]
    mean_model: Optional[MeanModel]
    residual_samples: tuple[SpatialSample, ...]
    variogram_fit: Optional[VariogramFit]
    metric: str

    def predict_mean(self, rows: Sequence[FeatureRow]) -> np.ndarray:
        if self.forest is not None:
            return self.forest.predict_rows(rows)
        return np.array([self.mean_model(row) for row in rows], dtype=float)

    def predict(self, rows: Sequence[FeatureRow]) -> np.ndarray:
        base = self.predict_mean(rows)
        if self.variogram_fit is None:
            return base
        points = np.array([(row.east, row.north) for row in rows], dtype=float)
        weights, _ = _ok_solve(
            list(self.residual_samples), points, self.variogram_fit.model, self.metric
        )
        residual_values = np.array([s.value for s in self.residual_samples])
        return base + weights @ residual_values


def fit_rfk(
    train: Sequence[tuple[FeatureRow, float]],
    config: ForestConfig = ForestConfig(),
    family: str = "spherical",
    n_bins: int = 12,
    max_dist_fraction: float = 0.5,
    metric: str = "planar",
    feature_names: Sequence[str] = DEFAULT_FEATURES,
    mean_model: Optional[MeanModel] = None,
) -> RfkModel:
    """Fit the two RFK stages on training rows located at (east, north).

    The regression stage is a random forest unless ``mean_model`` overrides
    it (then residuals are plain y - mean at every row). Residuals are
    kriged under the best fit among ``family`` ("auto" tries every family);
    an identically zero residual field skips kriging entirely.
    """
    if mean_model is None:
        forest = fit_forest(train, config, feature_names)
        residuals = oob_residuals(forest)
        res_samples = residuals.samples()
    else:
        forest = None
        res_samples = [
            SpatialSample(lon=row.east, lat=row.north, value=y - float(mean_model(row)))
            for row, y in train
        ]
    vfit: Optional[VariogramFit] = None
    if any(abs(s.value) > 1e-15 for s in res_samples):
        emp = empirical_variogram(res_samples, n_bins, max_dist_fraction, metric)
        families = FAMILIES if family == "auto" else (family,)
        fit = select_variogram(emp, families)
        if not _is_flat_zero(fit.model):
            vfit = fit
    return RfkModel(
        forest=forest,
        mean_model=mean_model,
        residual_samples=tuple(res_samples),
        variogram_fit=vfit,
        metric=metric,
    )


def rfk_interpolate(
    train: Sequence[tuple[FeatureRow, float]],
    query: Sequence[FeatureRow],
    config: ForestConfig = ForestConfig(),
    family: str = "spherical",
    n_bins: int = 12,
    max_dist_fraction: float = 0.5,
    metric: str = "planar",
    feature_names: Sequence[str] = DEFAULT_FEATURES,
    mean_model: Optional[MeanModel] = None,
) -> np.ndarray:
    """Forest prediction plus ordinary kriging of the OOB residual field."""
    model = fit_rfk(
        train, config, family, n_bins, max_dist_fraction, metric, feature_names, mean_model
    )
    return model.predict(query)


class ForestPredictor:
    """Forest-only spatial predictor (the RFK regression stage alone)."""

    def __init__(
        self,
        features_by_location: dict[tuple[float, float], FeatureRow],
        config: ForestConfig = ForestConfig(),
        feature_names: Sequence[str] = DEFAULT_FEATURES,
    ):
        self.features = {
            (round(lon, 9), round(lat, 9)): row
            for (lon, lat), row in features_by_location.items()
        }
        self.config = config
        self.feature_names = tuple(feature_names)

    def _row_for(self, lon: float, lat: float) -> FeatureRow:
        row = self.features.get((round(lon, 9), round(lat, 9)))
        return row if row is not None else FeatureRow(east=lon, north=lat)

    def __call__(self, train: Sequence[SpatialSample], points: np.ndarray) -> np.ndarray:
        rows = [(self._row_for(s.lon, s.lat), s.value) for s in train]
        forest = fit_forest(rows, self.config, self.feature_names)
        query = [self._row_for(float(lon), float(lat)) for lon, lat in np.asarray(points)]
        return forest.predict_rows(query)


class RfkPredictor:
    """RFK as a grid/CV predictor over plain spatial samples.

    Covariates are looked up per location from ``features_by_location``;
    unknown locations (grid nodes) get a bare coordinates-only row.
    """

    def __init__(
        self,
        features_by_location: dict[tuple[float, float], FeatureRow],
        config: ForestConfig = ForestConfig(),
        family: str = "spherical",
        n_bins: int = 12,
        max_dist_fraction: float = 0.5,
        metric: str = "planar",
        feature_names: Sequence[str] = DEFAULT_FEATURES,
    ):
        self.features = {
            (round(lon, 9), round(lat, 9)): row
            for (lon, lat), row in features_by_location.items()
        }
        self.config = config
        self.family = family
        self.n_bins = n_bins
        self.max_dist_fraction = max_dist_fraction
        self.metric = metric
        self.feature_names = tuple(feature_names)
        self.last_fit: Optional[VariogramFit] = None
        self.last_importance: Optional[ImportanceReport] = None

    def _row_for(self, lon: float, lat: float) -> FeatureRow:
        row = self.features.get((round(lon, 9), round(lat, 9)))
        return row if row is not None else FeatureRow(east=lon, north=lat)

    def __call__(self, train: Sequence[SpatialSample], points: np.ndarray) -> np.ndarray:
        rows = [(self._row_for(s.lon, s.lat), s.value) for s in train]
        model = fit_rfk(
            rows,
            self.config,
            self.family,
            self.n_bins,
            self.max_dist_fraction,
            self.metric,
            self.feature_names,
        )
        self.last_fit = model.variogram_fit
        self.last_importance = importance(model.forest) if model.forest is not None else None
        query = [self._row_for(float(lon), float(lat)) for lon, lat in np.asarray(points)]
        return model.predict(query)
