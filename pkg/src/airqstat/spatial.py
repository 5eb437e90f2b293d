"""Great-circle distances, spatial weight matrices, and the Moran's I
autocorrelation test used to gate weekly cross-sections."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateCoordinatesError,
    ZeroVarianceError,
)
from .model import StationMeta

EARTH_RADIUS_KM = 6371.0


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) points."""
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    s = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


def haversine_km_matrix(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    """Pairwise great-circle distances in km for arrays of degrees."""
    phi = np.radians(lat)
    lam = np.radians(lon)
    dphi = phi[:, None] - phi[None, :]
    dlam = lam[:, None] - lam[None, :]
    s = np.sin(dphi / 2.0) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(s)))


@dataclass(frozen=True)
class InverseDistance:
    """w_ij = 1/d_ij for distances within ``cutoff_km``, else 0."""

    power: float = 1.0
    cutoff_km: float = 50.0


@dataclass(frozen=True)
class KNearest:
    """Equal weight on each of a station's k nearest neighbours."""

    k: int


Scheme = Union[InverseDistance, KNearest]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    n: int
    weights: np.ndarray
    scheme: Scheme
    row_standardized: bool
    disconnected: tuple[int, ...] = ()


def build_weights(
    stations: Sequence[StationMeta],
    scheme: Scheme = InverseDistance(),
    row_standardize: bool = True,
) -> WeightMatrix:
    """Spatial weight matrix over station locations.

    Inverse-distance weights are symmetric before the optional row
    standardization; k-nearest weights are always row-standardized. Rows
    left with no neighbours are reported in ``disconnected``.
    """
    n = len(stations)
    if n < 2:
        raise ValueError("need at least 2 stations")
    lat = np.array([st.lat for st in stations])
    lon = np.array([st.lon for st in stations])
    dist = haversine_km_matrix(lat, lon)
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] < 1e-9):
        i, j = np.argwhere((dist < 1e-9) & off)[0]
        raise DuplicateCoordinatesError(
            f"stations {stations[i].id!r} and {stations[j].id!r} share coordinates"
        )

    if isinstance(scheme, InverseDistance):
        if scheme.power <= 0 or scheme.cutoff_km <= 0:
            raise ValueError("power and cutoff_km must be positive")
        with np.errstate(divide="ignore"):
            w = np.where(dist <= scheme.cutoff_km, 1.0 / dist**scheme.power, 0.0)
        np.fill_diagonal(w, 0.0)
        standardized = False
        if row_standardize:
            w, standardized = _row_standardize(w), True
    elif isinstance(scheme, KNearest):
        if scheme.k < 1:
            raise ValueError("k must be >= 1")
        k = min(scheme.k, n - 1)
        w = np.zeros((n, n))
        masked = dist + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
        for i in range(n):
            nearest = np.argsort(masked[i], kind="stable")[:k]
            w[i, nearest] = 1.0
        w, standardized = _row_standardize(w), True
    else:
        raise TypeError(f"unknown weight scheme {scheme!r}")

    disconnected = tuple(int(i) for i in np.flatnonzero(w.sum(axis=1) == 0.0))
    return WeightMatrix(
        n=n, weights=w, scheme=scheme, row_standardized=standardized, disconnected=disconnected
    )


def _row_standardize(w: np.ndarray) -> np.ndarray:
    sums = w.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sums > 0, w / sums, 0.0)
    return out


def morans_i(values: Sequence[float], w: WeightMatrix) -> float:
    """Global Moran's I: (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2."""
    y = np.asarray(values, dtype=float)
    if y.size != w.n:
        raise DimensionMismatchError(f"{y.size} values for a {w.n}-station weight matrix")
    z = y - y.mean()
    denom = float(np.sum(z**2))
    if denom == 0.0:
        raise ZeroVarianceError("values have zero variance")
    s0 = float(w.weights.sum())
    return float(w.n / s0 * (z @ w.weights @ z) / denom)


@dataclass(frozen=True)
class MoranResult:
    i_statistic: float
    expected_i: float
    p_value: float
    n_permutations: int

    def to_dict(self) -> dict:
        return {
            "i": self.i_statistic,
            "expected_i": self.expected_i,
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
        }


def morans_test(
    values: Sequence[float],
    w: WeightMatrix,
    n_permutations: int = 999,
    seed: int = 0,
) -> MoranResult:
    """Two-sided permutation test of H0: I = 0.

    p = (1 + #{ |I* - E[I]| >= |I_obs - E[I]| }) / (n_permutations + 1),
    with E[I] = -1/(n-1). Deterministic for a given seed.
    """
    if n_permutations < 99:
        raise ValueError("need at least 99 permutations")
    y = np.asarray(values, dtype=float)
    observed = morans_i(y, w)
    n = w.n
    expected = -1.0 / (n - 1)
    z = y - y.mean()
    denom = float(np.sum(z**2))
    s0 = float(w.weights.sum())

    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(n), (n_permutations, 1)), axis=1)
    zp = z[perms]
    nums = np.einsum("bi,bi->b", zp @ w.weights.T, zp)
    i_star = n / s0 * nums / denom
    extreme = int(np.sum(np.abs(i_star - expected) >= abs(observed - expected)))
    p = (1 + extreme) / (n_permutations + 1)
    return MoranResult(
        i_statistic=observed, expected_i=expected, p_value=p, n_permutations=n_permutations
    )
