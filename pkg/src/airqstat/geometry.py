"""Spatial samples and the distance metrics shared by the variogram and
interpolation code.

``metric`` is either ``"planar"`` (Euclidean in lon/lat degree space, the
default, matching variogram ranges quoted in degrees) or ``"haversine"``
(great-circle km).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spatial import EARTH_RADIUS_KM

METRICS = ("planar", "haversine")


@dataclass(frozen=True)
class SpatialSample:
    """A (lon, lat, value) triple; the unit of all interpolation."""

    lon: float
    lat: float
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat) and math.isfinite(self.value)):
            raise ValueError("sample coordinates and value must be finite")


def sample_coords(samples: Sequence[SpatialSample]) -> np.ndarray:
    """(n, 2) array of lon, lat."""
    return np.array([(s.lon, s.lat) for s in samples], dtype=float).reshape(-1, 2)


def sample_values(samples: Sequence[SpatialSample]) -> np.ndarray:
    return np.array([s.value for s in samples], dtype=float)


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


def cross_distances(a: np.ndarray, b: np.ndarray, metric: str = "planar") -> np.ndarray:
    """(len(a), len(b)) distances between (lon, lat) point arrays."""
    _check_metric(metric)
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if metric == "planar":
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=2))
    lam1, phi1 = np.radians(a[:, 0])[:, None], np.radians(a[:, 1])[:, None]
    lam2, phi2 = np.radians(b[:, 0])[None, :], np.radians(b[:, 1])[None, :]
    s = np.sin((phi2 - phi1) / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin((lam2 - lam1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(s)))


def pairwise_distances(points: np.ndarray, metric: str = "planar") -> np.ndarray:
    return cross_distances(points, points, metric)
