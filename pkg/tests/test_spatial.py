import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from airqstat.errors import (
    DimensionMismatchError,
    DuplicateCoordinatesError,
    ZeroVarianceError,
)
from airqstat.spatial import (
    EARTH_RADIUS_KM,
    InverseDistance,
    KNearest,
    build_weights,
    haversine_km,
    morans_i,
    morans_test,
)
from conftest import make_station

coords = st.tuples(
    st.floats(min_value=-89.0, max_value=89.0),
    st.floats(min_value=-179.0, max_value=179.0),
)


class TestHaversine:
    def test_identical_points(self):
        assert haversine_km((28.6, 77.2), (28.6, 77.2)) == 0.0

    def test_antipodal_arc(self):
        assert haversine_km((0.0, 0.0), (0.0, 180.0)) == pytest.approx(
            EARTH_RADIUS_KM * math.pi, abs=0.1
        )

    @given(coords, coords)
    def test_symmetry(self, a, b):
        assert haversine_km(a, b) == pytest.approx(haversine_km(b, a), abs=1e-9)

    def test_one_degree_latitude(self):
        # a degree of latitude is ~111.2 km on a 6371 km sphere
        d = haversine_km((28.0, 77.0), (29.0, 77.0))
        assert d == pytest.approx(EARTH_RADIUS_KM * math.pi / 180.0, rel=1e-9)


class TestBuildWeights:
    def test_two_stations_knearest(self):
        stations = [make_station("a", 28.0, 77.0), make_station("b", 28.1, 77.0)]
        w = build_weights(stations, KNearest(1))
        assert np.allclose(w.weights, [[0, 1], [1, 0]])
        assert w.row_standardized

    def test_collinear_equidistant_middle_row(self):
        stations = [
            make_station("a", 28.0, 77.0),
            make_station("b", 28.1, 77.0),
            make_station("c", 28.2, 77.0),
        ]
        w = build_weights(stations, InverseDistance(power=1.0, cutoff_km=100.0))
        assert np.allclose(w.weights[1], [0.5, 0.0, 0.5])
        assert np.allclose(w.weights.sum(axis=1), 1.0, atol=1e-12)

    def test_square_knearest_two(self):
        # pairwise distances put each corner's two side-neighbours closer
        # than the diagonal
        stations = [
            make_station("a", 28.0, 77.0),
            make_station("b", 28.0, 77.2),
            make_station("c", 28.2, 77.0),
            make_station("d", 28.2, 77.2),
        ]
        w = build_weights(stations, KNearest(2))
        for i in range(4):
            row = sorted(w.weights[i])
            assert row == pytest.approx([0.0, 0.0, 0.5, 0.5])
            assert w.weights[i, i] == 0.0

    def test_duplicate_coordinates(self):
        stations = [make_station("a", 28.0, 77.0), make_station("b", 28.0, 77.0)]
        with pytest.raises(DuplicateCoordinatesError):
            build_weights(stations, KNearest(1))

    def test_disconnected_row_reported(self):
        stations = [
            make_station("a", 28.0, 77.0),
            make_station("b", 28.001, 77.0),
            make_station("far", 40.0, 100.0),
        ]
        w = build_weights(stations, InverseDistance(power=1.0, cutoff_km=5.0))
        assert 2 in w.disconnected

    def test_inverse_distance_symmetric_before_standardization(self):
        stations = [
            make_station("a", 28.0, 77.0),
            make_station("b", 28.05, 77.1),
            make_station("c", 28.2, 77.02),
        ]
        w = build_weights(stations, InverseDistance(1.0, 100.0), row_standardize=False)
        assert np.allclose(w.weights, w.weights.T)
        assert not w.row_standardized
        assert np.all(np.diag(w.weights) == 0.0)


def brute_force_moran(values, weights):
    values = np.asarray(values, dtype=float)
    n = len(values)
    zbar = values.mean()
    num = 0.0
    s0 = 0.0
    for i in range(n):
        for j in range(n):
            num += weights[i, j] * (values[i] - zbar) * (values[j] - zbar)
            s0 += weights[i, j]
    den = sum((v - zbar) ** 2 for v in values)
    return n / s0 * num / den


class TestMoransI:
    def test_checkerboard_is_minus_one(self):
        stations = [make_station(f"s{i}", 28.0 + 0.01 * i, 77.0) for i in range(6)]
        w = build_weights(stations, KNearest(1))
        assert morans_i([1, -1, 1, -1, 1, -1], w) == pytest.approx(-1.0, abs=1e-12)

    def test_brute_force_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(4, 7))
            stations = [
                make_station(f"s{i}", 28.0 + float(rng.uniform(0, 0.5)), 77.0 + float(rng.uniform(0, 0.5)))
                for i in range(n)
            ]
            w = build_weights(stations, InverseDistance(1.0, 500.0))
            values = rng.uniform(0, 10, n)
            assert morans_i(values, w) == pytest.approx(
                brute_force_moran(values, w.weights), abs=1e-12
            )

    def test_affine_invariance(self, rng):
        stations = [
            make_station(f"s{i}", 28.0 + float(rng.uniform(0, 0.5)), 77.0 + float(rng.uniform(0, 0.5)))
            for i in range(10)
        ]
        w = build_weights(stations, InverseDistance(1.0, 500.0))
        values = rng.uniform(0, 10, 10)
        base = morans_i(values, w)
        assert morans_i(3.5 * values - 12.0, w) == pytest.approx(base, abs=1e-12)
        assert morans_i(-2.0 * values + 4.0, w) == pytest.approx(base, abs=1e-12)

    def test_zero_variance(self):
        stations = [make_station("a", 28.0, 77.0), make_station("b", 28.1, 77.0)]
        w = build_weights(stations, KNearest(1))
        with pytest.raises(ZeroVarianceError):
            morans_i([2.0, 2.0], w)

    def test_dimension_mismatch(self):
        stations = [make_station("a", 28.0, 77.0), make_station("b", 28.1, 77.0)]
        w = build_weights(stations, KNearest(1))
        with pytest.raises(DimensionMismatchError):
            morans_i([1.0, 2.0, 3.0], w)


class TestMoransTest:
    @staticmethod
    def _stations(rng, n=25):
        return [
            make_station(
                f"s{i}",
                28.0 + float(rng.uniform(0, 0.5)),
                77.0 + float(rng.uniform(0, 0.5)),
            )
            for i in range(n)
        ]

    def test_expected_i(self, rng):
        stations = self._stations(rng, 12)
        w = build_weights(stations, InverseDistance(1.0, 500.0))
        result = morans_test(rng.uniform(0, 5, 12), w, 99, seed=0)
        assert result.expected_i == -1.0 / 11.0

    def test_clustered_field_rejected(self, rng):
        stations = self._stations(rng)
        w = build_weights(stations, InverseDistance(1.0, 100.0))
        # values follow latitude rank: strong positive autocorrelation
        lat_rank = np.argsort(np.argsort([s.lat for s in stations])).astype(float)
        result = morans_test(lat_rank, w, 999, seed=5)
        assert result.p_value < 0.05

    def test_p_value_floor(self, rng):
        stations = self._stations(rng)
        w = build_weights(stations, InverseDistance(1.0, 100.0))
        lat_rank = np.argsort(np.argsort([s.lat for s in stations])).astype(float)
        result = morans_test(lat_rank, w, 99, seed=5)
        assert result.p_value == pytest.approx(1.0 / 100.0)

    def test_reproducible_given_seed(self, rng):
        stations = self._stations(rng)
        w = build_weights(stations, InverseDistance(1.0, 100.0))
        values = rng.uniform(0, 10, 25)
        a = morans_test(values, w, 999, seed=77)
        b = morans_test(values, w, 999, seed=77)
        assert a == b

    def test_minimum_permutations(self, rng):
        stations = self._stations(rng, 5)
        w = build_weights(stations, InverseDistance(1.0, 500.0))
        with pytest.raises(ValueError):
            morans_test([1.0, 2.0, 3.0, 4.0, 5.0], w, 50, seed=0)
