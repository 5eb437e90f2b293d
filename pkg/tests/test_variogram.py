import math

import numpy as np
import pytest

from airqstat.errors import AllCoincidentError, TooFewBinsError, TooFewSamplesError
from airqstat.geometry import SpatialSample
from airqstat.variogram import (
    EmpiricalVariogram,
    VariogramFit,
    VariogramModel,
    best_fit,
    empirical_variogram,
    fit_variogram,
    model_gamma,
    select_variogram,
)


def brute_force_variogram(samples, n_bins, max_dist_fraction):
    """Independent pair-enumeration estimate with right-closed bins."""
    pairs = []
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            d = math.hypot(samples[i].lon - samples[j].lon, samples[i].lat - samples[j].lat)
            pairs.append((d, (samples[i].value - samples[j].value) ** 2))
    dmax = max_dist_fraction * max(d for d, _ in pairs)
    width = dmax / n_bins
    out = []
    for k in range(n_bins):
        lo, hi = k * width, (k + 1) * width
        members = [sq for d, sq in pairs if lo < d <= hi]
        if members:
            out.append(((lo + hi) / 2.0, sum(members) / (2 * len(members)), len(members)))
    return out


class TestEmpiricalVariogram:
    def test_single_pair(self):
        emp = empirical_variogram(
            [SpatialSample(0, 0, 0.0), SpatialSample(1, 0, 2.0)], n_bins=3, max_dist_fraction=1.0
        )
        assert emp.semivariances.tolist() == [2.0]
        assert emp.pair_counts.tolist() == [1]

    def test_constant_field(self, rng):
        samples = [
            SpatialSample(float(x), float(y), 5.0)
            for x, y in rng.uniform(0, 1, size=(8, 2))
        ]
        emp = empirical_variogram(samples, n_bins=4, max_dist_fraction=1.0)
        assert np.allclose(emp.semivariances, 0.0)

    def test_brute_force_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(4, 11))
            samples = [
                SpatialSample(float(x), float(y), float(v))
                for x, y, v in np.column_stack(
                    [rng.uniform(0, 1, n), rng.uniform(0, 1, n), rng.uniform(0, 30, n)]
                )
            ]
            emp = empirical_variogram(samples, n_bins=5, max_dist_fraction=0.8)
            expected = brute_force_variogram(samples, 5, 0.8)
            assert len(expected) == emp.bin_centers.size
            for (c, g, m), cc, gg, mm in zip(
                expected, emp.bin_centers, emp.semivariances, emp.pair_counts
            ):
                assert cc == pytest.approx(c, abs=1e-12)
                assert gg == pytest.approx(g, rel=1e-12)
                assert mm == m

    def test_bin_centers_increasing(self, rng):
        samples = [
            SpatialSample(float(x), float(y), float(v))
            for x, y, v in np.column_stack(
                [rng.uniform(0, 2, 20), rng.uniform(0, 2, 20), rng.uniform(0, 10, 20)]
            )
        ]
        emp = empirical_variogram(samples, n_bins=8)
        assert np.all(np.diff(emp.bin_centers) > 0)
        assert np.all(emp.pair_counts >= 1)
        assert np.all(emp.semivariances >= 0)

    def test_errors(self):
        with pytest.raises(TooFewSamplesError):
            empirical_variogram([SpatialSample(0, 0, 1.0)])
        with pytest.raises(AllCoincidentError):
            empirical_variogram([SpatialSample(0, 0, 1.0), SpatialSample(0, 0, 2.0)])
        with pytest.raises(ValueError):
            empirical_variogram(
                [SpatialSample(0, 0, 1.0), SpatialSample(1, 0, 2.0)], n_bins=2
            )


class TestModelGamma:
    def test_spherical_reaches_sill_at_range(self):
        m = VariogramModel("spherical", nugget=0.0, sill=10.0, range=1.0)
        assert model_gamma(m, 1.0) == 10.0
        assert model_gamma(m, 5.0) == 10.0

    def test_spherical_closed_form(self):
        m = VariogramModel("spherical", nugget=0.0, sill=10.0, range=1.0)
        assert model_gamma(m, 0.5) == pytest.approx(10.0 * (0.75 - 0.0625))

    def test_zero_at_origin_every_family(self):
        models = [
            VariogramModel("spherical", 2.0, 10.0, 1.0),
            VariogramModel("exponential", 2.0, 10.0, 1.0),
            VariogramModel("gaussian", 2.0, 10.0, 1.0),
            VariogramModel("linear", nugget=2.0, slope=3.0),
        ]
        for m in models:
            assert model_gamma(m, 0.0) == 0.0

    def test_nondecreasing(self, rng):
        h = np.linspace(0.0, 5.0, 400)
        for _ in range(20):
            nugget = float(rng.uniform(0, 5))
            sill = nugget + float(rng.uniform(0, 10))
            a = float(rng.uniform(0.1, 3.0))
            for family in ("spherical", "exponential", "gaussian"):
                g = model_gamma(VariogramModel(family, nugget, sill, a), h)
                assert np.all(np.diff(g[1:]) >= -1e-12)

    def test_practical_range(self):
        for family in ("exponential", "gaussian"):
            m = VariogramModel(family, nugget=0.0, sill=10.0, range=1.0)
            assert model_gamma(m, 3.0 * m.range) >= 0.95 * m.sill

    def test_invalid_models(self):
        with pytest.raises(ValueError):
            VariogramModel("spherical", nugget=5.0, sill=2.0, range=1.0)
        with pytest.raises(ValueError):
            VariogramModel("spherical", nugget=-1.0, sill=2.0, range=1.0)
        with pytest.raises(ValueError):
            VariogramModel("linear", nugget=0.0)
        with pytest.raises(ValueError):
            VariogramModel("circular", nugget=0.0, sill=1.0, range=1.0)


def exact_bins(model, n=15, lo=0.03, hi=0.45, count=30):
    h = np.linspace(lo, hi, n)
    return EmpiricalVariogram(
        bin_centers=h,
        semivariances=np.asarray(model_gamma(model, h), dtype=float),
        pair_counts=np.full(n, count),
    )


class TestFitVariogram:
    def test_exact_spherical_recovery(self):
        truth = VariogramModel("spherical", nugget=22.1, sill=47.0, range=0.28)
        fit = fit_variogram(exact_bins(truth), "spherical")
        assert fit.model.nugget == pytest.approx(22.1, rel=1e-4)
        assert fit.model.sill == pytest.approx(47.0, rel=1e-4)
        assert fit.model.range == pytest.approx(0.28, rel=1e-4)
        assert fit.fit_rmse < 1e-8

    def test_noisy_recovery_within_ten_percent(self):
        truth = VariogramModel("spherical", nugget=3.0, sill=24.45, range=0.28)
        h = np.linspace(0.03, 0.45, 15)
        clean = np.asarray(model_gamma(truth, h), dtype=float)
        for seed in range(10):
            noisy = clean * (1.0 + 0.01 * np.random.default_rng(seed).standard_normal(15))
            emp = EmpiricalVariogram(
                bin_centers=h, semivariances=noisy, pair_counts=np.full(15, 30)
            )
            fit = fit_variogram(emp, "spherical")
            assert fit.model.nugget == pytest.approx(3.0, rel=0.10)
            assert fit.model.sill == pytest.approx(24.45, rel=0.10)
            assert fit.model.range == pytest.approx(0.28, rel=0.10)

    def test_flat_bins_pure_nugget(self):
        h = np.linspace(0.1, 1.0, 8)
        emp = EmpiricalVariogram(
            bin_centers=h, semivariances=np.full(8, 6.5), pair_counts=np.full(8, 10)
        )
        fit = fit_variogram(emp, "spherical")
        assert fit.model.nugget == pytest.approx(6.5, abs=1e-9)
        assert fit.model.sill == pytest.approx(6.5, abs=1e-9)
        assert fit.fit_rmse < 1e-9

    def test_idempotent_on_own_curve(self):
        truth = VariogramModel("exponential", nugget=1.2, sill=9.0, range=0.6)
        first = fit_variogram(exact_bins(truth, hi=1.2), "exponential")
        second = fit_variogram(exact_bins(first.model, hi=1.2), "exponential")
        assert second.model.nugget == pytest.approx(first.model.nugget, abs=1e-6)
        assert second.model.sill == pytest.approx(first.model.sill, abs=1e-6)
        assert second.model.range == pytest.approx(first.model.range, abs=1e-6)

    def test_linear_fit(self):
        truth = VariogramModel("linear", nugget=1.5, slope=4.0)
        fit = fit_variogram(exact_bins(truth), "linear")
        assert fit.model.nugget == pytest.approx(1.5, abs=1e-9)
        assert fit.model.slope == pytest.approx(4.0, abs=1e-9)

    def test_too_few_bins(self):
        emp = EmpiricalVariogram(
            bin_centers=np.array([0.1, 0.2]),
            semivariances=np.array([1.0, 2.0]),
            pair_counts=np.array([3, 3]),
        )
        with pytest.raises(TooFewBinsError):
            fit_variogram(emp, "spherical")


class TestSelectVariogram:
    def test_spherical_generated_selects_spherical(self):
        truth = VariogramModel("spherical", nugget=2.0, sill=30.0, range=0.3)
        assert select_variogram(exact_bins(truth)).model.family == "spherical"

    def test_single_family(self):
        truth = VariogramModel("gaussian", nugget=0.5, sill=12.0, range=0.3)
        fit = select_variogram(exact_bins(truth), families=("linear",))
        assert fit.model.family == "linear"

    def test_reported_rmse_fixture(self):
        # published per-family RMSEs for one week: spherical is minimal
        fits = [
            VariogramFit(VariogramModel("linear", 0.0, slope=1.0), 16.50854, 5),
            VariogramFit(VariogramModel("gaussian", 0.0, 10.0, 1.0), 56.982, 5),
            VariogramFit(VariogramModel("spherical", 0.0, 10.0, 1.0), 0.00170, 5),
            VariogramFit(VariogramModel("exponential", 0.0, 10.0, 1.0), 196.3646, 5),
        ]
        assert best_fit(fits).model.family == "spherical"

    def test_tie_break_follows_precedence(self):
        fits = [
            VariogramFit(VariogramModel("gaussian", 0.0, 10.0, 1.0), 1.0, 5),
            VariogramFit(VariogramModel("exponential", 0.0, 10.0, 1.0), 1.0, 5),
        ]
        assert best_fit(fits).model.family == "exponential"

    def test_empty_families(self):
        truth = VariogramModel("spherical", nugget=2.0, sill=30.0, range=0.3)
        with pytest.raises(ValueError):
            select_variogram(exact_bins(truth), families=())

    def test_serialization_shape(self):
        fit = VariogramFit(VariogramModel("spherical", 1.0, 5.0, 0.4), 0.01, 8)
        d = fit.to_dict()
        assert set(d) == {"family", "nugget", "sill", "range", "fit_rmse"}
        lin = VariogramFit(VariogramModel("linear", 1.0, slope=2.0), 0.02, 8)
        assert set(lin.to_dict()) == {"family", "nugget", "slope", "fit_rmse"}
