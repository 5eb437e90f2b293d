"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the
inline PASS lines as well). Tolerances are pinned in the assertions.
"""

import math
import time

import numpy as np
import pytest

from airqstat.forest import (
    FeatureRow,
    ForestConfig,
    ForestPredictor,
    RfkPredictor,
    fit_forest,
    rfk_interpolate,
)
from airqstat.geometry import SpatialSample
from airqstat.intervention import DidPanel, fit_did
from airqstat.interpolation import (
    IdwParams,
    best_power,
    idw_interpolate,
    idw_select_power,
    kfold_cv,
    ok_weights,
    CvConfig,
)
from airqstat.model import ActivityZone, pearson_skewness
from airqstat.spatial import InverseDistance, build_weights, morans_i, morans_test
from airqstat.timeseries import decompose_additive, mann_kendall, seasonal_influence
from airqstat.variogram import (
    EmpiricalVariogram,
    VariogramFit,
    VariogramModel,
    best_fit,
    fit_variogram,
    model_gamma,
)
from conftest import make_station, multiplicative_panel

from test_interpolation import REPORTED_POWER_SWEEP, idw_direct, ok_oracle, random_samples
from test_spatial import brute_force_moran


def _report(criterion, label, started):
    print(f"ACCEPTANCE {criterion} {label}: PASS ({time.time() - started:.1f}s)")


def test_c01_skewness_consistency():
    t0 = time.time()
    got = pearson_skewness(mean=94.12, mode=45.044, sd=75.18)
    assert got == pytest.approx(0.6527736, abs=1e-4)
    _report(1, "skewness-consistency", t0)


def test_c02_idw_power_selection(rng):
    t0 = time.time()
    # argmin rule applied to the published 20-row sweep
    assert best_power(REPORTED_POWER_SWEEP) == 0.7
    # deterministic CV curves on a synthetic field
    samples = random_samples(rng, 30)
    cv = CvConfig(k=10, seed=21)
    first = idw_select_power(samples, cv=cv)
    second = idw_select_power(samples, cv=cv)
    assert first == second
    assert len(first[1]) == 20
    assert time.time() - t0 < 5.0
    _report(2, "idw-power-selection", t0)


def test_c03_variogram_selection_and_recovery():
    t0 = time.time()
    # selection rule on the published per-family RMSE fixture
    fits = [
        VariogramFit(VariogramModel("linear", 0.0, slope=1.0), 16.50854, 5),
        VariogramFit(VariogramModel("gaussian", 0.0, 10.0, 1.0), 56.982, 5),
        VariogramFit(VariogramModel("spherical", 0.0, 10.0, 1.0), 0.00170, 5),
        VariogramFit(VariogramModel("exponential", 0.0, 10.0, 1.0), 196.3646, 5),
    ]
    assert best_fit(fits).model.family == "spherical"

    h = np.linspace(0.03, 0.45, 15)
    counts = np.full(15, 30)
    truth = VariogramModel("spherical", nugget=22.1, sill=47.0, range=0.28)
    emp = EmpiricalVariogram(h, np.asarray(model_gamma(truth, h)), counts)
    fit = fit_variogram(emp, "spherical")
    assert fit.model.nugget == pytest.approx(22.1, rel=1e-4)
    assert fit.model.sill == pytest.approx(47.0, rel=1e-4)
    assert fit.model.range == pytest.approx(0.28, rel=1e-4)
    assert fit.fit_rmse < 1e-8

    noisy_truth = VariogramModel("spherical", nugget=3.0, sill=24.45, range=0.28)
    clean = np.asarray(model_gamma(noisy_truth, h))
    for seed in range(10):
        noisy = clean * (1.0 + 0.01 * np.random.default_rng(seed).standard_normal(15))
        noisy_fit = fit_variogram(EmpiricalVariogram(h, noisy, counts), "spherical")
        assert noisy_fit.model.nugget == pytest.approx(3.0, rel=0.10)
        assert noisy_fit.model.sill == pytest.approx(24.45, rel=0.10)
        assert noisy_fit.model.range == pytest.approx(0.28, rel=0.10)
    assert time.time() - t0 < 10.0
    _report(3, "variogram-selection-recovery", t0)


def test_c04_kriging_exactness_and_unbiasedness():
    t0 = time.time()
    rng = np.random.default_rng(4)
    model = VariogramModel("spherical", nugget=0.0, sill=12.0, range=0.6)
    samples = random_samples(rng, 25)
    from airqstat.interpolation import ok_interpolate

    for s in samples:
        assert ok_interpolate(samples, (s.lon, s.lat), model) == pytest.approx(
            s.value, abs=1e-6
        )
    for _ in range(100):
        target = (float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        kw = ok_weights(samples, target, model)
        assert abs(kw.weights.sum() - 1.0) < 1e-9
    assert time.time() - t0 < 5.0
    _report(4, "kriging-exactness-unbiasedness", t0)


def test_c05_interpolator_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(5)
    model_params = (0.0, 10.0, 1.0)
    model = VariogramModel("spherical", *model_params)
    # kriging weights vs independent dense pseudoinverse solve, n <= 6
    for _ in range(40):
        n = int(rng.integers(2, 7))
        samples = random_samples(rng, n)
        target = (float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        kw = ok_weights(samples, target, model)
        expected_w, _ = ok_oracle(samples, target, *model_params)
        assert np.allclose(kw.weights, expected_w, atol=1e-8)
    # IDW vs direct formula
    for _ in range(40):
        samples = random_samples(rng, int(rng.integers(2, 7)))
        target = (float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        p = float(rng.uniform(0.2, 3.0))
        got = idw_interpolate(samples, target, IdwParams(power=p))
        assert got == pytest.approx(idw_direct(samples, target, p), abs=1e-12)
    # Moran's I vs brute-force double sum, n <= 6
    for _ in range(40):
        n = int(rng.integers(4, 7))
        stations = [
            make_station(
                f"s{i}",
                28.0 + float(rng.uniform(0, 0.5)),
                77.0 + float(rng.uniform(0, 0.5)),
            )
            for i in range(n)
        ]
        w = build_weights(stations, InverseDistance(1.0, 500.0))
        values = rng.uniform(0, 10, n)
        assert morans_i(values, w) == pytest.approx(
            brute_force_moran(values, w.weights), abs=1e-12
        )
    # Mann-Kendall vs exhaustive pair enumeration, series length <= 8
    for _ in range(300):
        n = int(rng.integers(3, 9))
        y = rng.integers(0, 5, n).astype(float)
        if np.all(y == y[0]):
            continue
        s = 0
        tied = 0
        for i in range(n):
            for j in range(i + 1, n):
                if y[j] > y[i]:
                    s += 1
                elif y[j] < y[i]:
                    s -= 1
                else:
                    tied += 1
        n0 = n * (n - 1) / 2
        result = mann_kendall(y)
        assert result.s_statistic == s
        assert result.tau == pytest.approx(s / math.sqrt(n0 * (n0 - tied)), abs=1e-12)
    _report(5, "interpolator-oracle-equivalence", t0)


def _cells_panel(rng, beta, reps, noise_sd):
    b0, b1, b2, b3 = beta
    outcome, treated, group = [], [], []
    for i in (0, 1):
        for z in (0, 1):
            mean = b0 + b1 * i + b2 * z + b3 * i * z
            for _ in range(reps):
                value = mean if noise_sd == 0 else mean + rng.normal(0, noise_sd)
                outcome.append(value)
                treated.append(i)
                group.append(z)
    return DidPanel(
        outcome=np.array(outcome),
        treated_time=np.array(treated),
        group=np.array(group),
    )


def test_c06_did_recovery():
    t0 = time.time()
    rng = np.random.default_rng(6)
    # noiseless planted coefficients, including the published transport value
    planted = (10.0, 2.0, -3.0, -8.13)
    fit = fit_did(_cells_panel(rng, planted, reps=5, noise_sd=0.0))
    assert fit.residual_variance < 1e-18
    assert np.allclose(fit.beta, planted, atol=1e-9)

    # 95% CI coverage of beta3 over 500 seeded Gaussian replicates
    from scipy import stats

    beta = (50.0, -4.0, 1.5, -2.78)
    covered = 0
    n_rep = 500
    for seed in range(n_rep):
        rep_rng = np.random.default_rng(1000 + seed)
        rep_fit = fit_did(_cells_panel(rep_rng, beta, reps=100, noise_sd=1.0))
        half = stats.t.ppf(0.975, rep_fit.dof) * rep_fit.se[3]
        if abs(rep_fit.beta[3] - beta[3]) <= half:
            covered += 1
    rate = covered / n_rep
    assert 0.92 <= rate <= 0.98, f"coverage {rate:.3f} outside 95% +/- 3%"
    assert time.time() - t0 < 30.0
    _report(6, "did-recovery", t0)


def _simulated_field(coords, sill, rng_deg, nugget, rng):
    model = VariogramModel("spherical", nugget=nugget, sill=sill, range=rng_deg)
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    cov = sill - np.asarray(model_gamma(model, d))
    np.fill_diagonal(cov, sill)
    chol = np.linalg.cholesky(cov + 1e-9 * np.eye(len(coords)))
    return chol @ rng.standard_normal(len(coords))


def test_c07_rfk_dominance():
    t0 = time.time()
    names = ("no", "east", "north")
    wins = 0
    for trial in range(10):
        rng = np.random.default_rng(100 + trial)
        n = 60
        coords = rng.uniform(0, 1, (n, 2))
        covariate = rng.uniform(0, 2, n)
        field = _simulated_field(coords, sill=4.0, rng_deg=0.5, nugget=0.2, rng=rng)
        y = 3.0 * covariate + field + rng.normal(0, 0.3, n)
        features = {}
        samples = []
        for i in range(n):
            lon, lat = float(coords[i, 0]), float(coords[i, 1])
            features[(lon, lat)] = FeatureRow(east=lon, north=lat, no=float(covariate[i]))
            samples.append(SpatialSample(lon, lat, float(y[i])))
        config = ForestConfig(ntree=120, min_leaf=3, seed=trial)
        rfk_rmse = kfold_cv(
            samples, 10, RfkPredictor(features, config, feature_names=names), seed=trial
        ).rmse
        forest_rmse = kfold_cv(
            samples, 10, ForestPredictor(features, config, feature_names=names), seed=trial
        ).rmse
        wins += rfk_rmse <= forest_rmse
    assert wins >= 8, f"RFK won only {wins}/10 trials"

    # all-zero residuals: RFK collapses to the forest prediction
    rng = np.random.default_rng(0)
    rows = [
        (FeatureRow(east=float(e), north=float(n2)), 4.2)
        for e, n2 in rng.uniform(0, 1, (20, 2))
    ]
    query = [FeatureRow(east=0.3, north=0.4)]
    config = ForestConfig(ntree=30, seed=1)
    rfk_pred = rfk_interpolate(rows, query, config, feature_names=("east", "north"))
    forest_pred = fit_forest(rows, config, ("east", "north")).predict_rows(query)
    assert np.allclose(rfk_pred, forest_pred, atol=1e-9)
    assert time.time() - t0 < 120.0
    _report(7, "rfk-dominance", t0)


def test_c08_null_calibrations():
    t0 = time.time()
    # Moran permutation test on an exchangeable null
    rng = np.random.default_rng(8)
    stations = [
        make_station(
            f"s{i}",
            28.0 + float(rng.uniform(0, 0.5)),
            77.0 + float(rng.uniform(0, 0.5)),
        )
        for i in range(25)
    ]
    w = build_weights(stations, InverseDistance(1.0, 100.0))
    rejections = 0
    n_trials = 500
    for trial in range(n_trials):
        values = rng.standard_normal(25)
        result = morans_test(values, w, 999, seed=trial)
        rejections += result.p_value < 0.05
    moran_rate = rejections / n_trials
    assert 0.03 <= moran_rate <= 0.07, f"moran null rejection {moran_rate:.3f}"

    # Mann-Kendall on an i.i.d. null
    rejections = 0
    for trial in range(n_trials):
        series = rng.standard_normal(100)
        rejections += mann_kendall(series).p_value < 0.05
    mk_rate = rejections / n_trials
    assert 0.03 <= mk_rate <= 0.07, f"mk null rejection {mk_rate:.3f}"
    assert time.time() - t0 < 120.0
    _report(8, "null-calibrations", t0)


def test_c09_decomposition_identity(seasonal_multipliers):
    t0 = time.time()
    rng = np.random.default_rng(9)
    for _ in range(50):
        period = int(rng.integers(2, 13))
        n = int(rng.integers(2 * period, 8 * period))
        y = rng.uniform(-100, 100, n)
        out = decompose_additive(y, period)
        defined = np.isfinite(out.trend)
        recon = out.trend + out.seasonal + out.remainder
        assert np.allclose(recon[defined], y[defined], atol=1e-9)

    panel = multiplicative_panel(seasonal_multipliers)
    influence = seasonal_influence(panel, "pm25", ActivityZone.TRANSPORT)
    counts = influence.ratio_counts
    total = sum(counts.values())
    weighted_mult = sum(seasonal_multipliers[s] * counts[s] for s in counts) / total
    for season, multiplier in seasonal_multipliers.items():
        recovered = (influence.deviations[season] + 100.0) / 100.0 * weighted_mult
        assert recovered == pytest.approx(multiplier, rel=0.02)
    _report(9, "decomposition-identity", t0)


def test_c10_end_to_end_determinism(tmp_path):
    t0 = time.time()
    from airqstat.cli import main

    fixture = tmp_path / "fixture"
    code = main(["synth-fixture", "--seed", "42", "--out-dir", str(fixture)])
    assert code == 0
    args = [
        "report",
        "--stations", str(fixture / "stations.csv"),
        "--obs", str(fixture / "observations.csv"),
        "--ntree", "100",
        "--seed", "17",
    ]
    outputs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        assert main(args + ["--out-dir", str(out)]) == 0
        outputs.append(out)
    for filename in ("report.json", "report.md"):
        a = (outputs[0] / filename).read_bytes()
        b = (outputs[1] / filename).read_bytes()
        assert a == b, f"{filename} differs between identical runs"
    assert time.time() - t0 < 300.0
    _report(10, "end-to-end-determinism", t0)
