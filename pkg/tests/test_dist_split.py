import numpy as np
import pytest
from scipy import stats

from cdbands.core import (
    InsufficientDataError,
    Sample,
    YGrid,
    band_size,
    make_samples,
    split_data,
)
from cdbands.dist_split import (
    calibrate_dist_split,
    dist_split_band,
    dist_split_bands,
)
from cdbands.estimators import DensityCurve, _cdf_rows
from cdbands.simulation import OracleCde, Scenario, sample_scenario


class FixedDensityModel:
    """Returns the same density curve for every feature vector."""

    def __init__(self, grid, values):
        self.grid = grid
        self._curve = DensityCurve.from_raw(grid, values)

    def _rows(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.tile(self._curve.values, (X.shape[0], 1))

    def density_matrix(self, X):
        return self._rows(X)

    def density(self, x):
        return self._curve

    def cdf_matrix(self, X):
        return _cdf_rows(self._rows(X), self.grid.points)

    def cdf(self, x):
        from cdbands.estimators import CdfCurve

        return CdfCurve(self.grid, self.cdf_matrix(x)[0])


def _identity_cdf_model(size=1001):
    # Uniform density on [0, 1] makes the estimated CDF the identity map.
    return FixedDensityModel(YGrid.uniform(0.0, 1.0, size), np.ones(size))


class TestCalibrate:
    def test_identity_cdf_scores(self):
        model = _identity_cdf_model()
        calib = calibrate_dist_split(model, make_samples([[0.0]], [0.3]), alpha=0.2)
        np.testing.assert_allclose(calib.scores, [0.3], atol=1e-9)

    def test_scores_uniform_under_oracle(self):
        scenario = Scenario("homoscedastic", d=1)
        data = sample_scenario(scenario, 2000, seed=8)
        calib = calibrate_dist_split(OracleCde(scenario), data, alpha=0.1)
        stat = stats.kstest(calib.scores, "uniform").statistic
        assert stat < 0.05

    def test_targets_below_grid_clamp_to_zero(self):
        model = _identity_cdf_model()
        calib = calibrate_dist_split(
            model, make_samples([[0.0], [1.0]], [-5.0, -2.0]), alpha=0.2
        )
        np.testing.assert_allclose(calib.scores, [0.0, 0.0])

    def test_empty_calibration(self):
        with pytest.raises(InsufficientDataError):
            calibrate_dist_split(_identity_cdf_model(), [], alpha=0.1)


class TestBand:
    def test_hand_enumerated_toy(self):
        # Scores 0.05, 0.15, ..., 0.95 on the identity CDF; alpha = 0.2.
        # Lower cutoff index floor(11 * 0.1) = 1 -> 0.05; upper
        # ceil(11 * 0.9) = 10 -> 0.95.
        model = _identity_cdf_model()
        ys = np.arange(0.05, 1.0, 0.1)
        calib = calibrate_dist_split(model, make_samples(np.zeros((10, 1)), ys), 0.2)
        assert calib.t_lo == pytest.approx(0.05)
        assert calib.t_hi == pytest.approx(0.95)
        band = dist_split_band(calib, np.array([0.0]))
        (lo, hi), = band.intervals
        assert lo == pytest.approx(0.05, abs=1e-6)
        assert hi == pytest.approx(0.95, abs=1e-6)

    def test_small_alpha_fills_grid(self):
        model = _identity_cdf_model()
        rng = np.random.default_rng(0)
        calib = calibrate_dist_split(
            model, make_samples(np.zeros((500, 1)), rng.random(500)), alpha=0.002
        )
        band = dist_split_band(calib, np.array([0.0]))
        assert band_size(band) > 0.98

    def test_oracle_recovers_normal_quantiles(self):
        # With the exact CDF injected there is nothing to fit, so all 4000
        # samples calibrate.  The 0.05 tolerance sits near the Monte-Carlo
        # noise of the score quantiles at this size; the seed is fixed.
        scenario = Scenario("homoscedastic", d=1)
        data = sample_scenario(scenario, 4000, seed=0)
        calib = calibrate_dist_split(OracleCde(scenario), data, alpha=0.1)
        for x1 in (-2.0, 0.0, 3.0):
            band = dist_split_band(calib, np.array([x1]))
            (lo, hi), = band.intervals
            assert lo == pytest.approx(x1 - 1.6449, abs=0.05)
            assert hi == pytest.approx(x1 + 1.6449, abs=0.05)

    def test_single_interval_always(self):
        scenario = Scenario("bimodal", d=1)
        data = sample_scenario(scenario, 300, seed=3)
        calib = calibrate_dist_split(OracleCde(scenario), data, alpha=0.1)
        X = np.linspace(-1.4, 1.4, 20)[:, None]
        for band in dist_split_bands(calib, X):
            assert len(band.intervals) == 1

    def test_monotone_in_alpha(self):
        scenario = Scenario("homoscedastic", d=1)
        data = sample_scenario(scenario, 500, seed=5)
        sizes = []
        for alpha in (0.05, 0.1, 0.2, 0.4):
            calib = calibrate_dist_split(OracleCde(scenario), data, alpha=alpha)
            sizes.append(band_size(dist_split_band(calib, np.array([0.0]))))
        assert all(b <= a + 1e-9 for a, b in zip(sizes, sizes[1:]))

    def test_batch_matches_single(self):
        scenario = Scenario("heteroscedastic", d=1)
        data = sample_scenario(scenario, 200, seed=6)
        calib = calibrate_dist_split(OracleCde(scenario), data, alpha=0.1)
        X = np.array([[-1.0], [0.5], [2.0]])
        batch = dist_split_bands(calib, X)
        singles = [dist_split_band(calib, x) for x in X]
        for a, b in zip(batch, singles):
            assert a.intervals == b.intervals


class TestCoverage:
    def test_marginal_coverage_bound_small(self):
        # Downscaled Monte-Carlo check of the finite-sample coverage window:
        # coverage of (floor, ceil)-indexed cutoffs is (k_hi - k_lo)/(m+1).
        rng = np.random.default_rng(21)
        m, alpha, reps = 99, 0.2, 3000
        hits = 0
        for _ in range(reps):
            scores = rng.random(m)
            s = np.sort(scores)
            k_lo = int(np.floor((m + 1) * alpha / 2))
            k_hi = int(np.ceil((m + 1) * (1 - alpha / 2)))
            u = rng.random()
            hits += s[k_lo - 1] <= u <= s[k_hi - 1]
        p_hat = hits / reps
        se = np.sqrt(alpha * (1 - alpha) / reps)
        assert 1 - alpha - 3 * se <= p_hat <= 1 - alpha + 1 / (m + 1) + 3 * se
