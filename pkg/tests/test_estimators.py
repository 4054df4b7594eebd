import numpy as np
import pytest
from scipy import stats

from cdbands.core import InsufficientDataError, YGrid, make_samples
from cdbands.estimators import (
    CdeModel,
    DensityCurve,
    MAD_FLOOR,
    SoftmaxClassifier,
    cde_cdf,
    cde_density,
    cdf_inverse,
    cdf_value,
    fit_cde,
    fit_classifier,
    fit_mad,
    fit_quantile,
    fit_regression,
    predict_mad,
    predict_probs,
    predict_quantile,
    predict_regression,
)


def _uniform_density(lo=0.0, hi=1.0, size=501):
    grid = YGrid.uniform(lo, hi, size)
    return DensityCurve.from_raw(grid, np.ones(size))


def _normal_density(size=1001, span=6.0):
    grid = YGrid.uniform(-span, span, size)
    return DensityCurve.from_raw(grid, stats.norm.pdf(grid.points))


class TestDensityCurve:
    def test_normalization_enforced(self):
        grid = YGrid.uniform(0, 1, 101)
        with pytest.raises(ValueError):
            DensityCurve(grid, np.full(101, 2.0))
        curve = DensityCurve.from_raw(grid, np.full(101, 2.0))
        assert np.trapezoid(curve.values, grid.points) == pytest.approx(1.0)

    def test_rejects_negative(self):
        grid = YGrid.uniform(0, 1, 11)
        vals = np.full(11, 1.0)
        vals[3] = -0.5
        with pytest.raises(ValueError):
            DensityCurve.from_raw(grid, vals)


class TestFitCde:
    def test_single_training_point(self):
        model = fit_cde(make_samples([[0.0]], [2.0]), k=1, bandwidth=0.5,
                        grid=YGrid.uniform(-3, 7, 501))
        curve = model.density(np.array([5.0]))
        mode = model.grid.points[np.argmax(curve.values)]
        assert mode == pytest.approx(2.0, abs=model.grid.spacing)
        expected = stats.norm.pdf(model.grid.points, 2.0, 0.5)
        assert np.max(np.abs(curve.values - expected)) < 1e-3

    def test_close_to_analytic_normal(self):
        # Targets independent of x: the estimate should track the true pdf.
        rng = np.random.default_rng(1)
        X = rng.uniform(-5, 5, size=(2000, 1))
        y = rng.standard_normal(2000)
        model = fit_cde(make_samples(X, y), k=500)
        pts = model.grid.points
        mask = (pts >= -3) & (pts <= 3)
        for q in (0.0, 2.0):
            curve = cde_density(model, np.array([q]))
            sup = np.max(np.abs(curve.values[mask] - stats.norm.pdf(pts[mask])))
            assert sup < 0.05

    def test_duplicate_targets_still_normalized(self):
        model = fit_cde(make_samples(np.arange(10.0)[:, None], np.full(10, 1.0)), k=5)
        curve = model.density(np.array([3.0]))
        assert np.trapezoid(curve.values, model.grid.points) == pytest.approx(1.0, abs=1e-6)

    def test_invalid_args(self):
        train = make_samples([[0.0], [1.0]], [0.0, 1.0])
        with pytest.raises(InsufficientDataError):
            fit_cde([])
        with pytest.raises(ValueError):
            fit_cde(train, k=3)
        with pytest.raises(ValueError):
            fit_cde(train, k=1, bandwidth=-1.0)

    def test_dimension_mismatch(self):
        model = fit_cde(make_samples([[0.0, 0.0], [1.0, 1.0]], [0.0, 1.0]), k=1)
        with pytest.raises(ValueError):
            model.density(np.array([0.0]))


class TestCdeDensity:
    def test_degenerate_neighbor_set(self):
        X = np.arange(6.0)[:, None] * 0.01
        model = fit_cde(make_samples(X, np.zeros(6)), k=6, bandwidth=0.5,
                        grid=YGrid.uniform(-4, 4, 401))
        curve = model.density(np.array([0.0]))
        mode = model.grid.points[np.argmax(curve.values)]
        assert abs(mode) <= model.grid.spacing / 2 + 1e-12

    def test_bimodal_neighbor_targets(self):
        k = 10
        X = np.arange(k, dtype=float)[:, None] * 0.01
        y = np.array([-2.0] * (k // 2) + [2.0] * (k // 2))
        model = fit_cde(make_samples(X, y), k=k, bandwidth=0.5,
                        grid=YGrid.uniform(-5, 5, 501))
        vals = model.density(np.array([0.0])).values
        peaks = [
            model.grid.points[i]
            for i in range(1, len(vals) - 1)
            if vals[i] > vals[i - 1] and vals[i] >= vals[i + 1]
        ]
        assert len(peaks) == 2
        assert peaks[0] == pytest.approx(-2.0, abs=0.1)
        assert peaks[1] == pytest.approx(2.0, abs=0.1)

    def test_integral_one(self):
        rng = np.random.default_rng(2)
        model = fit_cde(make_samples(rng.normal(size=(40, 2)), rng.normal(size=40)))
        for _ in range(5):
            curve = model.density(rng.normal(size=2))
            assert np.trapezoid(curve.values, model.grid.points) == pytest.approx(1.0, abs=1e-6)

    def test_x_invariant_when_k_equals_n(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-5, 5, size=(50, 1))
        model = fit_cde(make_samples(X, rng.standard_normal(50)), k=50)
        d1 = model.density(np.array([-3.0])).values
        d2 = model.density(np.array([4.0])).values
        np.testing.assert_allclose(d1, d2)


class TestCdeCdf:
    def test_uniform(self):
        cdf = cde_cdf(_uniform_density())
        assert cdf_value(cdf, 0.5) == pytest.approx(0.5, abs=0.01)

    def test_normal_mode_at_half(self):
        cdf = cde_cdf(_normal_density())
        assert cdf_value(cdf, 0.0) == pytest.approx(0.5, abs=0.01)

    def test_nondecreasing(self):
        rng = np.random.default_rng(3)
        grid = YGrid.uniform(-1, 1, 101)
        curve = DensityCurve.from_raw(grid, rng.random(101))
        cdf = cde_cdf(curve)
        assert np.all(np.diff(cdf.values) >= 0)
        assert cdf.values[-1] == pytest.approx(1.0)


class TestCdfInverse:
    def test_uniform(self):
        cdf = cde_cdf(_uniform_density())
        assert cdf_inverse(cdf, 0.25) == pytest.approx(0.25, abs=0.01)

    def test_round_trip(self):
        cdf = cde_cdf(_normal_density())
        for y in (-1.5, -0.2, 0.8, 2.0):
            assert cdf_inverse(cdf, cdf_value(cdf, y)) == pytest.approx(
                y, abs=cdf.grid.spacing
            )

    def test_normal_quantile(self):
        cdf = cde_cdf(_normal_density())
        assert cdf_inverse(cdf, 0.95) == pytest.approx(1.6449, abs=0.02)

    def test_extremes(self):
        cdf = cde_cdf(_normal_density())
        assert cdf_inverse(cdf, 0.0) == cdf.grid.points[0]
        assert cdf_inverse(cdf, 1.0) == cdf.grid.points[-1]


class TestKnnRegression:
    def test_constant_targets(self):
        model = fit_regression(make_samples(np.arange(10.0)[:, None], np.full(10, 4.0)), k=3)
        assert predict_regression(model, np.array([2.5])) == pytest.approx(4.0)

    def test_noiseless_linear(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-5, 5, size=(2000, 1))
        model = fit_regression(make_samples(X, X[:, 0]), k=20)
        assert abs(predict_regression(model, np.array([0.0]))) < 0.05

    def test_k_equals_n_gives_global_mean(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 1))
        y = rng.normal(size=30)
        model = fit_regression(make_samples(X, y), k=30)
        assert predict_regression(model, np.array([9.9])) == pytest.approx(y.mean())


class TestKnnMad:
    def test_noiseless_floors(self):
        X = np.arange(20.0)[:, None]
        train = make_samples(X, X[:, 0])
        reg = fit_regression(train, k=1)
        mad = fit_mad(train, reg, k=1)
        assert predict_mad(mad, np.array([5.0])) == pytest.approx(MAD_FLOOR)

    def test_heteroscedastic_monotone(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(-5, 5, size=(3000, 1))
        y = rng.normal(0, 1 + np.abs(X[:, 0]))
        train = make_samples(X, y)
        reg = fit_regression(train)
        mad = fit_mad(train, reg)
        assert predict_mad(mad, np.array([4.0])) > predict_mad(mad, np.array([0.0]))

    def test_constant_residual_magnitude(self):
        X = np.linspace(-1, 1, 50)[:, None]
        y = np.where(np.arange(50) % 2 == 0, 2.0, -2.0)
        train = make_samples(X, y)
        reg = fit_regression(train, k=50)  # global mean = 0
        mad = fit_mad(train, reg, k=50)
        assert predict_mad(mad, np.array([0.3])) == pytest.approx(2.0)


class TestKnnQuantile:
    def test_median_symmetric(self):
        X = np.zeros((9, 1))
        y = np.arange(-4.0, 5.0)
        model = fit_quantile(make_samples(X, y), k=9)
        assert predict_quantile(model, np.array([0.0]), 0.5) == pytest.approx(0.0)

    def test_order_statistic(self):
        model = fit_quantile(make_samples(np.zeros((100, 1)), np.arange(1.0, 101.0)), k=100)
        assert predict_quantile(model, np.array([0.0]), 0.9) == 91.0

    def test_p_zero_gives_min(self):
        model = fit_quantile(make_samples(np.zeros((10, 1)), np.arange(3.0, 13.0)), k=10)
        assert predict_quantile(model, np.array([0.0]), 0.0) == 3.0


class TestClassifier:
    def test_single_class_concentrates(self):
        rng = np.random.default_rng(11)
        train = make_samples(rng.normal(size=(50, 1)), np.full(50, 2.0))
        model = fit_classifier(train, 4)
        probs = model.predict_probs_batch(np.stack([s.features for s in train]))
        assert probs[:, 2].min() >= 0.99

    def test_separated_two_class(self):
        rng = np.random.default_rng(4)
        X = np.concatenate([rng.normal(-2, 0.5, 100), rng.normal(2, 0.5, 100)])[:, None]
        y = np.concatenate([np.zeros(100), np.ones(100)])
        model = fit_classifier(make_samples(X, y), 2)
        acc = (model.predict_probs_batch(X).argmax(axis=1) == y).mean()
        assert acc >= 0.95

    def test_probs_sum_to_one(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 3, size=60)
        model = fit_classifier(make_samples(X, y.astype(float)), 3, steps=200)
        probs = model.predict_probs_batch(rng.normal(size=(20, 3)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(probs > 0)

    def test_shift_invariance(self):
        model = SoftmaxClassifier(
            np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 0.0]]),
            np.array([0.3, -0.2, 0.0]),
        )
        shifted = SoftmaxClassifier(model.coef + np.array([5.0, -3.0]), model.intercept + 2.0)
        x = np.array([0.7, -1.3])
        np.testing.assert_allclose(predict_probs(model, x), predict_probs(shifted, x))

    def test_label_validation(self):
        train = make_samples(np.zeros((5, 1)), np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
        with pytest.raises(ValueError):
            fit_classifier(train, 3)
