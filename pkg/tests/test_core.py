import numpy as np
import pytest

from cdbands.core import (
    Band,
    EMPTY_BAND,
    InsufficientDataError,
    LabelSet,
    Sample,
    YGrid,
    band_contains,
    band_size,
    empirical_quantile,
    empirical_quantile_lower,
    make_samples,
    merge_intervals,
    split_data,
)


def _dataset(n, d=1, seed=0):
    rng = np.random.default_rng(seed)
    return make_samples(rng.normal(size=(n, d)), rng.normal(size=n))


class TestSplitData:
    def test_cardinality(self):
        data = _dataset(4)
        pair = split_data(data, 0.5, seed=7)
        assert len(pair.train) == 2
        assert len(pair.calibration) == 2
        train_ids = {id(s) for s in pair.train}
        calib_ids = {id(s) for s in pair.calibration}
        assert train_ids.isdisjoint(calib_ids)

    def test_deterministic(self):
        data = _dataset(20)
        a = split_data(data, 0.3, seed=11)
        b = split_data(data, 0.3, seed=11)
        assert [id(s) for s in a.train] == [id(s) for s in b.train]
        assert [id(s) for s in a.calibration] == [id(s) for s in b.calibration]

    def test_is_partition(self):
        data = _dataset(13)
        pair = split_data(data, 0.4, seed=3)
        combined = {id(s) for s in pair.train} | {id(s) for s in pair.calibration}
        assert combined == {id(s) for s in data}

    def test_train_membership_roughly_uniform(self):
        # Over many seeds each index should land in train about half the time.
        data = _dataset(100)
        counts = np.zeros(100)
        index_of = {id(s): i for i, s in enumerate(data)}
        for seed in range(1000):
            pair = split_data(data, 0.5, seed=seed)
            for s in pair.train:
                counts[index_of[id(s)]] += 1
        assert np.all(np.abs(counts - 500) <= 50)

    def test_bad_ratio(self):
        data = _dataset(4)
        with pytest.raises(ValueError):
            split_data(data, 0.0, seed=0)
        with pytest.raises(ValueError):
            split_data(data, 1.0, seed=0)

    def test_too_small(self):
        with pytest.raises(InsufficientDataError):
            split_data(_dataset(1), 0.5, seed=0)


class TestEmpiricalQuantile:
    def test_hand_enumerated(self):
        scores = np.arange(0.05, 1.0, 0.1)  # 0.05, 0.15, ..., 0.95
        # k = ceil(11 * 0.1) = 2 -> second smallest
        assert empirical_quantile(scores, 0.1) == pytest.approx(0.15)

    def test_single_element(self):
        for alpha in (0.01, 0.5, 0.99):
            assert empirical_quantile([3.25], alpha) == 3.25

    def test_sort_and_index_oracle(self):
        scores = np.arange(1, 101)
        # k = ceil(101 * 0.5) = 51
        assert empirical_quantile(scores, 0.5) == 51

    def test_monotone_in_alpha_and_member(self):
        rng = np.random.default_rng(5)
        scores = rng.normal(size=37)
        alphas = np.linspace(0.02, 0.98, 25)
        values = [empirical_quantile(scores, a) for a in alphas]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert all(v in scores for v in values)

    def test_lower_convention(self):
        scores = np.arange(0.05, 1.0, 0.1)
        # k = floor(11 * 0.1) = 1 -> smallest
        assert empirical_quantile_lower(scores, 0.1) == pytest.approx(0.05)
        # floor never exceeds ceil
        for alpha in np.linspace(0.05, 0.95, 19):
            lo = empirical_quantile_lower(scores, alpha)
            hi = empirical_quantile(scores, alpha)
            assert lo <= hi

    def test_empty_scores(self):
        with pytest.raises(InsufficientDataError):
            empirical_quantile([], 0.5)

    def test_uniform_coverage_bound(self):
        # P(fresh uniform <= quantile) must land in [alpha, alpha + 1/(m+1)].
        rng = np.random.default_rng(42)
        m, alpha, reps = 24, 0.3, 4000
        hits = 0
        for _ in range(reps):
            scores = rng.random(m)
            q = empirical_quantile(scores, alpha)
            hits += rng.random() <= q
        p_hat = hits / reps
        inflation = 1.0 / (m + 1)
        se = np.sqrt(alpha * (1 - alpha) / reps)
        assert alpha - 3 * se <= p_hat <= alpha + inflation + 3 * se


class TestBand:
    def test_empty(self):
        assert band_size(EMPTY_BAND) == 0.0
        assert not band_contains(EMPTY_BAND, 0.0)

    def test_unit_interval(self):
        band = Band(((0.0, 1.0),))
        assert band_size(band) == 1.0

    def test_additive(self):
        band = Band(((0.0, 1.0), (3.0, 4.5)))
        assert band_size(band) == pytest.approx(2.5)

    def test_contains_closed_endpoints(self):
        band = Band(((0.0, 1.0),))
        assert band_contains(band, 0.5)
        assert band_contains(band, 1.0)
        assert band_contains(band, 0.0)

    def test_contains_gap(self):
        band = Band(((0.0, 1.0), (3.0, 4.0)))
        assert not band_contains(band, 2.0)

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            Band(((0.0, 2.0), (1.0, 3.0)))
        with pytest.raises(ValueError):
            Band(((0.0, 1.0), (1.0, 2.0)))  # touching counts as overlap
        with pytest.raises(ValueError):
            Band(((2.0, 1.0),))

    def test_merge_intervals(self):
        merged = merge_intervals([(3.0, 4.0), (0.0, 1.0), (1.05, 2.0)], gap=0.1)
        assert merged == ((0.0, 2.0), (3.0, 4.0))
        # merging never increases total length beyond the sum
        a = Band(((0.0, 1.0),))
        b = Band(((0.5, 2.0),))
        union = Band(merge_intervals(a.intervals + b.intervals, gap=0.0))
        assert band_size(union) <= band_size(a) + band_size(b)


class TestLabelSet:
    def test_sorted_unique(self):
        ls = LabelSet((0, 2, 5))
        assert ls.labels == (0, 2, 5)
        assert ls.size == 3
        assert ls.contains(2)
        assert not ls.contains(1)

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            LabelSet((2, 1))
        with pytest.raises(ValueError):
            LabelSet((-1,))
        with pytest.raises(ValueError):
            LabelSet((1, 1))


class TestYGrid:
    def test_uniform(self):
        grid = YGrid.uniform(0.0, 1.0, 11)
        assert grid.spacing == pytest.approx(0.1)
        assert grid.size == 11

    def test_rejects_nonuniform(self):
        with pytest.raises(ValueError):
            YGrid(np.array([0.0, 1.0, 3.0]))
        with pytest.raises(ValueError):
            YGrid(np.array([0.0, 0.0, 1.0]))


class TestSample:
    def test_feature_vector(self):
        s = Sample(np.array([1.0, 2.0]), 3.0)
        assert s.features.shape == (2,)
        assert s.target == 3.0

    def test_scalar_feature_promoted(self):
        s = Sample(1.5, 0.0)
        assert s.features.shape == (1,)
