import itertools
import math

import numpy as np
import pytest

from ntcpfields.errors import CapacityError, ParameterError, ShapeError
from ntcpfields.lattice_fields import (
    FieldSample,
    IidBernoulli,
    LatticeCube,
    MovingWindowLevels,
    MovingWindowThreshold,
    covariance_at_lag,
    derive_seed,
    derive_seeds,
    load_sample,
    model_from_dict,
    model_mean,
    model_sigma2,
    model_to_dict,
    sample_field,
    sample_fields_batch,
    save_sample,
)

MAJORITY = MovingWindowThreshold(window_radius=1, theta=0.5, k_min=2)


def brute_force_moments(model, d, lag):
    """Independent oracle: sum over every noise configuration of the union
    of the two windows, bit by bit."""
    m = model.window_radius
    offsets = list(itertools.product(range(-m, m + 1), repeat=d))
    w0 = [tuple(o) for o in offsets]
    w1 = [tuple(l + o for l, o in zip(lag, off)) for off in offsets]
    sites = sorted(set(w0) | set(w1))
    idx = {s: i for i, s in enumerate(sites)}
    w_size = len(offsets)

    def value(bits, window):
        count = sum(bits[idx[s]] for s in window)
        if isinstance(model, MovingWindowThreshold):
            return 1.0 if count >= model.k_min else 0.0
        return round(count / w_size * (model.levels - 1)) / (model.levels - 1)

    e0 = e1 = e01 = 0.0
    for bits in itertools.product((0, 1), repeat=len(sites)):
        weight = model.theta ** sum(bits) * (1 - model.theta) ** (len(sites) - sum(bits))
        x0, x1 = value(bits, w0), value(bits, w1)
        e0 += weight * x0
        e1 += weight * x1
        e01 += weight * x0 * x1
    return e0, e1, e01


class TestCube:
    def test_size(self):
        assert LatticeCube(d=2, n=3).size == 49
        assert LatticeCube(d=3, n=1).shape == (3, 3, 3)

    def test_bad_dimension(self):
        with pytest.raises(Exception):
            LatticeCube(d=4, n=2)


class TestSampling:
    def test_determinism(self):
        cube = LatticeCube(d=2, n=8)
        a = sample_field(MAJORITY, cube, 123)
        b = sample_field(MAJORITY, cube, 123)
        assert np.array_equal(a.values, b.values)
        c = sample_field(MAJORITY, cube, 124)
        assert not np.array_equal(a.values, c.values)

    def test_seed_extension_preserves_interior(self):
        small = sample_field(MAJORITY, LatticeCube(d=2, n=8), 9)
        big = sample_field(MAJORITY, LatticeCube(d=2, n=16), 9)
        assert np.array_equal(big.values[8:25, 8:25], small.values)

    def test_batch_matches_singles(self):
        cube = LatticeCube(d=1, n=20)
        seeds = [5, 6, 7]
        batch = sample_fields_batch(MAJORITY, cube, seeds)
        for row, seed in zip(batch, seeds):
            assert np.array_equal(row, sample_field(MAJORITY, cube, seed).values)

    def test_iid_pooled_mean(self):
        model = IidBernoulli(p=0.3)
        cube = LatticeCube(d=2, n=64)
        values = sample_fields_batch(model, cube, list(range(100)))
        total = values.size
        se = math.sqrt(0.3 * 0.7 / total)
        assert abs(values.mean() - 0.3) <= 4 * se

    def test_disjoint_windows_uncorrelated(self):
        # lag 3 > 2m for m=1: exactly independent by construction
        cube = LatticeCube(d=1, n=3)
        values = sample_fields_batch(MAJORITY, cube, list(range(10000)))
        x, y = values[:, 0], values[:, 6]
        corr = np.corrcoef(x, y)[0, 1]
        assert abs(corr) <= 4 / math.sqrt(10000)

    def test_levels_in_unit_interval(self):
        model = MovingWindowLevels(window_radius=1, theta=0.4, levels=5)
        sample = sample_field(model, LatticeCube(d=2, n=10), 77)
        assert sample.values.min() >= 0.0 and sample.values.max() <= 1.0
        assert set(np.unique(np.round(sample.values * 4)).tolist()) <= {0, 1, 2, 3, 4}

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            sample_field(IidBernoulli(p=0.5), LatticeCube(d=3, n=300), 1)

    def test_derive_seeds_matches_scalar(self):
        batch = derive_seeds(42, 7, np.arange(5))
        for r in range(5):
            assert int(batch[r]) == derive_seed(42, 7, r)


class TestMoments:
    def test_iid_mean_and_cov(self):
        model = IidBernoulli(p=0.3)
        assert model_mean(model, 2) == 0.3
        assert covariance_at_lag(model, (0, 0)) == pytest.approx(0.21)
        assert covariance_at_lag(model, (1, 0)) == 0.0

    def test_majority_mean(self):
        # P(Binomial(3, 1/2) >= 2) = 1/2
        assert model_mean(MAJORITY, 1) == pytest.approx(0.5)

    def test_majority_covariances_vs_brute_force(self):
        for lag in [(0,), (1,), (2,), (3,)]:
            e0, e1, e01 = brute_force_moments(MAJORITY, 1, lag)
            expected = e01 - e0 * e1
            assert covariance_at_lag(MAJORITY, lag) == pytest.approx(expected, abs=1e-12)

    def test_levels_covariance_vs_brute_force(self):
        model = MovingWindowLevels(window_radius=1, theta=0.3, levels=4)
        for lag in [(0,), (1,), (2,)]:
            e0, e1, e01 = brute_force_moments(model, 1, lag)
            assert covariance_at_lag(model, lag) == pytest.approx(e01 - e0 * e1, abs=1e-12)

    def test_2d_covariance_vs_brute_force(self):
        model = MovingWindowThreshold(window_radius=1, theta=0.4, k_min=5)
        for lag in [(0, 0), (1, 0), (2, 1)]:
            e0, e1, e01 = brute_force_moments(model, 2, lag)
            assert covariance_at_lag(model, lag) == pytest.approx(e01 - e0 * e1, abs=1e-12)

    def test_m_dependence_zero_beyond_two_m(self):
        for lag in [(3,), (-3,), (17,)]:
            assert covariance_at_lag(MAJORITY, lag) == 0.0
        assert covariance_at_lag(MAJORITY, (2,)) != 0.0

    def test_sigma2_iid(self):
        res = model_sigma2(IidBernoulli(p=0.3), 2)
        assert res.value == pytest.approx(0.21)
        assert not res.degenerate

    def test_sigma2_majority(self):
        # lag sums from enumeration: 0.25 + 2*0.125 + 2*0.0625
        res = model_sigma2(MAJORITY, 1)
        assert res.value == pytest.approx(0.625, abs=1e-12)

    def test_sigma2_matches_long_run_variance(self):
        cube = LatticeCube(d=1, n=128)
        values = sample_fields_batch(MAJORITY, cube, list(range(4000)))
        sums = values.sum(axis=1)
        mc = sums.var(ddof=1) / cube.size
        se = mc * math.sqrt(2 / 4000)
        assert abs(mc - 0.625) <= 4 * se + 2 * 0.25 / cube.side

    def test_constant_field_degenerate(self):
        frozen = MovingWindowThreshold(window_radius=1, theta=0.0, k_min=1)
        res = model_sigma2(frozen, 1)
        assert res.value == pytest.approx(0.0, abs=1e-15)
        assert res.degenerate


class TestSerialization:
    @pytest.mark.parametrize(
        "model",
        [
            IidBernoulli(p=0.3),
            MAJORITY,
            MovingWindowLevels(window_radius=1, theta=0.37, levels=5),
        ],
    )
    def test_round_trip_bit_exact(self, model, tmp_path):
        sample = sample_field(model, LatticeCube(d=2, n=5), 31)
        path = tmp_path / "sample.dat"
        save_sample(sample, path)
        loaded = load_sample(path)
        assert loaded.cube == sample.cube
        assert loaded.model == sample.model
        assert loaded.seed == sample.seed
        assert np.array_equal(loaded.values, sample.values)

    def test_model_dict_round_trip(self):
        for model in [IidBernoulli(p=0.5), MAJORITY]:
            assert model_from_dict(model_to_dict(model)) == model

    def test_unknown_model_type(self):
        with pytest.raises(ParameterError):
            model_from_dict({"type": "nope"})

    def test_truncated_file(self, tmp_path):
        sample = sample_field(IidBernoulli(p=0.5), LatticeCube(d=1, n=3), 1)
        path = tmp_path / "sample.dat"
        save_sample(sample, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(ShapeError):
            load_sample(path)


def test_field_sample_shape_checked():
    with pytest.raises(ShapeError):
        FieldSample(
            cube=LatticeCube(d=1, n=2),
            values=np.zeros(4),
            model=IidBernoulli(p=0.5),
            seed=0,
        )
