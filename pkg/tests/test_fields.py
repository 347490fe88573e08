import numpy as np
import pytest
from scipy import stats

from nngp_ldp import (FieldSample, InvalidArgument, NotPSD, OperatorRep, SeedSpec, cf_operator,
                      empirical_covariance, hs_norm, identity, make_grid, relu, sample_field, tanh, trace_norm)
from nngp_ldp.operators import zero_operator

from conftest import random_psd, scalar_op


class TestSampleField:
    def test_zero_operator_gives_zero_fields(self):
        g = make_grid((0, 1), 4)
        s = sample_field(zero_operator(g), 10, SeedSpec(1))
        assert s.values.shape == (10, 4) and np.all(s.values == 0)

    def test_scalar_variance(self, point_grid):
        s = sample_field(scalar_op(point_grid, 2.5), 100_000, SeedSpec(3))
        var = s.values[:, 0].var()
        # the sample variance has standard error k * sqrt(2 / m)
        assert abs(var - 2.5) <= 3 * 2.5 * np.sqrt(2 / 100_000)

    def test_scalar_normality(self, point_grid):
        v = sample_field(scalar_op(point_grid, 1.0), 5000, SeedSpec(4)).values[:, 0]
        assert stats.kstest(v, "norm").pvalue > 1e-3

    def test_rank_one_support(self):
        g = make_grid((0, 1), 6)
        f = np.linspace(1, 2, 6)
        sw = g.sqrt_w
        K = OperatorRep(g, np.outer(sw * f, sw * f))
        s = sample_field(K, 50, SeedSpec(5)).values
        ratios = s / f
        np.testing.assert_allclose(ratios, ratios[:, :1] * np.ones((1, 6)), rtol=1e-9, atol=1e-12)

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            sample_field(OperatorRep(make_grid((0, 1), 2), np.diag([1.0, -1.0])), 3)

    def test_m_positive(self, point_grid):
        with pytest.raises(InvalidArgument):
            sample_field(scalar_op(point_grid, 1.0), 0)

    def test_deterministic(self, rng):
        g = make_grid((0, 1), 5)
        K = OperatorRep(g, random_psd(rng, 5))
        a = sample_field(K, 100, SeedSpec(9, 2)).values
        b = sample_field(K, 100, SeedSpec(9, 2)).values
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, sample_field(K, 100, SeedSpec(9, 3)).values)

    def test_prefix_stable(self, rng):
        g = make_grid((0, 1), 3)
        K = OperatorRep(g, random_psd(rng, 3))
        np.testing.assert_array_equal(sample_field(K, 10, SeedSpec(1)).values,
                                      sample_field(K, 70_000, SeedSpec(1)).values[:10])

    def test_sampler_rate(self, rng):
        g = make_grid((0, 1), 6)
        K = OperatorRep(g, random_psd(rng, 6))
        ms = np.array([100, 1000, 10_000])
        errs = []
        for m in ms:
            e = [hs_norm(empirical_covariance(sample_field(K, int(m), SeedSpec(7, r))) - K) for r in range(20)]
            errs.append(np.mean(e))
        slope = stats.linregress(np.log(ms), np.log(errs)).slope
        assert -0.6 <= slope <= -0.4


class TestEmpiricalCovariance:
    def test_single_field_rank_one(self):
        g = make_grid((0, 1), 4)
        h = np.array([[1.0, -2.0, 0.5, 3.0]])
        C = empirical_covariance(FieldSample(g, h))
        sw = g.sqrt_w
        np.testing.assert_allclose(C.sym, np.outer(sw * h[0], sw * h[0]), rtol=1e-14)

    def test_zero_fields(self):
        g = make_grid((0, 1), 3)
        assert trace_norm(empirical_covariance(FieldSample(g, np.zeros((5, 3))))) == 0

    def test_shape_check(self):
        with pytest.raises(InvalidArgument):
            FieldSample(make_grid((0, 1), 3), np.zeros((2, 4)))


class TestCfOperator:
    def test_identity_trace(self):
        g = make_grid((0, 1), 5)
        h = np.linspace(-1, 2, 5)
        h *= np.sqrt(3 / np.sum(g.weights * h**2))
        assert trace_norm(cf_operator(h, identity(), g)) == pytest.approx(3.0, rel=1e-12)

    def test_relu_negative_field(self):
        g = make_grid((0, 1), 4)
        assert trace_norm(cf_operator(-np.arange(1.0, 5.0), relu(), g)) == 0

    def test_tanh_bounded_by_volume(self, rng):
        g = make_grid((0, 3), 7)
        for _ in range(5):
            assert trace_norm(cf_operator(10 * rng.standard_normal(7), tanh(), g)) <= g.volume

    @pytest.mark.parametrize("act", [identity(), relu(), tanh()])
    def test_trace_identity_and_growth(self, act, rng):
        g = make_grid((0, 2), 6)
        h = 3 * rng.standard_normal(6)
        C = cf_operator(h, act, g)
        s2 = np.sum(g.weights * act(h) ** 2)
        assert trace_norm(C) == pytest.approx(s2, rel=1e-12)
        hnorm = np.sqrt(np.sum(g.weights * h**2))
        vol = g.volume
        # pointwise growth bound integrated over the grid, with Jensen on |h|^r
        bound = act.growth_const * (vol + vol ** (1 - act.growth_exponent / 2) * hnorm**act.growth_exponent)
        assert trace_norm(C) <= bound * (1 + 1e-12)

    def test_wrong_length(self):
        with pytest.raises(InvalidArgument):
            cf_operator(np.ones(3), relu(), make_grid((0, 1), 4))
