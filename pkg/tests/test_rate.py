import numpy as np
import pytest

from nngp_ldp import (DualObjective, DualVariable, NetworkConfig, OperatorRep, RateOptions, SeedSpec, TailEvent,
                      UnstableMGF, UnsupportedGrowth, chain_rate, clipped_linear, identity, init_kernel, log_mgf,
                      make_grid, nngp_chain, nngp_step, rate_eval, relu, scalar_rate_closed_form, tail_slope, tanh)
from nngp_ldp.errors import InsufficientHits, InvalidArgument, NotPSD

from conftest import random_psd, scalar_op
from oracles import chi2_tail_neg_log, legendre_scan_rate, scalar_log_mgf

FAST = RateOptions(mc_samples=50_000, seed=SeedSpec(11))


class TestClosedForm:
    @pytest.mark.parametrize("k2", [0.5, 1.0, 2.0, 3.7])
    def test_matches_legendre_scan(self, k2):
        assert scalar_rate_closed_form(k2, 1.0, 1.0) == pytest.approx(legendre_scan_rate(k2, 1.0, 1.0), abs=1e-6)

    def test_scaling(self):
        assert scalar_rate_closed_form(4.0, 2.0, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert scalar_rate_closed_form(2.0, 1.0, 1.0) == pytest.approx(0.5 * (1 - np.log(2)), rel=1e-14)

    def test_vectorized(self):
        out = scalar_rate_closed_form(np.array([0.5, 1.0]), 1.0, 1.0)
        assert out.shape == (2,) and out[1] == 0

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            scalar_rate_closed_form(0.0, 1.0, 1.0)


class TestLogMgf:
    def test_zero_dual(self, point_grid):
        est = log_mgf(DualVariable(point_grid, [[0.0]]), scalar_op(point_grid, 1.0), 1.0, tanh(), 1000, 1)
        assert est.value == 0 and est.ess == pytest.approx(1000)

    def test_scalar_against_quadrature(self, point_grid):
        est = log_mgf(DualVariable(point_grid, [[0.2]]), scalar_op(point_grid, 1.0), 1.0, clipped_linear(),
                      200_000, SeedSpec(5))
        assert abs(est.value - scalar_log_mgf(0.2, 1.0, 1.0)) <= 4 * est.stderr

    def test_bias_adds_constant(self, point_grid):
        D = DualVariable(point_grid, [[0.1]])
        K1 = scalar_op(point_grid, 1.0)
        a = log_mgf(D, K1, 1.0, tanh(), 1000, 2)
        b = log_mgf(D, K1, 1.0, tanh(), 1000, 2, bias=0.5)
        assert b.value - a.value == pytest.approx(0.05)

    def test_unstable(self, point_grid):
        with pytest.raises(UnstableMGF):
            log_mgf(DualVariable(point_grid, [[0.49]]), scalar_op(point_grid, 1.0), 1.0, clipped_linear(),
                    10_000, 1)

    def test_rejects_linear_growth(self, point_grid):
        for act in (identity(), relu()):
            with pytest.raises(UnsupportedGrowth):
                log_mgf(DualVariable(point_grid, [[0.0]]), scalar_op(point_grid, 1.0), 1.0, act, 10)


class TestRateEval:
    @pytest.mark.parametrize("k2", [0.5, 2.0])
    def test_scalar_oracle(self, point_grid, k2):
        est = rate_eval(scalar_op(point_grid, k2), scalar_op(point_grid, 1.0), 1.0, clipped_linear(), FAST)
        assert est.converged
        assert est.value == pytest.approx(scalar_rate_closed_form(k2, 1.0, 1.0), abs=0.03)
        assert est.ess_min >= FAST.floor

    def test_zero_at_mean(self):
        g = make_grid((0, 1), 4)
        K1 = init_kernel(g, 1.0, 0.5)
        K2 = nngp_step(K1, 1.0, 0.0, tanh())
        est = rate_eval(K2, K1, 1.0, tanh(), FAST)
        assert est.value <= 3 * est.mc_stderr + 1e-3

    def test_bias_variant_zero_at_mean(self):
        g = make_grid((0, 1), 3)
        K1 = init_kernel(g, 1.0, 0.5)
        K2 = nngp_step(K1, 1.0, 0.3, tanh())
        est = rate_eval(K2, K1, 1.0, tanh(), FAST, bias=0.3)
        assert est.value <= 3 * est.mc_stderr + 1e-3

    def test_non_negative_and_trace(self, rng):
        g = make_grid((0, 1), 3)
        K1 = OperatorRep(g, random_psd(rng, 3))
        K2 = OperatorRep(g, random_psd(rng, 3))
        est = rate_eval(K2, K1, 1.0, tanh(), RateOptions(mc_samples=20_000, seed=1))
        assert est.value >= 0
        assert np.all(np.diff(est.objective_trace) >= -1e-12)
        d = est.to_dict()
        assert set(d) >= {"value", "mc_stderr", "iterations", "ess_min", "objective_trace"}

    def test_deterministic(self, point_grid):
        a = rate_eval(scalar_op(point_grid, 2.0), scalar_op(point_grid, 1.0), 1.0, clipped_linear(), FAST)
        b = rate_eval(scalar_op(point_grid, 2.0), scalar_op(point_grid, 1.0), 1.0, clipped_linear(), FAST)
        assert a.value == b.value and a.dual.sym.tobytes() == b.dual.sym.tobytes()

    def test_rank_option(self):
        g = make_grid((0, 1), 6)
        K1 = init_kernel(g, 1.0, 0.5)
        K2 = nngp_step(K1, 1.0, 0.0, tanh())
        est = rate_eval(K2, K1, 1.0, tanh(), RateOptions(mc_samples=20_000, seed=2, rank=2))
        assert est.dual.sym.shape == (6, 6) and np.linalg.matrix_rank(est.dual.sym) <= 2

    def test_errors(self, point_grid):
        K = scalar_op(point_grid, 1.0)
        with pytest.raises(UnsupportedGrowth):
            rate_eval(K, K, 1.0, relu(), FAST)
        with pytest.raises(NotPSD):
            rate_eval(scalar_op(point_grid, -1.0), K, 1.0, tanh(), FAST)
        with pytest.raises(InvalidArgument):
            rate_eval(OperatorRep(make_grid((0, 1), 2), np.eye(2)), K, 1.0, tanh(), FAST)

    def test_lower_semicontinuity_proxy(self, point_grid):
        K1 = scalar_op(point_grid, 1.0)
        at = rate_eval(scalar_op(point_grid, 2.0), K1, 1.0, clipped_linear(), FAST)
        near = [rate_eval(scalar_op(point_grid, 2.0 + e), scalar_op(point_grid, 1.0 - e / 2), 1.0,
                          clipped_linear(), FAST) for e in (0.04, 0.02, 0.01)]
        se = np.sqrt(at.mc_stderr**2 + max(r.mc_stderr for r in near) ** 2)
        assert at.value <= min(r.value for r in near) + 3 * se + 1e-3


class TestDualObjective:
    def test_concave_along_lines(self, rng):
        g = make_grid((0, 1), 3)
        K1 = OperatorRep(g, random_psd(rng, 3))
        obj = DualObjective(OperatorRep(g, random_psd(rng, 3)), K1, 1.0, tanh(), 20_000, 3)
        D0 = 0.1 * random_psd(rng, 3)
        Delta = rng.standard_normal((3, 3))
        vals = np.array([obj.value(D0 + t * (Delta + Delta.T)) for t in np.linspace(-0.2, 0.2, 21)])
        assert np.all(np.diff(vals, 2) <= 1e-12)

    def test_gradient_finite_differences(self, rng):
        g = make_grid((0, 1), 3)
        K1 = OperatorRep(g, random_psd(rng, 3))
        obj = DualObjective(OperatorRep(g, random_psd(rng, 3)), K1, 1.0, tanh(), 10_000, 4)
        D = 0.2 * (lambda A: A + A.T)(rng.standard_normal((3, 3)))
        G = obj.gradient(D)
        E = (lambda A: A + A.T)(rng.standard_normal((3, 3)))
        h = 1e-5
        fd = (obj.value(D + h * E) - obj.value(D - h * E)) / (2 * h)
        assert np.sum(G * E) == pytest.approx(fd, rel=1e-6)


class TestChainRate:
    def test_limit_path_near_zero(self):
        g = make_grid((0, 1), 3)
        cfg = NetworkConfig(L=2, N0=1, ratios=[1, 2], precisions=1, activation="tanh", biases=[0.2, 0.0, 0.1])
        cr = chain_rate(nngp_chain(cfg, g), cfg, FAST)
        assert len(cr.per_layer) == 2
        assert cr.total == pytest.approx(cr.per_layer[0].value + 2 * cr.per_layer[1].value)
        assert cr.total <= 0.02

    def test_scalar_two_layers(self, point_grid):
        # clipped-linear acts as the identity: each layer contributes the closed form
        cfg = NetworkConfig(L=2, N0=1, ratios=1, precisions=1, activation=clipped_linear())
        Ks = [scalar_op(point_grid, 2.0), scalar_op(point_grid, 1.0)]
        cr = chain_rate(Ks, cfg, FAST)
        exact = scalar_rate_closed_form(2.0, 1.0, 1.0) + scalar_rate_closed_form(1.0, 2.0, 1.0)
        assert cr.total == pytest.approx(exact, abs=0.04)

    def test_wrong_length(self, point_grid):
        cfg = NetworkConfig(L=2, N0=1, ratios=1, precisions=1, activation="tanh")
        with pytest.raises(InvalidArgument):
            chain_rate([scalar_op(point_grid, 1.0)], cfg, FAST)


class TestTailSlope:
    def test_identity_scalar_small(self, point_grid):
        cfg = NetworkConfig(L=1, N0=1, ratios=1, precisions=1, activation="identity")
        fit = tail_slope(TailEvent(2.0), cfg, point_grid, [4, 8, 12, 16], 40_000, SeedSpec(1))
        exact = [chi2_tail_neg_log(N, 2.0) for N in (4, 8, 12, 16)]
        got = [r["neg_log_prob"] for r in fit.rows()]
        np.testing.assert_allclose(got, exact, atol=0.15)

    def test_always_true(self, point_grid):
        cfg = NetworkConfig(L=1, N0=1, ratios=1, precisions=1, activation="tanh")
        fit = tail_slope(TailEvent(0.0), cfg, point_grid, [2, 4, 8], 100, SeedSpec(1))
        assert fit.slope == 0

    def test_deterministic_layer(self, point_grid):
        cfg = NetworkConfig(L=1, N0=1, ratios=1, precisions=1, activation="tanh")
        assert tail_slope(TailEvent(0.5, layer=1), cfg, point_grid, [2, 4, 8], 10).slope == 0
        with pytest.raises(InsufficientHits):
            tail_slope(TailEvent(2.0, layer=1), cfg, point_grid, [2, 4, 8], 10)

    def test_entry_and_norm_functionals(self):
        g = make_grid((0, 1), 2)
        syms = np.array([np.diag([1.0, -3.0]) * np.outer(g.sqrt_w, g.sqrt_w)])
        assert TailEvent(0.9, "entry", entry=(0, 0))(syms, g)[0]
        assert TailEvent(1.0, "op_norm")(np.array([np.diag([1.0, -3.0])]), g)[0]
        assert not TailEvent(-1.0, "trace", direction="<=")(np.array([np.eye(2)]), g)[0]
        with pytest.raises(InvalidArgument):
            TailEvent(1.0, "determinant")
