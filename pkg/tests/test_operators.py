import numpy as np
import pytest
from scipy import integrate

from nngp_ldp import (Grid, InvalidArgument, InvalidKernel, KernelGrid, NotPSD, OperatorRep, Tolerances,
                      equiv_metrics, hs_norm, kernel_to_operator, make_grid, op_norm, operator_from_function,
                      powers_stormer_gap, powers_stormer_variant, psd_project, sqrt_op, trace, trace_norm)
from nngp_ldp.operators import constant_operator, zero_operator

from conftest import random_psd, scalar_op


class TestGrid:
    def test_one_point_gauss(self):
        g = make_grid((0, 1), 1)
        assert g.nodes[:, 0] == pytest.approx([0.5])
        assert g.weights == pytest.approx([1.0])

    def test_two_point_gauss_nodes(self):
        g = make_grid((0, 1), 2)
        r = 1 / (2 * np.sqrt(3))
        np.testing.assert_allclose(g.nodes[:, 0], [0.5 - r, 0.5 + r], rtol=1e-14)
        np.testing.assert_allclose(g.weights, [0.5, 0.5], rtol=1e-14)

    def test_trapezoid_weights_sum(self):
        assert make_grid((0, 2), 4, "trapezoid").volume == pytest.approx(2.0, rel=1e-12)

    def test_trapezoid_needs_two_nodes(self):
        with pytest.raises(InvalidArgument):
            make_grid((0, 1), 1, "trapezoid")

    @pytest.mark.parametrize("n", [1, 3, 7])
    def test_gauss_exact_for_degree_2n_minus_1(self, n):
        g = make_grid((-1, 3), n)
        x = g.nodes[:, 0]
        for deg in range(2 * n):
            exact = (3.0 ** (deg + 1) - (-1.0) ** (deg + 1)) / (deg + 1)
            assert g.weights @ x**deg == pytest.approx(exact, rel=1e-12, abs=1e-12)

    def test_box_grid(self):
        g = make_grid([(0, 1), (0, 2)], (3, 4))
        assert g.n == 12 and g.dim_input == 2
        assert g.volume == pytest.approx(2.0, rel=1e-12)
        assert np.all((g.nodes >= 0) & (g.nodes <= [1, 2]))

    @pytest.mark.parametrize("bad", [dict(domain=(1, 1), n=3), dict(domain=(0, 1), n=0),
                                     dict(domain=(0, 1), n=2, rule="simpson")])
    def test_invalid(self, bad):
        with pytest.raises(InvalidArgument):
            make_grid(**bad)

    def test_grid_invariants(self):
        with pytest.raises(InvalidArgument):
            Grid([0.0, 1.0], [1.0, 0.0])
        with pytest.raises(InvalidArgument):
            Grid([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(InvalidArgument):
            Grid([0.0, 1.0], [1.0])

    def test_locate(self):
        g = make_grid((0, 1), 3, "trapezoid")
        np.testing.assert_array_equal(g.locate([[1.0], [0.25], [0.5]]), [2, -1, 1])


class TestKernelToOperator:
    def test_constant_kernel_trace(self):
        g = make_grid((0, 1), 5)
        K = operator_from_function(g, lambda x, y: 2.5 + 0 * x[..., 0] * y[..., 0])
        assert trace(K) == pytest.approx(2.5, rel=1e-12)

    def test_rank_one_trace(self):
        g = make_grid((0, 2), 6)
        f = lambda x: np.sin(x[..., 0]) + 1  # noqa: E731
        K = operator_from_function(g, lambda x, y: f(x) * f(y))
        assert trace(K) == pytest.approx(np.sum(g.weights * f(g.nodes) ** 2), rel=1e-12)
        assert np.sum(K.eigenvalues > 1e-12 * K.eigenvalues[0]) == 1

    def test_min_kernel_trace(self):
        g = make_grid((0, 1), 32)
        K = operator_from_function(g, lambda x, y: np.minimum(x[..., 0], y[..., 0]))
        assert trace(K) == pytest.approx(integrate.quad(lambda x: x, 0, 1)[0], rel=1e-12)
        assert K.nonneg

    def test_asymmetric_rejected(self):
        g = make_grid((0, 1), 2)
        with pytest.raises(InvalidKernel):
            kernel_to_operator(KernelGrid(g, [[1.0, 0.5], [0.4, 1.0]]))

    def test_nonneg_flag(self):
        g = make_grid((0, 1), 2)
        assert not kernel_to_operator(KernelGrid(g, [[1.0, 0.0], [0.0, -1.0]])).nonneg

    def test_kernel_round_trip(self, rng):
        g = make_grid((0, 1), 6)
        k = random_psd(rng, 6)
        np.testing.assert_allclose(kernel_to_operator(KernelGrid(g, k)).kernel, k, rtol=1e-12)


class TestNorms:
    def test_examples(self, point_grid):
        g = make_grid((0, 1), 2)
        D = OperatorRep(g, np.diag([2.0, -1.0]))
        assert trace_norm(D) == pytest.approx(3.0)
        E = OperatorRep(g, np.diag([3.0, 4.0]))
        assert hs_norm(E) == pytest.approx(5.0) and op_norm(E) == pytest.approx(4.0)
        Z = zero_operator(g)
        assert (trace(Z), hs_norm(Z), op_norm(Z), trace_norm(Z)) == (0, 0, 0, 0)
        assert trace_norm(E - E) == 0

    def test_against_direct_eigen(self, rng):
        g = make_grid((0, 1), 8)
        S = random_psd(rng, 8) - 0.3 * np.eye(8)
        K = OperatorRep(g, S)
        ev = np.linalg.eigvals(S).real
        assert trace_norm(K) == pytest.approx(np.abs(ev).sum(), rel=1e-12)
        assert hs_norm(K) == pytest.approx(np.linalg.norm(S, "fro"), rel=1e-12)
        assert op_norm(K) == pytest.approx(np.linalg.norm(S, 2), rel=1e-12)
        assert op_norm(K) <= hs_norm(K) <= trace_norm(K)

    def test_trace_linearity(self, rng):
        g = make_grid((0, 1), 5)
        A, B = OperatorRep(g, random_psd(rng, 5)), OperatorRep(g, random_psd(rng, 5))
        assert trace(A + B) == pytest.approx(trace(A) + trace(B), rel=1e-14)

    def test_trace_norm_equals_trace_for_psd(self, rng):
        K = OperatorRep(make_grid((0, 1), 7), random_psd(rng, 7, 3))
        assert trace_norm(K) == pytest.approx(trace(K), rel=1e-12)


class TestSqrt:
    def test_scaled_identity(self):
        g = make_grid((0, 1), 4)
        R = sqrt_op(OperatorRep(g, 9.0 * np.eye(4)))
        np.testing.assert_allclose(R.sym, 3.0 * np.eye(4), atol=1e-14)

    def test_rank_one(self):
        g = make_grid((0, 1), 5)
        f = np.arange(1.0, 6.0)
        f *= 2 / np.linalg.norm(f)
        assert trace_norm(sqrt_op(OperatorRep(g, np.outer(f, f)))) == pytest.approx(2.0, rel=1e-12)

    def test_reconstruction(self, rng):
        K = OperatorRep(make_grid((0, 1), 12), random_psd(rng, 12, 5))
        R = sqrt_op(K)
        assert hs_norm(R @ R - K) <= 1e-8 * (1 + hs_norm(K))
        assert R.nonneg

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            sqrt_op(OperatorRep(make_grid((0, 1), 2), np.diag([1.0, -1e-3])))

    def test_roundoff_negative_clipped(self):
        R = sqrt_op(OperatorRep(make_grid((0, 1), 2), np.diag([1.0, -1e-13])))
        assert np.all(np.isfinite(R.sym))


class TestPowersStormer:
    def test_identical(self, rng):
        K = OperatorRep(make_grid((0, 1), 4), random_psd(rng, 4))
        lhs, rhs = powers_stormer_gap(K, K)
        assert lhs == pytest.approx(0, abs=1e-24) and rhs == pytest.approx(0, abs=1e-12)

    def test_scalars(self, point_grid):
        assert powers_stormer_gap(scalar_op(point_grid, 1), scalar_op(point_grid, 4)) == pytest.approx((1, 3))

    def test_random_pairs(self, rng):
        g = make_grid((0, 1), 10)
        for _ in range(20):
            A = OperatorRep(g, random_psd(rng, 10, 3))
            B = OperatorRep(g, random_psd(rng, 10, 4))
            lhs, rhs = powers_stormer_gap(A, B)
            assert lhs <= rhs + 1e-10
            lhs, rhs = powers_stormer_variant(A, B)
            assert lhs <= rhs + 1e-10


class TestEquivMetrics:
    def test_examples(self, point_grid, rng):
        np.testing.assert_allclose(equiv_metrics(scalar_op(point_grid, 1), scalar_op(point_grid, 4)), (1, 3, 3, 3))
        K = OperatorRep(make_grid((0, 1), 3), random_psd(rng, 3))
        np.testing.assert_allclose(equiv_metrics(K, K), 0, atol=1e-12)

    def test_perturbation_sequence(self, rng):
        g = make_grid((0, 1), 6)
        K = OperatorRep(g, random_psd(rng, 6))
        seq = np.array([equiv_metrics(K + OperatorRep(g, np.eye(6) / n), K) for n in (1, 2, 4, 8, 16, 32)])
        assert np.all(np.diff(seq, axis=0) < 0)
        assert np.all(seq[-1] < seq[0] / 4)


class TestPsdProject:
    def test_psd_unchanged(self, rng):
        K = OperatorRep(make_grid((0, 1), 5), random_psd(rng, 5))
        assert psd_project(K) is not None
        np.testing.assert_array_equal(psd_project(K).sym, K.sym)

    def test_diag(self):
        P = psd_project(np.diag([1.0, -0.5]), make_grid((0, 1), 2))
        np.testing.assert_allclose(P.sym, np.diag([1.0, 0.0]), atol=1e-15)

    def test_nearest_in_hs(self, rng):
        g = make_grid((0, 1), 8)
        S = random_psd(rng, 8, 2) + 0.2 * rng.standard_normal((8, 8))
        S = (S + S.T) / 2
        P = psd_project(S, g)
        w, V = np.linalg.eigh(S)
        np.testing.assert_allclose(P.sym, V @ np.diag(np.maximum(w, 0)) @ V.T, atol=1e-12)
        assert P.nonneg
        np.testing.assert_allclose(psd_project(P).sym, P.sym, atol=1e-14)

    def test_eig_clip(self):
        P = psd_project(np.diag([1.0, -0.5]), make_grid((0, 1), 2), Tolerances(eig_clip=0.1))
        np.testing.assert_allclose(np.sort(np.diag(P.sym)), [0.1, 1.0])

    def test_raw_matrix_needs_grid(self):
        with pytest.raises(InvalidArgument):
            psd_project(np.eye(2))


def test_constant_operator_trace():
    g = make_grid((0, 3), 4)
    assert trace(constant_operator(g, 2.0)) == pytest.approx(6.0, rel=1e-13)


def test_tolerances_non_negative():
    with pytest.raises(InvalidArgument):
        Tolerances(psd_tol=-1)
