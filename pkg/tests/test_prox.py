import math

import numpy as np
import pytest

from grpadmm.linops import DenseMap, Identity
from grpadmm.prox import (
    GroupL21,
    L1,
    LinearNonneg,
    ProxSolveError,
    QuadData,
    SquaredL2,
)

from conftest import assert_prox_optimal, prox_objective


def closed_form_terms():
    rng = np.random.default_rng(1)
    return [
        L1(0.7, 6),
        SquaredL2(rng.standard_normal(5)),
        SquaredL2(np.zeros(4), weight=2.5),
        GroupL21(0.9, 4),
        LinearNonneg(rng.random(5)),
    ]


def all_terms():
    rng = np.random.default_rng(2)
    quad = QuadData(DenseMap(rng.standard_normal((6, 4))), rng.standard_normal(6))
    return closed_form_terms() + [quad]


class TestEval:
    def test_l1(self):
        assert L1(0.1, 2).eval([1.0, -2.0]) == pytest.approx(0.3)

    def test_group_single_pair(self):
        assert GroupL21(1.0, 1).eval([3.0, 4.0]) == pytest.approx(5.0)

    def test_indicator_violation_is_inf(self):
        assert LinearNonneg([1.0, 1.0]).eval([2.0, -1.0]) == math.inf

    def test_indicator_boundary_is_finite(self):
        assert LinearNonneg([1.0, 2.0]).eval([0.0, 3.0]) == pytest.approx(6.0)

    @pytest.mark.parametrize("term", all_terms(), ids=lambda t: t.kind)
    def test_convex_along_segments(self, term):
        rng = np.random.default_rng(3)
        for _ in range(30):
            # Sample inside the domain so both sides stay finite.
            u = np.abs(rng.standard_normal(term.dim))
            v = np.abs(rng.standard_normal(term.dim))
            mid = term.eval(0.5 * u + 0.5 * v)
            assert mid <= 0.5 * term.eval(u) + 0.5 * term.eval(v) + 1e-9


class TestProxClosedForms:
    def test_soft_threshold(self):
        out = L1(1.0, 2).prox([2.0, -0.5], 1.0)
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_soft_threshold_tie_goes_to_zero(self):
        out = L1(1.0, 1).prox([1.0], 1.0)
        np.testing.assert_array_equal(out, [0.0])

    def test_sql2_shift(self):
        out = SquaredL2([0.0]).prox([3.0], 1.0)
        np.testing.assert_allclose(out, [1.5])

    def test_shifted_projection(self):
        out = LinearNonneg([1.0, 1.0]).prox([0.5, 2.0], 1.0)
        np.testing.assert_allclose(out, [0.0, 1.0])

    def test_group_shrink_pair(self):
        # Shrink factor 1 - 1/5 = 0.8 on the pair (3, 4).
        out = GroupL21(1.0, 1).prox([3.0, 4.0], 1.0)
        np.testing.assert_allclose(out, [2.4, 3.2])

    def test_group_zero_pair_stays_zero(self):
        out = GroupL21(1.0, 2).prox([0.0, 3.0, 0.0, 4.0], 1.0)
        np.testing.assert_allclose(out, [0.0, 2.4, 0.0, 3.2])

    @pytest.mark.parametrize("term", all_terms(), ids=lambda t: t.kind)
    def test_nonpositive_t_rejected(self, term):
        with pytest.raises(ValueError):
            term.prox(np.zeros(term.dim), 0.0)


class TestProxProperties:
    @pytest.mark.parametrize("term", all_terms(), ids=lambda t: t.kind)
    def test_optimality_by_sampling(self, term):
        rng = np.random.default_rng(4)
        for t in (0.3, 1.7):
            v = rng.standard_normal(term.dim)
            assert_prox_optimal(term, v, t)

    @pytest.mark.parametrize("term", closed_form_terms(), ids=lambda t: t.kind)
    def test_nonexpansive(self, term):
        rng = np.random.default_rng(5)
        for _ in range(100):
            u = 3.0 * rng.standard_normal(term.dim)
            v = 3.0 * rng.standard_normal(term.dim)
            du = term.prox(u, 0.8) - term.prox(v, 0.8)
            assert np.linalg.norm(du) <= np.linalg.norm(u - v) + 1e-12

    @pytest.mark.parametrize("term", all_terms(), ids=lambda t: t.kind)
    def test_vanishing_step_approaches_domain_projection(self, term):
        rng = np.random.default_rng(6)
        v = rng.standard_normal(term.dim)
        projected = np.maximum(v, 0.0) if term.kind == "linear-plus-nonneg" else v
        out = term.prox(v, 1e-8)
        assert np.linalg.norm(out - projected) <= 1e-4


class TestQuadData:
    def _term(self, seed=7, n=5, m=8, weight=1.3):
        rng = np.random.default_rng(seed)
        op = DenseMap(rng.standard_normal((m, n)))
        return QuadData(op, rng.standard_normal(m), weight=weight), rng

    def test_normal_equation_residual(self):
        term, rng = self._term()
        v = rng.standard_normal(term.dim)
        t = 0.9
        z = term.prox(v, t)
        coeff = t * term.weight
        lhs = z + coeff * term.op.adjoint(term.op.apply(z))
        rhs = v + coeff * term.op.adjoint(term.data)
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)

    def test_matches_dense_solve(self):
        term, rng = self._term(seed=8)
        v = rng.standard_normal(term.dim)
        t = 2.0
        mat = term.op.matrix
        coeff = t * term.weight
        expected = np.linalg.solve(
            np.eye(term.dim) + coeff * mat.T @ mat, v + coeff * mat.T @ term.data
        )
        np.testing.assert_allclose(term.prox(v, t), expected, atol=1e-9)

    def test_warm_start_returns_same_solution(self):
        term, rng = self._term(seed=9)
        v = rng.standard_normal(term.dim)
        cold = term.prox(v, 1.0)
        warm = term.prox(v, 1.0, warm=cold)
        np.testing.assert_allclose(warm, cold, atol=1e-9)

    def test_iteration_cap_raises_with_residual(self):
        rng = np.random.default_rng(10)
        op = DenseMap(rng.standard_normal((40, 40)))
        term = QuadData(op, rng.standard_normal(40), cg_max_iter=1)
        with pytest.raises(ProxSolveError) as err:
            term.prox(rng.standard_normal(40), 5.0)
        assert err.value.residual > 0

    def test_identity_operator_reduces_to_sql2(self):
        data = np.array([1.0, -2.0, 0.5])
        term = QuadData(Identity(3), data, weight=2.0)
        ref = SquaredL2(data, weight=2.0)
        v = np.array([0.3, 0.4, -0.1])
        np.testing.assert_allclose(term.prox(v, 0.7), ref.prox(v, 0.7), atol=1e-10)

    def test_prox_objective_agrees(self):
        term, rng = self._term(seed=11)
        v = rng.standard_normal(term.dim)
        z = term.prox(v, 1.0)
        assert prox_objective(term, z, v, 1.0) <= prox_objective(
            term, v, v, 1.0
        )
