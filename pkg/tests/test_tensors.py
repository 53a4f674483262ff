"""Projectors, the Lambda calculus and subspace embeddings."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from microsolids.tensors import (
    IDENTITY9,
    IOTA,
    PROJ_P,
    SKEW,
    SYM,
    SYM0,
    SlotMap,
    axial_map,
    embedding,
    frobenius,
    lambda_,
    lambda_matrix,
    lambda_star,
    lambda_star_matrix,
    lift_last_two,
    proj_P,
    skew,
    subspace_dim,
    sym,
    sym0,
    trace,
    trace_star,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
tensor2 = arrays(np.float64, (3, 3), elements=finite)
vec3 = arrays(np.float64, (3,), elements=finite)


class TestProjectors:
    def test_decomposition_of_identity(self, rng):
        t = rng.standard_normal((1000, 3, 3))
        np.testing.assert_allclose(skew(t) + sym0(t) + proj_P(t), t, rtol=0, atol=1e-14 * 10)

    def test_matrices_sum_to_identity(self):
        np.testing.assert_allclose(SKEW.matrix + SYM0.matrix + PROJ_P.matrix, np.eye(9), atol=1e-15)

    @pytest.mark.parametrize("a,b", [(SKEW, SYM0), (SKEW, PROJ_P), (SYM0, PROJ_P)])
    def test_pairwise_orthogonal(self, a, b):
        np.testing.assert_allclose(a.matrix @ b.matrix, 0.0, atol=1e-15)

    @pytest.mark.parametrize("p,rank", [(SYM, 6), (SKEW, 3), (SYM0, 5), (PROJ_P, 1), (IDENTITY9, 9)])
    def test_ranks(self, p, rank):
        assert round(np.trace(p.matrix)) == rank

    def test_sym_is_sym0_plus_P(self):
        np.testing.assert_allclose(SYM.matrix, SYM0.matrix + PROJ_P.matrix, atol=1e-15)

    def test_batched_call_matches_function(self, rng):
        t = rng.standard_normal((4, 2, 3, 3))
        np.testing.assert_allclose(SYM0(t), sym0(t), atol=1e-14)

    def test_non_projector_rejected(self):
        with pytest.raises(ValueError):
            SlotMap(2.0 * np.eye(9), True)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            SlotMap(np.eye(4))

    @given(tensor2)
    def test_trace_adjoint(self, t):
        phi = 0.7
        assert np.isclose(frobenius(trace_star(phi), t), phi * trace(t), rtol=1e-12, atol=1e-9)

    def test_frobenius_shape_mismatch(self):
        with pytest.raises(ValueError):
            frobenius(np.eye(3), np.ones(3))


class TestLambda:
    def test_component_formula(self):
        # Lambda^* a = (a23 - a32, a31 - a13, a12 - a21)
        a = np.arange(1.0, 10.0).reshape(3, 3)
        np.testing.assert_array_equal(lambda_star(a), [6.0 - 8.0, 7.0 - 3.0, 2.0 - 4.0])

    def test_minus_lambda_is_cross_matrix(self):
        b = np.array([1.0, 2.0, 3.0])
        expected = np.array([[0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0]])
        np.testing.assert_array_equal(-lambda_(b), expected)

    @given(vec3, vec3)
    def test_cross_product_oracle(self, b, x):
        np.testing.assert_allclose(-lambda_(b) @ x, np.cross(b, x), rtol=1e-12, atol=1e-8)

    @given(vec3, tensor2)
    def test_adjointness(self, beta, alpha):
        lhs = frobenius(lambda_(beta), alpha)
        rhs = float(beta @ lambda_star(alpha))
        assert abs(lhs - rhs) <= 1e-15 * max(1.0, np.abs(beta).max() * np.abs(alpha).max() * 6)

    def test_matrices_are_adjoint(self):
        np.testing.assert_array_equal(lambda_matrix().T, lambda_star_matrix())

    def test_lambda_lambda_star_on_skew(self):
        # Lambda Lambda^* restricted to skew tensors is twice the identity there
        L, Ls = lambda_matrix(), lambda_star_matrix()
        np.testing.assert_allclose(L @ Ls @ SKEW.matrix, 2.0 * SKEW.matrix, atol=1e-14)
        np.testing.assert_allclose(Ls @ L, 2.0 * np.eye(3), atol=1e-14)

    def test_symmetric_tensors_annihilated(self, rng):
        t = sym(rng.standard_normal((5, 3, 3)))
        np.testing.assert_allclose(lambda_star(t), 0.0, atol=1e-15)

    def test_skew_gives_twice_axial(self):
        a12, a23, a31 = 0.3, -1.1, 2.5
        t = np.array([[0.0, a12, -a31], [-a12, 0.0, a23], [a31, -a23, 0.0]])
        np.testing.assert_allclose(lambda_star(t), 2.0 * np.array([a23, a31, a12]), atol=1e-15)

    def test_scaled_lambda_star_is_unitary_on_skew(self):
        U = lambda_star_matrix() @ IOTA["skew"] / np.sqrt(2.0)
        np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(U @ U.T, np.eye(3), atol=1e-15)

    def test_axial_map_is_identity_in_these_coordinates(self):
        np.testing.assert_allclose(axial_map(), np.eye(3), atol=1e-15)


class TestEmbeddings:
    @pytest.mark.parametrize("tag,proj", [("sym", SYM), ("skew", SKEW), ("sym0", SYM0), ("trace", PROJ_P)])
    def test_range_is_projector(self, tag, proj):
        i = IOTA[tag]
        np.testing.assert_allclose(i.T @ i, np.eye(i.shape[1]), atol=1e-15)
        np.testing.assert_allclose(i @ i.T, proj.matrix, atol=1e-15)

    @pytest.mark.parametrize(
        "order,tag,dim", [(0, "full", 1), (1, "full", 3), (2, "sym", 6), (2, "sym0", 5), (3, "skew", 9), (3, "full", 27), (2, "zero", 0)]
    )
    def test_dims(self, order, tag, dim):
        assert subspace_dim(order, tag) == dim

    def test_order3_acts_on_last_two_slots(self, rng):
        t = rng.standard_normal((3, 3, 3))
        E = embedding(3, "skew")
        via_embedding = (E @ E.T @ t.reshape(27)).reshape(3, 3, 3)
        np.testing.assert_allclose(via_embedding, skew(t), atol=1e-14)
        np.testing.assert_allclose(lift_last_two(SKEW, t), skew(t), atol=1e-14)

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            embedding(1, "sym")

    def test_read_only(self):
        with pytest.raises(ValueError):
            IOTA["sym"][0, 0] = 2.0
