"""Reduction maps, conjugation, degenerate laws and descendant dynamics."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microsolids import zoo
from microsolids.blocks import classify, isometry_kind
from microsolids.evolution import gaussian_pulse
from microsolids.grid import Grid
from microsolids.materials import Block
from microsolids.reduction import (
    Action,
    PreconditionError,
    ReductionMap,
    action_matrix,
    check_compatibility,
    conjugate_law,
    conjugate_problem,
    degenerate_reduce,
    invariance_defects,
    verify_descendant_dynamics,
)
from microsolids.tensors import IOTA, lambda_matrix

G4 = Grid.unit(4)
G3 = Grid.unit(3)


class TestActions:
    @pytest.mark.parametrize(
        "action,block,shape,child",
        [
            ("identity", Block("x", 1), (3, 3), Block("x", 1)),
            ("sym", Block("x", 2), (6, 9), Block("x", 2, "sym")),
            ("skew", Block("x", 3), (9, 27), Block("x", 3, "skew")),
            ("sym0", Block("x", 2), (5, 9), Block("x", 2, "sym0")),
            ("axial", Block("x", 1), (3, 3), Block("x", 2, "skew")),
            ("axial", Block("x", 2), (9, 9), Block("x", 3, "skew")),
        ],
    )
    def test_shapes(self, action, block, shape, child):
        m, cb = action_matrix(action, block)
        assert m.shape == shape
        assert cb == child
        assert isometry_kind(m) in ("unitary", "coisometry")

    def test_zero(self):
        m, cb = action_matrix("zero", Block("x", 2))
        assert m.shape == (0, 9) and cb is None

    def test_axial_is_scaled_lambda_star(self):
        m, _ = action_matrix("axial", Block("w", 1))
        np.testing.assert_allclose(m, IOTA["skew"].T @ lambda_matrix() / np.sqrt(2.0), atol=1e-15)

    @pytest.mark.parametrize("action,block", [("sym", Block("x", 1)), ("skew", Block("x", 2, "sym")),
                                              ("axial", Block("x", 3)), ("bogus", Block("x", 1))])
    def test_rejected(self, action, block):
        with pytest.raises(ValueError):
            action_matrix(action, block)


class TestReductionMap:
    def test_catalog_edge_layouts(self):
        S = zoo.reduction_edge("micromorphic", "classical")
        assert [b.label for b in S.child_layout] == ["v", "T"]
        assert S.tombstones == ["psidot", "mu", "s"]
        assert S.kind == "descendant"
        assert zoo.reduction_edge("cosserat", "cosserat_relative").kind == "relative"

    def test_from_spec_forms(self):
        layout = zoo.MODELS["classical"].layout
        S = ReductionMap.from_spec(layout, ["identity", ["identity", "sigma"]])
        assert [b.label for b in S.child_layout] == ["v", "sigma"]
        S = ReductionMap.from_spec(layout, [{"action": "identity"}, {"action": "zero"}])
        assert S.tombstones == ["T"]

    def test_order_must_follow_layout(self):
        layout = zoo.MODELS["classical"].layout
        with pytest.raises(ValueError):
            ReductionMap(list(layout), [Action("T", "identity"), Action("v", "identity")])

    def test_matrix_action_must_be_partial_isometry(self):
        layout = [Block("v", 1)]
        with pytest.raises(ValueError):
            ReductionMap(layout, [Action("v", "matrix", matrix=2.0 * np.eye(3))])

    def test_describe(self):
        d = zoo.reduction_edge("micromorphic", "cosserat_relative").describe()
        assert [a["action"] for a in d["actions"]] == ["identity", "skew", "identity", "skew", "zero"]
        assert d["tombstones"] == ["s"]

    def test_lifted_is_block_diagonal_kron(self):
        S = zoo.reduction_edge("micromorphic", "classical")
        local = S.per_node().assemble()
        lifted = S.lifted(2)
        np.testing.assert_array_equal(lifted["T", "Sigma"].toarray(), np.kron(np.eye(2), local[3:, 12:21]))


class TestConjugation:
    @pytest.mark.parametrize("edge", list(zoo.EDGES))
    def test_structure_preserved(self, edge):
        law = zoo.build_law(edge[0])
        child = conjugate_law(law, zoo.reduction_edge(*edge))
        assert classify(child.M0).symmetry == "selfadjoint"
        assert classify(child.M0).definiteness == "pos"
        if child.M1.norm_max() > 0:
            assert classify(child.M1).symmetry == "skew"
        assert classify(child.M2).symmetry == "selfadjoint"

    @given(st.integers(0, 10_000), st.lists(st.booleans(), min_size=5, max_size=5))
    def test_positive_definite_preserved(self, seed, keep):
        r = np.random.default_rng(seed)
        a = r.standard_normal((5, 5))
        M = a @ a.T + 0.1 * np.eye(5)
        rows = [i for i, k in enumerate(keep) if k] or [0]
        S = np.eye(5)[rows]
        assert np.linalg.eigvalsh(S @ M @ S.T).min() > 0

    @pytest.mark.parametrize("edge", list(zoo.EDGES))
    def test_compatibility_identity(self, edge):
        p = zoo.build(edge[0], None, G3)
        S = zoo.reduction_edge(*edge).lifted(G3).assemble(sparse=True)
        assert check_compatibility(p.matrix("A"), S)

    def test_A_conjugate_is_SAS(self):
        p = zoo.build("micromorphic", None, G3)
        S = zoo.reduction_edge("micromorphic", "sym_stress")
        d = conjugate_problem(p, S)
        Sg = S.lifted(G3).assemble(sparse=True)
        direct = (Sg @ p.matrix("A") @ Sg.T).toarray()
        np.testing.assert_allclose(d.child.matrix("A").toarray(), direct, atol=1e-14)
        assert abs(d.child.matrix("A") + d.child.matrix("A").T).max() == 0.0

    def test_layout_mismatch(self):
        p = zoo.build("classical", None, G3)
        with pytest.raises(ValueError):
            conjugate_problem(p, zoo.reduction_edge("cosserat", "cosserat_relative"))

    def test_child_forcing_is_projected(self):
        p = zoo.build("micromorphic", None, G3, T=0.1)
        f = gaussian_pulse(p.layout, G3, "Sigma", 1, onset=0.0, center=0.05, width=0.01)
        p = p.with_forcing(f)
        d = conjugate_problem(p, zoo.reduction_edge("micromorphic", "classical"))
        fc = d.child.forcing(0.05)
        S = d.S_grid.assemble(sparse=True)
        np.testing.assert_allclose(fc, S @ f(0.05), atol=1e-15)


class TestDegenerate:
    def test_range_restriction(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        N0 = Q[:, :4] @ np.diag([1.0, 2.0, 3.0, 4.0]) @ Q[:, :4].T
        a = rng.standard_normal((6, 6))
        red = degenerate_reduce(N0, np.zeros((6, 6)), a - a.T)
        assert red.rank == 4
        assert red.skew_ok
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(red.M0)), [0.25, 1 / 3, 0.5, 1.0], atol=1e-12)
        np.testing.assert_allclose(red.Q @ red.Q.T, Q[:, :4] @ Q[:, :4].T, atol=1e-12)

    def test_not_psd(self):
        with pytest.raises(ValueError):
            degenerate_reduce(np.diag([1.0, -1.0]), np.zeros((2, 2)), np.zeros((2, 2)))

    def test_zero(self):
        with pytest.raises(ValueError):
            degenerate_reduce(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))

    def test_nonsymmetric(self):
        with pytest.raises(ValueError):
            degenerate_reduce(np.triu(np.ones((2, 2))), np.zeros((2, 2)), np.zeros((2, 2)))


class TestDescendantDynamics:
    def test_identity_map_exact(self):
        p = zoo.build("classical", None, G3, T=0.1)
        S = ReductionMap.from_spec(p.layout, ["identity", "identity"])
        d = conjugate_problem(p, S)
        f = gaussian_pulse(d.child.layout, G3, "v", 0, onset=0.0, center=0.05, width=0.01)
        rep = verify_descendant_dynamics(d, f, 0.01)
        assert rep["precondition_ok"]
        assert rep["dynamics_discrepancy"] == 0.0

    def test_coupled_coefficients_refused(self):
        p = zoo.build("micromorphic", None, G3, T=0.1)
        d = conjugate_problem(p, zoo.reduction_edge("micromorphic", "classical"))
        f = gaussian_pulse(d.child.layout, G3, "v", 0, onset=0.0, center=0.05, width=0.01)
        with pytest.raises(PreconditionError):
            verify_descendant_dynamics(d, f, 0.01)

    def test_invariant_subspace_case(self):
        # omega0 = -mu1 and beta0 = -lam1 decouple the skew micro-deformation from the rest
        params = {"omega0": -1.0, "beta0": -1.0, "mu1": 1.0, "lam1": 1.0, "mu0": 2.0, "lam0": 2.0}
        p = zoo.build("micromorphic", params, G4, T=0.2)
        d = conjugate_problem(p, zoo.reduction_edge("micromorphic", "cosserat_relative"))
        assert max(invariance_defects(p, d.S_grid).values()) <= 1e-12
        f = gaussian_pulse(d.child.layout, G4, "v", 0, onset=0.0, center=0.1, width=0.02)
        rep = verify_descendant_dynamics(d, f, 1e-3)
        assert rep["dynamics_discrepancy"] <= 1e-10
        assert rep["identity_checks"]["child_A_exactly_skew"]

    def test_forced_run_reports_defects(self):
        p = zoo.build("micromorphic", None, G3, T=0.05)
        d = conjugate_problem(p, zoo.reduction_edge("micromorphic", "classical"))
        f = gaussian_pulse(d.child.layout, G3, "v", 0, onset=0.0, center=0.025, width=0.005)
        rep = verify_descendant_dynamics(d, f, 0.005, force=True)
        assert not rep["precondition_ok"]
        assert rep["invariance_defects"]["A"] > 0.1


class TestRelativeCoefficients:
    @given(st.integers(0, 10_000), st.floats(-2.0, 2.0))
    def test_density_positivity_equivalent(self, seed, shift):
        r = np.random.default_rng(seed)
        a = r.standard_normal((3, 3))
        rho1 = a @ a.T + shift * np.eye(3)
        F = IOTA["skew"].T @ lambda_matrix()
        rho2 = 0.5 * F @ rho1 @ F.T
        l1, l2 = np.linalg.eigvalsh(rho1).min(), np.linalg.eigvalsh(rho2).min()
        if abs(l1) > 1e-9:
            assert (l1 > 0) == (l2 > 0)
