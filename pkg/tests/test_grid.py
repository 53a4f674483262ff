"""Finite-difference operators, lifting and snapshot output."""
from __future__ import annotations

import json

import numpy as np
import pytest
import scipy.sparse as sp

from microsolids.blocks import BlockOperator
from microsolids.grid import (
    Grid,
    TensorField,
    assemble_A,
    diff_1d,
    div_matrix,
    grad_matrix,
    lift_block_operator,
    lift_pointwise,
    node_coordinates,
    write_snapshot,
)
from microsolids.materials import Block
from microsolids.tensors import IOTA


class TestGrid:
    def test_unit(self):
        g = Grid.unit(4)
        assert g.h == pytest.approx(0.2)
        assert g.nodes == 64
        assert g.extent == pytest.approx(1.0)

    @pytest.mark.parametrize("n,h", [(1, 0.1), (4, 0.0), (4, -1.0), (4, np.inf)])
    def test_invalid(self, n, h):
        with pytest.raises(ValueError):
            Grid(n, h)

    def test_coordinates_c_order(self):
        X = node_coordinates(Grid(3, 0.5))
        np.testing.assert_allclose(X[0], [0.5, 0.5, 0.5])
        np.testing.assert_allclose(X[1], [0.5, 0.5, 1.0])  # z varies fastest
        np.testing.assert_allclose(X[3], [0.5, 1.0, 0.5])


class TestDifferences:
    def test_diff_1d(self):
        D = diff_1d(3, 0.5).toarray()
        np.testing.assert_array_equal(D, [[-2, 2, 0], [0, -2, 2], [0, 0, -2]])

    @pytest.mark.parametrize("q", [0, 1, 2])
    def test_divergence_is_minus_adjoint(self, q):
        g = Grid(3, 0.3)
        G = grad_matrix(g, q)
        assert G.shape == (g.nodes * 3 ** (q + 1), g.nodes * 3**q)
        assert abs(div_matrix(g, q + 1) + G.T).max() == 0.0

    def test_new_slot_first(self):
        # u = (0, x_1 profile, 0): only output entries d*3 + 1 can be nonzero
        g = Grid(4, 0.2)
        X = node_coordinates(g)
        u = np.zeros((g.nodes, 3))
        u[:, 1] = X[:, 0] * (1 - X[:, 0])
        Gu = (grad_matrix(g, 1) @ u.ravel()).reshape(g.nodes, 3, 3)
        assert np.abs(Gu[:, :, [0, 2]]).max() == 0.0
        assert np.abs(Gu[:, 0, 1]).max() > 0.0
        # y and z differences vanish except against the zero ghost layer
        idx = np.arange(g.nodes).reshape(4, 4, 4)
        inner = idx[:, :-1, :-1].ravel()
        assert np.abs(Gu[inner, 1:, 1]).max() == 0.0

    def test_second_order_at_midpoints(self):
        # forward differences equal the derivative at x + h/2 up to O(h^2)
        errs = []
        for n in (8, 16, 32):
            g = Grid.unit(n)
            X = node_coordinates(g)
            f = lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * np.sin(np.pi * x[:, 2])
            Gu = (grad_matrix(g, 0) @ f(X)).reshape(g.nodes, 3)
            Xm = X.copy()
            Xm[:, 0] += 0.5 * g.h
            exact = np.pi * np.cos(np.pi * Xm[:, 0]) * np.sin(np.pi * Xm[:, 1]) * np.sin(np.pi * Xm[:, 2])
            errs.append(np.abs(Gu[:, 0] - exact).max())
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:])) * np.log(2) / np.log(np.array([17 / 9, 33 / 17]))
        assert rates.min() > 1.8

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            grad_matrix(Grid(2, 1.0), 3)
        with pytest.raises(ValueError):
            div_matrix(Grid(2, 1.0), 0)


class TestLifting:
    def test_pointwise_is_kron(self, rng):
        m = rng.standard_normal((2, 3))
        L = lift_pointwise(m, 4)
        np.testing.assert_array_equal(L.toarray(), np.kron(np.eye(4), m))

    def test_block_operator(self):
        op = BlockOperator([("a", 2), ("b", 1)], blocks={("a", "b"): np.ones((2, 1))})
        L = lift_block_operator(op, 5)
        assert L.shape == (15, 15)
        assert sp.issparse(L["a", "b"])


class TestAssembleA:
    LAYOUT = [Block("v", 1), Block("omega", 2, "skew"), Block("T", 2, "sym"), Block("mu", 3, "skew")]

    def test_exactly_skew(self):
        g = Grid(4, 0.2)
        A = assemble_A(self.LAYOUT, [("T", "v"), ("mu", "omega")], g).assemble()
        assert abs(A + A.T).max() == 0.0

    def test_block_is_projected_gradient(self):
        g = Grid(3, 0.25)
        A = assemble_A(self.LAYOUT, [("T", "v")], g)
        isym = lift_pointwise(IOTA["sym"].T, g)
        expected = -(isym @ grad_matrix(g, 1))
        assert abs(A["T", "v"] - expected).max() < 1e-15

    def test_order_mismatch(self):
        with pytest.raises(ValueError):
            assemble_A(self.LAYOUT, [("mu", "v")], Grid(2, 1.0))

    def test_duplicate_pair(self):
        with pytest.raises(ValueError):
            assemble_A(self.LAYOUT, [("T", "v"), ("v", "T")], Grid(2, 1.0))

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            assemble_A(self.LAYOUT, [("T", "w")], Grid(2, 1.0))


class TestSnapshots:
    def test_tensor_field_full(self):
        g = Grid(2, 1.0)
        vals = np.zeros(g.nodes * 3)
        vals[0] = np.sqrt(2.0)
        full = TensorField(g, 2, "skew", vals).full()
        assert full.shape == (8, 3, 3)
        np.testing.assert_allclose(full[0], [[0, 0, 0], [0, 0, 1], [0, -1, 0]], atol=1e-15)

    def test_tensor_field_size(self):
        with pytest.raises(ValueError):
            TensorField(Grid(2, 1.0), 1, "full", np.zeros(5))

    def test_binary_roundtrip(self, tmp_path, rng):
        g = Grid(2, 0.5)
        layout = [Block("v", 1), Block("T", 2, "sym")]
        fields = {"v": rng.standard_normal(24), "T": rng.standard_normal(48)}
        path = write_snapshot(tmp_path / "s.bin", fields, g, layout, meta={"t": 0.5})
        data = np.fromfile(path, dtype="<f8")
        np.testing.assert_array_equal(data, np.concatenate([fields["v"], fields["T"]]))
        side = json.loads((tmp_path / "s.bin.json").read_text())
        assert side["grid"] == {"n": 2, "h": 0.5}
        assert [b["label"] for b in side["blocks"]] == ["v", "T"]
        assert side["meta"]["t"] == 0.5

    def test_csv(self, tmp_path, rng):
        g = Grid(2, 0.5)
        layout = [Block("v", 1)]
        v = rng.standard_normal(24)
        write_snapshot(tmp_path / "s.csv", {"v": v}, g, layout, fmt="csv")
        back = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(back.ravel(), v)

    def test_bad_format(self, tmp_path):
        with pytest.raises(ValueError):
            write_snapshot(tmp_path / "s", {}, Grid(2, 1.0), [], fmt="hdf5")
