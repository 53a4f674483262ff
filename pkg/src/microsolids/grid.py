"""Finite differences on a uniform box with homogeneous Dirichlet boundary.

Fields live on the ``n^3`` interior nodes of ``[0, (n+1) h]^3``. A field with
``m`` components per node is stored node-major with the components
contiguous (index ``node * m + c``). Nodes are ordered C-style in
``(ix, iy, iz)``.

The gradient uses forward differences with a zero ghost layer; the
divergence is *defined* as ``-grad^T``. Every spatial operator assembled here
is therefore exactly skew-symmetric, not just up to roundoff.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .blocks import BlockOperator
from .tensors import embedding

__all__ = [
    "Grid",
    "TensorField",
    "diff_1d",
    "grad_matrix",
    "div_matrix",
    "lift_pointwise",
    "lift_block_operator",
    "assemble_A",
    "node_coordinates",
    "write_snapshot",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` interior nodes per axis and spacing ``h``."""

    n: int
    h: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 interior nodes, got {self.n}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive, got {self.h}")

    @classmethod
    def unit(cls, n: int) -> "Grid":
        """Grid on the unit cube, ``h = 1 / (n + 1)``."""
        return cls(n, 1.0 / (n + 1))

    @property
    def nodes(self) -> int:
        return self.n**3

    @property
    def extent(self) -> float:
        return (self.n + 1) * self.h


def node_coordinates(grid: Grid) -> np.ndarray:
    """``(n^3, 3)`` array of node positions in storage order."""
    x = (np.arange(grid.n) + 1.0) * grid.h
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])


def diff_1d(n: int, h: float) -> sp.csr_matrix:
    """Forward difference ``(u[i+1] - u[i]) / h`` with ``u[n] = 0``."""
    return sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="csr") / h


def _axis_diffs(grid: Grid):
    D = diff_1d(grid.n, grid.h)
    I = sp.identity(grid.n, format="csr")
    return (
        sp.kron(sp.kron(D, I), I, format="csr"),
        sp.kron(sp.kron(I, D), I, format="csr"),
        sp.kron(sp.kron(I, I), D, format="csr"),
    )


def grad_matrix(grid: Grid, q: int) -> sp.csr_matrix:
    """Gradient from order-``q`` to order-``q+1`` fields; the new slot comes first.

    The result has shape ``(n^3 3^{q+1}, n^3 3^q)``; per node the output index
    is ``d * 3^q + c`` for derivative direction ``d`` and input component ``c``.
    """
    if q not in (0, 1, 2):
        raise ValueError(f"gradient is supported for orders 0, 1, 2; got {q}")
    m = 3**q
    Im = sp.identity(m, format="csr")
    G = None
    for d, Dd in enumerate(_axis_diffs(grid)):
        e = np.zeros((3, 1))
        e[d, 0] = 1.0
        term = sp.kron(Dd, sp.kron(sp.csr_matrix(e), Im), format="csr")
        G = term if G is None else G + term
    G = G.tocsr()
    G.sort_indices()
    return G


def div_matrix(grid: Grid, q: int) -> sp.csr_matrix:
    """Divergence from order-``q`` to order-``q-1`` fields, ``-grad_matrix(q-1)^T``."""
    if q not in (1, 2, 3):
        raise ValueError(f"divergence is supported for orders 1, 2, 3; got {q}")
    return (-grad_matrix(grid, q - 1).T).tocsr()


def lift_pointwise(local, grid: Grid | int) -> sp.csr_matrix:
    """Replicate a per-node matrix over all nodes (block diagonal)."""
    nodes = grid.nodes if isinstance(grid, Grid) else int(grid)
    local = local.toarray() if sp.issparse(local) else np.asarray(local, dtype=float)
    if local.ndim != 2:
        raise ValueError("per-node map must be a matrix")
    return sp.kron(sp.identity(nodes, format="csr"), sp.csr_matrix(local), format="csr")


def lift_block_operator(op: BlockOperator, grid: Grid | int) -> BlockOperator:
    """Lift every block of a per-node operator to the grid."""
    nodes = grid.nodes if isinstance(grid, Grid) else int(grid)
    out = BlockOperator(
        [(l, d * nodes) for l, d in op.row_spaces], [(l, d * nodes) for l, d in op.col_spaces]
    )
    for key, m in op.blocks.items():
        out.blocks[key] = lift_pointwise(m, nodes)
    return out


def assemble_A(layout: Sequence, pairs: Iterable, grid: Grid) -> BlockOperator:
    """Skew spatial operator from (stress block, velocity block) pairs.

    Each pair ``(r, c)`` places ``-E_r^T grad E_c`` in block ``(r, c)`` and its
    negative transpose in ``(c, r)``, where ``E`` are the subspace embeddings
    of the layout entries. The stress block must have order one above the
    velocity block.
    """
    by_label = {b.label: b for b in layout}
    op = BlockOperator([(b.label, b.dim * grid.nodes) for b in layout])
    seen = set()
    for r, c in pairs:
        if r not in by_label or c not in by_label:
            raise ValueError(f"pair ({r}, {c}) names an unknown block")
        if (r, c) in seen or (c, r) in seen:
            raise ValueError(f"pair ({r}, {c}) given twice")
        seen.add((r, c))
        br, bc = by_label[r], by_label[c]
        if br.order != bc.order + 1:
            raise ValueError(f"pair ({r}, {c}): orders {br.order} and {bc.order} are not grad-compatible")
        G = grad_matrix(grid, bc.order)
        Er = lift_pointwise(embedding(br.order, br.tag).T, grid)
        Ec = lift_pointwise(embedding(bc.order, bc.tag), grid)
        blk = (-(Er @ G @ Ec)).tocsr()
        blk.eliminate_zeros()
        op.blocks[(r, c)] = blk
        op.blocks[(c, r)] = (-blk.T).tocsr()
    return op


@dataclass
class TensorField:
    """Values of a subspace-tagged tensor field on a grid (coordinates per node)."""

    grid: Grid
    order: int
    tag: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        d = embedding(self.order, self.tag).shape[1]
        if self.values.size != self.grid.nodes * d:
            raise ValueError(f"field needs {self.grid.nodes * d} values, got {self.values.size}")

    @property
    def dim(self) -> int:
        return embedding(self.order, self.tag).shape[1]

    def full(self) -> np.ndarray:
        """Per-node full tensors, shape ``(n^3,) + (3,) * order``."""
        E = embedding(self.order, self.tag)
        vals = self.values.reshape(self.grid.nodes, -1) @ E.T
        return vals.reshape((self.grid.nodes,) + (3,) * self.order)


def write_snapshot(path, fields: dict, grid: Grid, layout: Sequence, fmt: str = "binary", meta=None):
    """Write block vectors as flat little-endian float64 or CSV plus a JSON sidecar.

    ``fields`` maps block labels to node-major vectors; the sidecar records the
    grid, the block layout, the byte/column order and any extra metadata.
    """
    path = Path(path)
    order = [b for b in layout if b.label in fields]
    if fmt == "binary":
        data = np.concatenate([np.asarray(fields[b.label], dtype="<f8").ravel() for b in order])
        data.tofile(path)
    elif fmt == "csv":
        cols, header = [], []
        for b in order:
            v = np.asarray(fields[b.label], dtype=float).reshape(grid.nodes, b.dim)
            cols.append(v)
            header += [f"{b.label}_{k}" for k in range(b.dim)]
        np.savetxt(path, np.hstack(cols), delimiter=",", header=",".join(header), comments="", fmt="%.17e")
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    sidecar = {
        "format": fmt,
        "dtype": "float64 little-endian" if fmt == "binary" else "text",
        "grid": {"n": grid.n, "h": grid.h},
        "node_order": "C order over (ix, iy, iz)",
        "blocks": [b.to_dict() for b in order],
        "layout": "block-major, node-major, component-minor" if fmt == "binary" else "one row per node",
        "meta": meta or {},
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
    return path
