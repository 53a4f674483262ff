"""Finite-dimensional block operator matrices.

A :class:`BlockOperator` is a real matrix whose rows and columns are split
into labelled spaces. Absent blocks are zero. Blocks may be dense numpy
arrays or scipy sparse matrices; assembly stays sparse whenever any block is
sparse. Adjoints are transposes throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "BlockOperator",
    "Classification",
    "classify",
    "definiteness",
    "schur_complement",
    "block_inverse_2x2",
    "conjugate",
    "isometry_kind",
    "SingularBlockError",
    "PD_RTOL",
]

# pivots / eigenvalues within PD_RTOL * max|M| of zero are "marginal"
PD_RTOL = 1e-10
DENSE_LIMIT = 200


class SingularBlockError(np.linalg.LinAlgError):
    """A block that must be inverted is singular."""


def _is_sparse(m) -> bool:
    return sp.issparse(m)


def _shape_of(m):
    return tuple(m.shape)


def _max_abs(m) -> float:
    if _is_sparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    m = np.asarray(m)
    return float(np.abs(m).max()) if m.size else 0.0


def _to_dense(m) -> np.ndarray:
    return m.toarray() if _is_sparse(m) else np.asarray(m, dtype=float)


class BlockOperator:
    """Real matrix with named block-row and block-column structure.

    Parameters
    ----------
    row_spaces : sequence of (label, dim)
    col_spaces : sequence of (label, dim), optional
        Defaults to ``row_spaces`` (square operator on one space).
    blocks : dict mapping (row_label, col_label) to a matrix, optional
    """

    def __init__(self, row_spaces, col_spaces=None, blocks=None):
        self.row_spaces = [(str(l), int(d)) for l, d in row_spaces]
        self.col_spaces = (
            list(self.row_spaces) if col_spaces is None else [(str(l), int(d)) for l, d in col_spaces]
        )
        for spaces in (self.row_spaces, self.col_spaces):
            labels = [l for l, _ in spaces]
            if len(set(labels)) != len(labels):
                raise ValueError(f"duplicate labels in {labels}")
            if any(d < 0 for _, d in spaces):
                raise ValueError("negative space dimension")
        self._rdim = dict(self.row_spaces)
        self._cdim = dict(self.col_spaces)
        self.blocks = {}
        for (r, c), m in (blocks or {}).items():
            self[r, c] = m

    # ------------------------------------------------------------------ access
    def __setitem__(self, key, m):
        r, c = key
        if r not in self._rdim or c not in self._cdim:
            raise KeyError(f"unknown block ({r!r}, {c!r})")
        if not _is_sparse(m):
            m = np.asarray(m, dtype=float)
            if m.ndim == 0:
                m = m.reshape(1, 1)
        expected = (self._rdim[r], self._cdim[c])
        if _shape_of(m) != expected:
            raise ValueError(f"block ({r}, {c}) has shape {_shape_of(m)}, expected {expected}")
        self.blocks[(r, c)] = m

    def __getitem__(self, key):
        r, c = key
        if (r, c) in self.blocks:
            return self.blocks[(r, c)]
        if r not in self._rdim or c not in self._cdim:
            raise KeyError(f"unknown block ({r!r}, {c!r})")
        return np.zeros((self._rdim[r], self._cdim[c]))

    @property
    def shape(self):
        return (sum(d for _, d in self.row_spaces), sum(d for _, d in self.col_spaces))

    @property
    def row_labels(self):
        return [l for l, _ in self.row_spaces]

    @property
    def col_labels(self):
        return [l for l, _ in self.col_spaces]

    @property
    def is_sparse(self) -> bool:
        return any(_is_sparse(m) for m in self.blocks.values())

    def offsets(self, which: str = "row") -> dict:
        spaces = self.row_spaces if which == "row" else self.col_spaces
        out, k = {}, 0
        for label, d in spaces:
            out[label] = slice(k, k + d)
            k += d
        return out

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return (
            f"BlockOperator({self.shape[0]}x{self.shape[1]}, {kind}, "
            f"rows={self.row_labels}, cols={self.col_labels}, nblocks={len(self.blocks)})"
        )

    # --------------------------------------------------------------- assembly
    def assemble(self, sparse: bool | None = None):
        """Assemble the full matrix in label order (dense unless any block is sparse)."""
        if sparse is None:
            sparse = self.is_sparse or max(self.shape) > 4 * DENSE_LIMIT
        roff, coff = self.offsets("row"), self.offsets("col")
        if not sparse:
            out = np.zeros(self.shape)
            for (r, c), m in self.blocks.items():
                out[roff[r], coff[c]] = _to_dense(m)
            return out
        rows, cols, vals = [], [], []
        for (r, c), m in self.blocks.items():
            coo = sp.coo_matrix(m)
            rows.append(coo.row + roff[r].start)
            cols.append(coo.col + coff[c].start)
            vals.append(coo.data)
        if not rows:
            return sp.csr_matrix(self.shape)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=self.shape
        )

    @classmethod
    def from_matrix(cls, matrix, row_spaces, col_spaces=None, drop_zero: bool = True):
        """Split an assembled matrix into blocks; all-zero blocks are dropped."""
        op = cls(row_spaces, col_spaces)
        if op.shape != _shape_of(matrix):
            raise ValueError(f"matrix shape {_shape_of(matrix)} does not match spaces {op.shape}")
        roff, coff = op.offsets("row"), op.offsets("col")
        if _is_sparse(matrix):
            matrix = sp.csr_matrix(matrix)
        for r, rs in roff.items():
            for c, cs in coff.items():
                if rs.stop == rs.start or cs.stop == cs.start:
                    continue
                blk = matrix[rs, cs]
                if _is_sparse(blk):
                    blk = sp.csr_matrix(blk)
                    blk.eliminate_zeros()
                    if drop_zero and blk.nnz == 0:
                        continue
                    if max(blk.shape) < DENSE_LIMIT:
                        blk = blk.toarray()
                elif drop_zero and not np.any(blk):
                    continue
                op.blocks[(r, c)] = blk
        return op

    # ------------------------------------------------------------- algebra
    @property
    def T(self) -> "BlockOperator":
        out = BlockOperator(self.col_spaces, self.row_spaces)
        for (r, c), m in self.blocks.items():
            out.blocks[(c, r)] = m.T.tocsr() if _is_sparse(m) else m.T.copy()
        return out

    def __neg__(self):
        return self.scaled(-1.0)

    def scaled(self, a: float) -> "BlockOperator":
        out = BlockOperator(self.row_spaces, self.col_spaces)
        out.blocks = {k: a * m for k, m in self.blocks.items()}
        return out

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        if self.row_spaces != other.row_spaces or self.col_spaces != other.col_spaces:
            raise ValueError("cannot add block operators over different spaces")
        out = BlockOperator(self.row_spaces, self.col_spaces)
        out.blocks = dict(self.blocks)
        for k, m in other.blocks.items():
            out.blocks[k] = out.blocks[k] + m if k in out.blocks else m
        return out

    def __sub__(self, other):
        return self + (-other)

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        if [d for _, d in self.col_spaces] != [d for _, d in other.row_spaces]:
            raise ValueError("inner block dimensions do not match")
        prod = self.assemble() @ other.assemble()
        return BlockOperator.from_matrix(prod, self.row_spaces, other.col_spaces)

    def matvec(self, x):
        return self.assemble() @ x

    def restrict(self, rows: Sequence[str], cols: Sequence[str] | None = None) -> "BlockOperator":
        """Sub-operator on the listed row and column labels."""
        cols = rows if cols is None else cols
        out = BlockOperator([(l, self._rdim[l]) for l in rows], [(l, self._cdim[l]) for l in cols])
        for (r, c), m in self.blocks.items():
            if r in rows and c in cols:
                out.blocks[(r, c)] = m
        return out

    def relabel(self, row_labels: Sequence[str], col_labels: Sequence[str] | None = None):
        col_labels = row_labels if col_labels is None else col_labels
        rmap = dict(zip(self.row_labels, row_labels))
        cmap = dict(zip(self.col_labels, col_labels))
        out = BlockOperator(
            [(rmap[l], d) for l, d in self.row_spaces], [(cmap[l], d) for l, d in self.col_spaces]
        )
        out.blocks = {(rmap[r], cmap[c]): m for (r, c), m in self.blocks.items()}
        return out

    def norm_max(self) -> float:
        return max((_max_abs(m) for m in self.blocks.values()), default=0.0)

    # ------------------------------------------------------------------ JSON
    def to_dict(self) -> dict:
        blocks = []
        for (r, c), m in self.blocks.items():
            if _is_sparse(m):
                coo = sp.coo_matrix(m)
                data = {"row": coo.row.tolist(), "col": coo.col.tolist(), "val": coo.data.tolist()}
                blocks.append({"row": r, "col": c, "format": "coo", "data": data})
            else:
                blocks.append({"row": r, "col": c, "format": "dense", "data": np.asarray(m).tolist()})
        return {
            "row_spaces": [[l, d] for l, d in self.row_spaces],
            "col_spaces": [[l, d] for l, d in self.col_spaces],
            "blocks": blocks,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "BlockOperator":
        op = cls(d["row_spaces"], d.get("col_spaces"))
        for b in d.get("blocks", []):
            shape = (op._rdim[b["row"]], op._cdim[b["col"]])
            if b["format"] == "dense":
                m = np.asarray(b["data"], dtype=float).reshape(shape)
            elif b["format"] == "coo":
                data = b["data"]
                m = sp.csr_matrix((data["val"], (data["row"], data["col"])), shape=shape)
            else:
                raise ValueError(f"unknown block format {b['format']!r}")
            op[b["row"], b["col"]] = m
        return op

    @classmethod
    def from_json(cls, text: str) -> "BlockOperator":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    symmetry: str  # "selfadjoint" | "skew" | "neither"
    definiteness: str  # "pos" | "indef" | "marginal"
    min_pivot: float

    @property
    def positive_definite(self) -> bool:
        return self.definiteness == "pos"


def _as_matrix(b):
    return b.assemble() if isinstance(b, BlockOperator) else b


def definiteness(M, rtol: float = PD_RTOL) -> tuple[str, float]:
    """Three-valued positivity verdict for a symmetric matrix.

    Dense matrices use the smallest eigenvalue; sparse ones the pivots of a
    symmetric-mode LU factorisation (Sylvester inertia). Values within
    ``rtol * max|M|`` of zero give ``"marginal"``.
    """
    M = _as_matrix(M)
    n = M.shape[0]
    if n == 0:
        return "pos", np.inf
    scale = _max_abs(M)
    if scale == 0.0:
        return "marginal", 0.0
    band = rtol * scale
    if not _is_sparse(M) or n <= DENSE_LIMIT * 4:
        A = _to_dense(M)
        lo = float(sla.eigvalsh(0.5 * (A + A.T), subset_by_index=[0, 0])[0])
    else:
        A = sp.csc_matrix(0.5 * (M + M.T))
        try:
            lu = spla.splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError:
            return "marginal", 0.0
        if not (np.array_equal(lu.perm_r, lu.perm_c)):
            # symmetric pivoting was abandoned; fall back to a dense check
            lo = float(sla.eigvalsh(A.toarray(), subset_by_index=[0, 0])[0])
        else:
            lo = float(lu.U.diagonal().min())
    if lo > band:
        return "pos", lo
    if lo < -band:
        return "indef", lo
    return "marginal", lo


def classify(b, tol: float = 1e-12, pd_rtol: float = PD_RTOL) -> Classification:
    """Structural classification of a square operator.

    ``selfadjoint`` if ``||M - M^T|| <= tol ||M||``, ``skew`` if
    ``||M + M^T|| <= tol ||M||`` (max norms). The zero matrix counts as
    selfadjoint. Positive definiteness is judged on the symmetric part.
    """
    M = _as_matrix(b)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"classify needs a square operator, got {M.shape}")
    scale = _max_abs(M)
    if scale == 0.0:
        return Classification("selfadjoint", "marginal" if M.shape[0] else "pos", 0.0)
    asym = _max_abs(M - M.T)
    sym_part = _max_abs(M + M.T)
    if asym <= tol * scale:
        kind = "selfadjoint"
    elif sym_part <= tol * scale:
        kind = "skew"
    else:
        kind = "neither"
    if kind == "skew":
        return Classification(kind, "marginal", 0.0)
    verdict, lo = definiteness(M, pd_rtol)
    return Classification(kind, verdict, lo)


def isometry_kind(S, tol: float = 1e-12) -> str | None:
    """``"coisometry"`` if ``S S^T = 1``, ``"isometry"`` if ``S^T S = 1``, ``"unitary"`` if both."""
    S = _as_matrix(S)
    m, n = S.shape
    rows = _max_abs(S @ S.T - (sp.identity(m) if _is_sparse(S) else np.eye(m))) <= tol if m else True
    cols = _max_abs(S.T @ S - (sp.identity(n) if _is_sparse(S) else np.eye(n))) <= tol if n else True
    if rows and cols:
        return "unitary"
    if rows:
        return "coisometry"
    if cols:
        return "isometry"
    return None


# ---------------------------------------------------------------------------
# 2x2 block calculus


def _group_matrix(b: BlockOperator, rows: Iterable[str], cols: Iterable[str]) -> np.ndarray:
    return _to_dense(b.restrict(list(rows), list(cols)).assemble(sparse=False))


def _split_labels(b: BlockOperator, top_labels, bottom_labels):
    labels = b.row_labels
    if top_labels is None:
        if len(labels) != 2:
            raise ValueError("need explicit top/bottom labels for more than two block rows")
        top_labels, bottom_labels = [labels[0]], [labels[1]]
    elif bottom_labels is None:
        bottom_labels = [l for l in labels if l not in top_labels]
    return list(top_labels), list(bottom_labels)


def _inv(m: np.ndarray, what: str) -> np.ndarray:
    if m.size == 0:
        return m.copy()
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularBlockError(f"{what} is singular (condition number {cond:.3g})")
    return np.linalg.inv(m)


def schur_complement(b: BlockOperator, top_labels=None, bottom_labels=None) -> np.ndarray:
    """Schur complement ``C2 - E C0^{-1} E^*`` of the top-left sub-block."""
    if b.row_labels != b.col_labels:
        raise ValueError("schur_complement needs a square block layout")
    top, bot = _split_labels(b, top_labels, bottom_labels)
    C0 = _group_matrix(b, top, top)
    Et = _group_matrix(b, top, bot)
    E = _group_matrix(b, bot, top)
    C2 = _group_matrix(b, bot, bot)
    return C2 - E @ _inv(C0, "top-left block") @ Et


def block_inverse_2x2(b: BlockOperator, top_labels=None, bottom_labels=None) -> BlockOperator:
    """Inverse of ``[[C0, E^*], [E, C2]]`` via symmetric Gauss elimination.

    Returns a two-block operator with labels ``"top"`` and ``"bottom"`` when
    label groups are given, else with the original two labels.
    """
    if b.row_labels != b.col_labels:
        raise ValueError("block_inverse_2x2 needs a square block layout")
    explicit = top_labels is not None
    top, bot = _split_labels(b, top_labels, bottom_labels)
    C0 = _group_matrix(b, top, top)
    Et = _group_matrix(b, top, bot)
    E = _group_matrix(b, bot, top)
    C2 = _group_matrix(b, bot, bot)
    C0i = _inv(C0, "top-left block")
    Si = _inv(C2 - E @ C0i @ Et, "Schur complement")
    tl = C0i + C0i @ Et @ Si @ E @ C0i
    tr = -C0i @ Et @ Si
    bl = -Si @ E @ C0i
    dims = dict(b.row_spaces)
    if explicit or len(top) > 1 or len(bot) > 1:
        names = ("top", "bottom")
        spaces = [("top", sum(dims[l] for l in top)), ("bottom", sum(dims[l] for l in bot))]
    else:
        names = (top[0], bot[0])
        spaces = [(top[0], dims[top[0]]), (bot[0], dims[bot[0]])]
    return BlockOperator(
        spaces,
        blocks={
            (names[0], names[0]): tl,
            (names[0], names[1]): tr,
            (names[1], names[0]): bl,
            (names[1], names[1]): Si,
        },
    )


def conjugate(b: BlockOperator, S: BlockOperator) -> BlockOperator:
    """``S b S^T`` with the block structure of ``S``'s target spaces."""
    if [d for _, d in S.col_spaces] != [d for _, d in b.row_spaces]:
        raise ValueError(
            f"S acts on {[d for _, d in S.col_spaces]}, operator lives on {[d for _, d in b.row_spaces]}"
        )
    if b.shape[0] != b.shape[1]:
        raise ValueError("conjugate needs a square operator")
    Sm = S.assemble()
    prod = Sm @ b.assemble() @ Sm.T
    return BlockOperator.from_matrix(prod, S.row_spaces, S.row_spaces)
