"""Descendants and relatives of evolution problems in finite dimensions.

A :class:`ReductionMap` acts block by block on a mother layout. Each action
is the adjoint of a canonical embedding (``sym``, ``skew``, ``sym0`` on the
last two slots of order-2 or order-3 blocks), the identity, the axial-vector
unitary, the annihilation onto the zero space, or a user matrix. Blocks sent
to the zero space are dropped from the child layout and kept as tombstones.

After discretisation every operator is bounded, so closure questions do not
arise: the child coefficients are simply ``S M_i S^T``. The child spatial
operator is ``S A S^T``, skew-symmetrised exactly so that the child stays
exactly skew.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .blocks import BlockOperator, classify, isometry_kind
from .evolution import EvoProblem, Forcing, run
from .grid import Grid, lift_pointwise
from .materials import Block, MaterialLaw, Validity
from .tensors import IOTA, axial_map, embedding

__all__ = [
    "Action",
    "ReductionMap",
    "DescendantProblem",
    "PreconditionError",
    "ACTIONS",
    "action_matrix",
    "conjugate_law",
    "conjugate_problem",
    "check_compatibility",
    "degenerate_reduce",
    "DegenerateReduction",
    "invariance_defects",
    "verify_descendant_dynamics",
]

ACTIONS = ("identity", "sym", "skew", "sym0", "zero", "axial", "matrix")


class PreconditionError(ValueError):
    """The mother coefficients couple the retained subspace to its complement."""


def action_matrix(action: str, block: Block, matrix=None) -> tuple[np.ndarray, Block | None]:
    """Per-node matrix of an action on ``block`` and the resulting child block.

    Subspace actions on order-3 blocks act on the last two slots. ``axial``
    maps vectors to skew coordinates (order 1 to order 2) and, on order-2
    blocks, acts on the last slot.
    """
    q = block.order
    if block.tag != "full" and action not in ("identity", "zero", "matrix"):
        raise ValueError(f"action {action!r} needs a full-tensor block, {block.label} is {block.tag}")
    if action == "identity":
        return np.eye(block.dim), block
    if action == "zero":
        return np.zeros((0, block.dim)), None
    if action in ("sym", "skew", "sym0"):
        if q not in (2, 3):
            raise ValueError(f"action {action!r} needs an order-2 or order-3 block")
        return embedding(q, action).T, Block(block.label, q, action)
    if action == "axial":
        T = axial_map()
        if q == 1:
            return T, Block(block.label, 2, "skew")
        if q == 2:
            return np.kron(np.eye(3), T), Block(block.label, 3, "skew")
        raise ValueError("axial action needs an order-1 or order-2 block")
    if action == "matrix":
        if matrix is None:
            raise ValueError("matrix action needs a matrix")
        m = np.asarray(matrix, dtype=float)
        if m.shape[1] != block.dim:
            raise ValueError(f"matrix for {block.label} has {m.shape[1]} columns, block dim is {block.dim}")
        return m, None
    raise ValueError(f"unknown action {action!r}; choose from {ACTIONS}")


@dataclass(frozen=True)
class Action:
    source: str
    action: str
    target: str | None = None
    matrix: tuple | None = None  # only for action == "matrix"
    target_order: int | None = None
    target_tag: str = "full"


@dataclass
class ReductionMap:
    """Block-diagonal map from a mother layout to a child layout.

    Parameters
    ----------
    mother_layout : list of Block
    actions : list of Action, one per mother block in layout order
    """

    mother_layout: list
    actions: list
    name: str = ""

    def __post_init__(self):
        labels = [b.label for b in self.mother_layout]
        if [a.source for a in self.actions] != labels:
            raise ValueError(f"actions must follow the mother layout {labels}")
        self._local = []
        child = []
        for b, a in zip(self.mother_layout, self.actions):
            m, cb = action_matrix(a.action, b, a.matrix)
            if a.action == "zero":
                self._local.append((b.label, None, m))
                continue
            target = a.target or b.label
            if cb is None:  # user matrix
                cb = Block(target, a.target_order if a.target_order is not None else b.order, a.target_tag)
                if cb.dim != m.shape[0]:
                    raise ValueError(f"matrix for {b.label} maps to {m.shape[0]} dims, target block has {cb.dim}")
            else:
                cb = Block(target, cb.order, cb.tag)
            child.append(cb)
            self._local.append((b.label, target, m))
        self.child_layout = child
        self.tombstones = [src for src, tgt, _ in self._local if tgt is None]
        for src, tgt, m in self._local:
            if tgt is not None and isometry_kind(m, 1e-12) is None:
                raise ValueError(f"action on {src} is not a partial isometry")

    @classmethod
    def from_spec(cls, mother_layout, spec: Sequence, name: str = "") -> "ReductionMap":
        """Build from a list of action names (or ``[name, target]`` pairs) in layout order."""
        actions = []
        for b, item in zip(mother_layout, spec):
            if isinstance(item, str):
                actions.append(Action(b.label, item))
            elif isinstance(item, dict):
                actions.append(Action(b.label, **{k: v for k, v in item.items() if k != "source"}))
            else:
                actions.append(Action(b.label, item[0], item[1] if len(item) > 1 else None))
        if len(actions) != len(mother_layout):
            raise ValueError("one action per mother block is required")
        return cls(list(mother_layout), actions, name)

    @property
    def kind(self) -> str:
        """``relative`` if the per-node map is square and invertible, else ``descendant``."""
        S = self.per_node().assemble(sparse=False)
        if S.shape[0] == S.shape[1] and np.linalg.matrix_rank(S) == S.shape[0]:
            return "relative"
        return "descendant"

    @property
    def label_map(self) -> dict:
        return {src: tgt for src, tgt, _ in self._local}

    def per_node(self) -> BlockOperator:
        S = BlockOperator([(b.label, b.dim) for b in self.child_layout], [(b.label, b.dim) for b in self.mother_layout])
        for src, tgt, m in self._local:
            if tgt is not None:
                S[tgt, src] = m
        return S

    def lifted(self, grid: Grid | int) -> BlockOperator:
        nodes = grid.nodes if isinstance(grid, Grid) else int(grid)
        S = BlockOperator(
            [(b.label, b.dim * nodes) for b in self.child_layout],
            [(b.label, b.dim * nodes) for b in self.mother_layout],
        )
        for src, tgt, m in self._local:
            if tgt is not None:
                S.blocks[(tgt, src)] = lift_pointwise(m, nodes)
        return S

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "actions": [
                {"source": a.source, "action": a.action, "target": self.label_map[a.source]} for a in self.actions
            ],
            "child_layout": [b.to_dict() for b in self.child_layout],
            "tombstones": self.tombstones,
        }


def _conj(M: BlockOperator, S: BlockOperator, skew: bool = False) -> BlockOperator:
    Sm = sp.csr_matrix(S.assemble(sparse=True))
    X = Sm @ sp.csr_matrix(M.assemble(sparse=True)) @ Sm.T
    X = sp.csr_matrix(X)
    X = 0.5 * (X - X.T) if skew else 0.5 * (X + X.T) if _is_sym(M) else X
    X = sp.csr_matrix(X)
    X.eliminate_zeros()
    dense = max(X.shape) <= 400 and not M.is_sparse
    out = BlockOperator.from_matrix(X.toarray() if dense else X, S.row_spaces, S.row_spaces)
    return out


def _is_sym(M: BlockOperator) -> bool:
    if not M.blocks:
        return True
    A = M.assemble(sparse=True)
    return float(abs(A - A.T).max() if sp.issparse(A) else np.abs(A - A.T).max()) == 0.0


def conjugate_law(law: MaterialLaw, S: ReductionMap, nodes: int | None = None) -> MaterialLaw:
    """Child law with coefficients ``S M_i S^T`` (per node, or lifted to ``nodes``)."""
    Sop = S.per_node() if nodes is None else S.lifted(nodes)
    M0 = _conj(law.M0, Sop)
    M1 = _conj(law.M1, Sop, skew=True)
    M2 = _conj(law.M2, Sop)
    return MaterialLaw(S.child_layout, M0, M1, M2, name=f"{law.name}->child")


@dataclass
class DescendantProblem:
    mother: EvoProblem
    S: ReductionMap
    child: EvoProblem
    S_grid: BlockOperator


def conjugate_problem(mother: EvoProblem, S: ReductionMap, forcing: Forcing | None = None) -> DescendantProblem:
    """Conjugate a grid-level problem by a reduction map.

    The child forcing defaults to ``S f`` of the mother forcing.
    """
    if mother.grid is None:
        raise ValueError("conjugate_problem needs a grid-level mother problem")
    if [b.label for b in mother.layout] != [b.label for b in S.mother_layout]:
        raise ValueError("reduction map does not match the mother layout")
    Sg = S.lifted(mother.grid)
    if [d for _, d in Sg.col_spaces] != [d for _, d in mother.A.row_spaces]:
        raise ValueError("reduction map dimensions do not match the mother problem")
    law = conjugate_law(mother.law, S, mother.grid.nodes)
    A = _conj(mother.A, Sg, skew=True)
    if forcing is None:
        Sm = sp.csr_matrix(Sg.assemble(sparse=True))

        def forcing(t, _f=mother.forcing):
            v = _f(t)
            return None if v is None else Sm @ v

    child = EvoProblem(
        law, A, S.child_layout, mother.grid, forcing, mother.T, mother.onset,
        f"{mother.name}->{S.name or 'child'}", mother.allow_indefinite_M2,
    )
    return DescendantProblem(mother, S, child, Sg)


def check_compatibility(A, B, tol: float = 0.0) -> bool:
    """Check ``(A B^T)^T == B A^T``, the finite-dimensional adjoint identity."""
    A = A.assemble() if isinstance(A, BlockOperator) else A
    B = B.assemble() if isinstance(B, BlockOperator) else B
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"shape mismatch: A is {A.shape}, B is {B.shape}")
    lhs = (A @ B.T).T
    rhs = B @ A.T
    diff = lhs - rhs
    dev = float(abs(diff).max()) if sp.issparse(diff) else float(np.abs(diff).max(initial=0.0))
    scale = max(_norm(A) * _norm(B), 1e-300)
    return dev <= tol * scale if tol > 0 else dev <= 1e-13 * scale


def _norm(m) -> float:
    if sp.issparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.abs(m).max(initial=0.0))


@dataclass
class DegenerateReduction:
    Q: np.ndarray  # orthonormal basis of the numerical range of N0 (columns)
    rank: int
    M0: np.ndarray
    M1: np.ndarray
    A: np.ndarray
    singular_values: np.ndarray
    skew_ok: bool
    verdict: str


def degenerate_reduce(N0, M1, A, rtol: float = 1e-10) -> DegenerateReduction:
    """Restrict a degenerate constitutive relation to the range of ``N0``.

    ``N0`` must be symmetric positive semidefinite. Eigenvalues below
    ``rtol * max`` count as zero; the retained ones must be clearly positive.
    Returns ``M0 = (Q^T N0 Q)^{-1}`` and the compressions ``Q^T M1 Q``,
    ``Q^T A Q``.
    """
    N0 = N0.assemble(sparse=False) if isinstance(N0, BlockOperator) else np.asarray(N0, dtype=float)
    M1 = M1.assemble(sparse=False) if isinstance(M1, BlockOperator) else np.asarray(M1, dtype=float)
    A = A.assemble(sparse=False) if isinstance(A, BlockOperator) else A
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if np.abs(N0 - N0.T).max(initial=0.0) > 1e-12 * max(np.abs(N0).max(initial=0.0), 1e-300):
        raise ValueError("N0 must be symmetric")
    w, V = np.linalg.eigh(N0)
    smax = np.abs(w).max(initial=0.0)
    if smax == 0.0:
        raise ValueError("N0 is zero")
    if w.min() < -rtol * smax:
        raise ValueError(f"N0 is not positive semidefinite (eigenvalue {w.min():.3e})")
    keep = w > rtol * smax
    kept = w[keep]
    verdict = "pos" if kept.min() > 1e3 * rtol * smax else "marginal"
    if verdict == "marginal":
        raise ValueError(f"N0 is nearly singular on its numerical range (eigenvalue {kept.min():.3e})")
    Q = V[:, keep]
    Nr = Q.T @ N0 @ Q
    M0 = np.linalg.inv(0.5 * (Nr + Nr.T))
    M0 = 0.5 * (M0 + M0.T)
    Mt1 = Q.T @ M1 @ Q
    At = Q.T @ A @ Q
    skew_ok = np.abs(At + At.T).max(initial=0.0) <= 1e-12 * max(np.abs(At).max(initial=0.0), 1e-300)
    return DegenerateReduction(Q, int(keep.sum()), M0, Mt1, At, np.sort(np.abs(w))[::-1], bool(skew_ok), verdict)


def invariance_defects(mother: EvoProblem, Sg: BlockOperator) -> dict:
    """Relative size of ``(1 - S^T S) M S^T`` for ``M`` in ``M0, M1, M2, A``.

    All four vanish exactly when the retained subspace ``ran(S^T)`` reduces
    every coefficient, which makes it invariant under the dynamics.
    """
    S = sp.csr_matrix(Sg.assemble(sparse=True))
    St = S.T.tocsr()
    out = {}
    for which in ("M0", "M1", "M2", "A"):
        M = mother.matrix(which)
        X = M @ St
        R = X - St @ (S @ X)
        scale = _norm(M)
        out[which] = 0.0 if scale == 0.0 else _norm(sp.csr_matrix(R)) / scale
    return out


def verify_descendant_dynamics(
    d: DescendantProblem,
    f_child: Forcing,
    dt: float,
    scheme: str = "midpoint",
    tol: float = 1e-12,
    force: bool = False,
) -> dict:
    """Run mother (forced by ``S^T f_child``) and child and compare ``S U_mother`` with ``U_child``.

    Raises :class:`PreconditionError` when the mother coefficients couple the
    retained subspace to its complement, unless ``force`` is set, in which
    case the comparison is still run and the defects are reported.
    """
    defects = invariance_defects(d.mother, d.S_grid)
    ok = all(v <= tol for v in defects.values())
    if not ok and not force:
        bad = {k: v for k, v in defects.items() if v > tol}
        raise PreconditionError(f"retained subspace is not invariant; coupling through {sorted(bad)}: {bad}")
    S = sp.csr_matrix(d.S_grid.assemble(sparse=True))
    St = S.T.tocsr()

    def f_mother(t):
        v = f_child(t)
        return None if v is None else St @ v

    mother = d.mother.with_forcing(f_mother)
    child = d.child.with_forcing(f_child)
    tm = run(mother, dt, scheme, keep="all")
    tc = run(child, dt, scheme, keep="all")
    Um = np.asarray(tm.states)
    Uc = np.asarray(tc.states)
    diff = np.max(np.linalg.norm((S @ Um.T).T - Uc, axis=1))
    scale = np.max(np.linalg.norm(Uc, axis=1))
    disc = float(diff / scale) if scale > 0 else float(diff)
    return {
        "identity_checks": {
            "compatibility": check_compatibility(d.mother.matrix("A"), S),
            "child_A_exactly_skew": _norm(d.child.matrix("A") + d.child.matrix("A").T) == 0.0,
        },
        "classification": {
            "child_M0": classify(d.child.law.M0).symmetry + "/" + classify(d.child.law.M0).definiteness,
            "child_validity": str(d.child.law.validity),
        },
        "invariance_defects": defects,
        "precondition_ok": ok,
        "dynamics_discrepancy": disc,
        "steps": tm.steps,
        "dt": dt,
        "scheme": scheme,
    }
