"""Pointwise algebra of covariant tensors of order <= 3 over R^3.

Tensors are plain numpy arrays of shape ``(3,) * q``; leading batch axes are
allowed everywhere. Order-2 tensors are flattened row-major, so entry
``t[i, j]`` sits at index ``3 * i + j`` of the 9-vector. For order-3 tensors
the first slot is the one added by the gradient, i.e.
``(grad psi)[x, y, z] = d_x psi[y, z]``, and ``1 (x) F`` acts on the last two
slots.

Subspace bases
--------------
The symmetric, skew, deviatoric (sym0) and volumetric subspaces of the
9-dimensional space of 2-tensors carry fixed orthonormal bases. The columns
of ``IOTA[tag]`` are the basis tensors, so ``IOTA[tag]`` is the canonical
embedding and its transpose the orthogonal coordinate map.

=========  ====  ==============================================================
tag        dim   basis (``E_ij`` is the unit matrix with a one at ``(i, j)``)
=========  ====  ==============================================================
``sym``    6     ``E_11, E_22, E_33, (E_23+E_32)/r2, (E_31+E_13)/r2,
                 (E_12+E_21)/r2``
``skew``   3     ``(E_23-E_32)/r2, (E_31-E_13)/r2, (E_12-E_21)/r2``
``sym0``   5     ``(E_11-E_22)/r2, (E_11+E_22-2 E_33)/r6`` and the three
                 off-diagonal ``sym`` vectors
``trace``  1     ``I/r3``
=========  ====  ==============================================================

With this skew basis ``IOTA['skew'].T == lambda_star_matrix() / sqrt(2)``, so
the axial-vector map ``(1/sqrt 2) Lambda^* iota_skew`` is the 3x3 identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SlotMap",
    "sym",
    "skew",
    "trace",
    "trace_star",
    "proj_P",
    "sym0",
    "lambda_star",
    "lambda_",
    "lift_last_two",
    "frobenius",
    "SYM",
    "SKEW",
    "SYM0",
    "PROJ_P",
    "IDENTITY9",
    "IOTA",
    "embedding",
    "subspace_dim",
    "lambda_matrix",
    "lambda_star_matrix",
    "axial_map",
]

_R2 = np.sqrt(2.0)
_R3 = np.sqrt(3.0)
_R6 = np.sqrt(6.0)


def _unit(i: int, j: int) -> np.ndarray:
    e = np.zeros((3, 3))
    e[i, j] = 1.0
    return e


def sym(t):
    """Symmetric part of a 2-tensor (batched over leading axes)."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (t + np.swapaxes(t, -1, -2))


def skew(t):
    """Antisymmetric part of a 2-tensor."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (t - np.swapaxes(t, -1, -2))


def trace(t):
    """Matrix trace; the metric is the identity in the Euclidean case."""
    return np.trace(np.asarray(t, dtype=float), axis1=-2, axis2=-1)


def trace_star(phi):
    """Adjoint of :func:`trace`: ``phi`` times the identity matrix."""
    phi = np.asarray(phi, dtype=float)
    return phi[..., None, None] * np.eye(3)


def proj_P(t):
    """Volumetric projector ``(1/3) trace^* trace``."""
    return trace_star(trace(t) / 3.0)


def sym0(t):
    """Symmetric traceless (deviatoric) part, ``(1 - P) sym``."""
    s = sym(t)
    return s - proj_P(s)


def lambda_star(t):
    """Map a 2-tensor to the vector ``(a23 - a32, a31 - a13, a12 - a21)``.

    On skew tensors this is twice the axial vector; symmetric tensors are
    annihilated.
    """
    t = np.asarray(t, dtype=float)
    return np.stack(
        [
            t[..., 1, 2] - t[..., 2, 1],
            t[..., 2, 0] - t[..., 0, 2],
            t[..., 0, 1] - t[..., 1, 0],
        ],
        axis=-1,
    )


def lambda_(v):
    """Adjoint of :func:`lambda_star`; ``lambda_(b)`` is minus the cross-product matrix of ``b``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    b1, b2, b3 = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = b3
    out[..., 0, 2] = -b2
    out[..., 1, 0] = -b3
    out[..., 1, 2] = b1
    out[..., 2, 0] = b2
    out[..., 2, 1] = -b1
    return out


def frobenius(a, b):
    """Frobenius inner product over the trailing tensor axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def _matrix_of(fn, n_in: int, shape_in) -> np.ndarray:
    """Matrix of a linear map by evaluating it on the standard basis."""
    cols = []
    for k in range(n_in):
        e = np.zeros(n_in)
        e[k] = 1.0
        cols.append(np.asarray(fn(e.reshape(shape_in)), dtype=float).reshape(-1))
    return np.column_stack(cols)


@dataclass(frozen=True)
class SlotMap:
    """A linear map on 2-tensors stored as a 9x9 matrix.

    ``is_projector`` marks maps that must be orthogonal projectors; the flag is
    checked on construction.
    """

    matrix: np.ndarray
    is_projector: bool = False
    name: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (9, 9):
            raise ValueError(f"SlotMap needs a 9x9 matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        if self.is_projector:
            if np.linalg.norm(m @ m - m) > 1e-12 or np.linalg.norm(m - m.T) > 1e-12:
                raise ValueError(f"{self.name or 'map'} is not an orthogonal projector")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.reshape(t.shape[:-2] + (9,))
        return (flat @ self.matrix.T).reshape(t.shape)

    def __matmul__(self, other: "SlotMap") -> "SlotMap":
        return SlotMap(self.matrix @ other.matrix)


IDENTITY9 = SlotMap(np.eye(9), True, "identity")
SYM = SlotMap(_matrix_of(sym, 9, (3, 3)), True, "sym")
SKEW = SlotMap(_matrix_of(skew, 9, (3, 3)), True, "skew")
SYM0 = SlotMap(_matrix_of(sym0, 9, (3, 3)), True, "sym0")
PROJ_P = SlotMap(_matrix_of(proj_P, 9, (3, 3)), True, "P")


def lambda_matrix() -> np.ndarray:
    """9x3 matrix of Lambda (vectors to 2-tensors)."""
    return _matrix_of(lambda_, 3, (3,))


def lambda_star_matrix() -> np.ndarray:
    """3x9 matrix of Lambda^*."""
    return _matrix_of(lambda_star, 9, (3, 3))


def _basis(tensors) -> np.ndarray:
    return np.column_stack([np.asarray(t).reshape(9) for t in tensors])


_OFFDIAG_SYM = [
    (_unit(1, 2) + _unit(2, 1)) / _R2,
    (_unit(2, 0) + _unit(0, 2)) / _R2,
    (_unit(0, 1) + _unit(1, 0)) / _R2,
]

IOTA = {
    "full": np.eye(9),
    "sym": _basis([_unit(0, 0), _unit(1, 1), _unit(2, 2)] + _OFFDIAG_SYM),
    "skew": _basis(
        [
            (_unit(1, 2) - _unit(2, 1)) / _R2,
            (_unit(2, 0) - _unit(0, 2)) / _R2,
            (_unit(0, 1) - _unit(1, 0)) / _R2,
        ]
    ),
    "sym0": _basis(
        [
            (_unit(0, 0) - _unit(1, 1)) / _R2,
            (_unit(0, 0) + _unit(1, 1) - 2.0 * _unit(2, 2)) / _R6,
        ]
        + _OFFDIAG_SYM
    ),
    "trace": _basis([np.eye(3) / _R3]),
    "zero": np.zeros((9, 0)),
}
for _arr in IOTA.values():
    _arr.setflags(write=False)

# subspace tags valid per tensor order; order-3 tags act on the last two slots
_TAGS = {
    0: ("full", "zero"),
    1: ("full", "zero"),
    2: ("full", "sym", "skew", "sym0", "trace", "zero"),
    3: ("full", "sym", "skew", "sym0", "trace", "zero"),
}


def subspace_dim(order: int, tag: str = "full") -> int:
    return embedding(order, tag).shape[1]


def embedding(order: int, tag: str = "full") -> np.ndarray:
    """Canonical embedding of a tagged subspace into the order-``order`` tensors.

    For order 3 the tag refers to the last two slots, giving ``1 (x) iota_tag``.
    The result has orthonormal columns.
    """
    if order not in _TAGS or tag not in _TAGS[order]:
        raise ValueError(f"no subspace {tag!r} for tensors of order {order}")
    if tag == "full":
        return np.eye(3**order)
    if tag == "zero":
        return np.zeros((3**order, 0))
    if order == 2:
        return IOTA[tag].copy()
    return np.kron(np.eye(3), IOTA[tag])


def axial_map() -> np.ndarray:
    """The unitary ``(1/sqrt 2) iota_skew^* Lambda`` from vectors to skew coordinates."""
    return IOTA["skew"].T @ lambda_matrix() / _R2


def lift_last_two(F, t):
    """Apply ``1 (x) F`` to order-3 tensors: ``F`` acts on slots two and three.

    ``F`` may be a :class:`SlotMap` or any matrix with 9 columns; in the second
    case the output has shape ``(..., 3, F.shape[0])``.
    """
    m = F.matrix if isinstance(F, SlotMap) else np.asarray(F, dtype=float)
    if m.shape[1] != 9:
        raise ValueError("F must act on 2-tensors (9 columns)")
    t = np.asarray(t, dtype=float)
    if t.shape[-3:] != (3, 3, 3):
        raise ValueError("lift_last_two expects order-3 tensors")
    flat = t.reshape(t.shape[:-3] + (3, 9))
    out = flat @ m.T
    if m.shape[0] == 9:
        return out.reshape(t.shape)
    return out
