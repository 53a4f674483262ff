"""Material laws ``M0 + d^{-1} M1 + d^{-2} M2`` and their admissibility.

A :class:`MaterialLaw` stores three per-node (or grid-level) block operators
over a labelled state layout. It is *valid* when ``M0`` is selfadjoint and
strictly positive definite, ``M1`` is skew and ``M2`` is selfadjoint. An
indefinite ``M2`` is accepted with a warning, since well-posedness then only
holds for a sufficiently large exponential weight.

The isotropic helpers build stiffness matrices in the 9-dimensional
coordinates of :mod:`microsolids.tensors`; the micromorphic and microstretch
helpers turn constitutive block matrices into compliance operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blocks import BlockOperator, SingularBlockError, classify, definiteness
from .tensors import IOTA, PROJ_P, SKEW, SYM0, subspace_dim

__all__ = [
    "Block",
    "MaterialLaw",
    "Validity",
    "validate",
    "isotropic_C",
    "isotropic_sym_C",
    "isotropic_G0",
    "micromorphic_N",
    "micromorphic_W",
    "micromorphic_isotropic_blocks",
    "micromorphic_inequalities",
    "check_micromorphic_isotropic",
    "hemitropic_blocks",
    "hemitropic_inequalities",
    "check_hemitropic_isotropic",
    "microstretch_constitutive",
    "microstretch_reduce",
    "verdict_from_quantities",
    "MARGINAL_BAND",
]

# inequality quantities within this band of zero give the "marginal" verdict
MARGINAL_BAND = 1e-8


@dataclass(frozen=True)
class Block:
    """One entry of a state layout: label, tensor order and subspace tag."""

    label: str
    order: int
    tag: str = "full"

    @property
    def dim(self) -> int:
        return subspace_dim(self.order, self.tag)

    def to_dict(self) -> dict:
        return {"label": self.label, "order": self.order, "tag": self.tag, "dim": self.dim}


@dataclass(frozen=True)
class Validity:
    valid: bool
    reasons: tuple = ()
    warnings: tuple = ()

    def __bool__(self):
        return self.valid

    def __str__(self):
        if self.valid:
            return "valid"
        return "invalid(" + "; ".join(self.reasons) + ")"


class MaterialLaw:
    """Triple ``(M0, M1, M2)`` over a labelled layout.

    Parameters
    ----------
    layout : sequence of Block
    M0, M1, M2 : BlockOperator
        Square operators over the layout spaces. ``M1`` and ``M2`` default to
        zero. The block dimensions may be per-node or grid-level multiples of
        the layout dimensions.
    name : str
    """

    def __init__(self, layout: Sequence[Block], M0: BlockOperator, M1=None, M2=None, name: str = ""):
        self.layout = list(layout)
        self.name = name
        self.M0 = M0
        spaces = M0.row_spaces
        if [l for l, _ in spaces] != [b.label for b in self.layout]:
            raise ValueError("M0 labels do not match the layout")
        multiples = {d // b.dim if b.dim and d % b.dim == 0 else -1 for (_, d), b in zip(spaces, self.layout)}
        if len(multiples) != 1 or -1 in multiples:
            raise ValueError("block dimensions are not one common multiple of the layout dimensions")
        self.M1 = M1 if M1 is not None else BlockOperator(spaces)
        self.M2 = M2 if M2 is not None else BlockOperator(spaces)
        for M in (self.M1, self.M2):
            if M.row_spaces != spaces or M.col_spaces != spaces:
                raise ValueError("M0, M1, M2 must share one block structure")
        self._validity = None

    @property
    def spaces(self):
        return self.M0.row_spaces

    @property
    def validity(self) -> Validity:
        if self._validity is None:
            self._validity = validate(self)
        return self._validity

    def blockwise_deviation(self, other: "MaterialLaw") -> float:
        """Largest entry difference over ``M0, M1, M2`` (requires equal layouts)."""
        return max(
            _block_deviation(a, b) for a, b in ((self.M0, other.M0), (self.M1, other.M1), (self.M2, other.M2))
        )

    def __repr__(self):
        return f"MaterialLaw({self.name or 'unnamed'}, blocks={[b.label for b in self.layout]})"


def _block_deviation(a: BlockOperator, b: BlockOperator) -> float:
    if a.row_spaces != b.row_spaces or a.col_spaces != b.col_spaces:
        raise ValueError(f"block structures differ: {a.row_spaces} vs {b.row_spaces}")
    return float(np.max(np.abs(_dense(a.assemble() - b.assemble())), initial=0.0))


def _dense(m):
    return m.toarray() if hasattr(m, "toarray") else np.asarray(m)


def validate(law: MaterialLaw, tol: float = 1e-12) -> Validity:
    """Check the admissibility conditions on ``(M0, M1, M2)``."""
    reasons, warnings = [], []
    c0 = classify(law.M0, tol)
    if c0.symmetry != "selfadjoint":
        reasons.append("M0 not selfadjoint")
    elif c0.definiteness == "indef":
        reasons.append("M0 not positive definite")
    elif c0.definiteness == "marginal":
        reasons.append("M0 marginally positive definite")
    if law.M1.norm_max() > 0.0 and classify(law.M1, tol).symmetry != "skew":
        reasons.append("M1 not skew")
    if law.M2.norm_max() > 0.0:
        c2 = classify(law.M2, tol)
        if c2.symmetry != "selfadjoint":
            reasons.append("M2 not selfadjoint")
        else:
            verdict, _ = definiteness(law.M2)
            if verdict == "indef":
                warnings.append("M2 indefinite: well-posedness needs a sufficiently large weight rho")
    return Validity(not reasons, tuple(reasons), tuple(warnings))


# ---------------------------------------------------------------------------
# isotropic stiffness operators


def isotropic_C(alpha: float, mu: float, lam: float) -> np.ndarray:
    """``2 mu sym0 + 2 alpha skew + (3 lam + 2 mu) P`` as a 9x9 matrix."""
    return 2.0 * mu * SYM0.matrix + 2.0 * alpha * SKEW.matrix + (3.0 * lam + 2.0 * mu) * PROJ_P.matrix


def isotropic_sym_C(mu: float, lam: float) -> np.ndarray:
    """Restriction of the isotropic stiffness to symmetric tensors (6x6)."""
    i = IOTA["sym"]
    return i.T @ (2.0 * mu * SYM0.matrix + (3.0 * lam + 2.0 * mu) * PROJ_P.matrix) @ i


def isotropic_G0(omega: float, beta: float) -> np.ndarray:
    """Coupling ``iota_sym^* (2 omega sym0 + (3 beta + 2 omega) P)`` (6x9)."""
    return IOTA["sym"].T @ (2.0 * omega * SYM0.matrix + (3.0 * beta + 2.0 * omega) * PROJ_P.matrix)


def verdict_from_quantities(quantities: Mapping[str, float], band: float = MARGINAL_BAND) -> str:
    """``pos`` if every quantity exceeds ``band``, ``indef`` if any is below ``-band``."""
    values = np.array(list(quantities.values()), dtype=float)
    if np.any(~np.isfinite(values)):
        raise ValueError("non-finite parameter combination")
    if np.any(values < -band):
        return "indef"
    if np.any(values <= band):
        return "marginal"
    return "pos"


# ---------------------------------------------------------------------------
# micromorphic media


def micromorphic_N(C0, G0, F0, C1, D0, C2) -> np.ndarray:
    """Assemble the 42x42 compliance-inverse matrix of the reformulated variables.

    The block rows correspond to the stress combination (9), the double stress
    (27) and the symmetric part of the relative stress (6). Shapes:
    ``C0`` 6x6, ``G0`` 6x9, ``F0`` 6x27, ``C1`` 9x9, ``D0`` 9x27, ``C2`` 27x27.
    """
    i = IOTA["sym"]
    C0, G0, F0, C1, D0, C2 = (np.asarray(m, dtype=float) for m in (C0, G0, F0, C1, D0, C2))
    for m, shape, name in (
        (C0, (6, 6), "C0"),
        (G0, (6, 9), "G0"),
        (F0, (6, 27), "F0"),
        (C1, (9, 9), "C1"),
        (D0, (9, 27), "D0"),
        (C2, (27, 27), "C2"),
    ):
        if m.shape != shape:
            raise ValueError(f"{name} has shape {m.shape}, expected {shape}")
    return np.block(
        [
            [i @ C0 @ i.T + G0.T @ i.T + i @ G0 + C1, i @ F0 + D0, i @ G0 @ i + C1 @ i],
            [F0.T @ i.T + D0.T, C2, D0.T @ i],
            [i.T @ G0.T @ i.T + i.T @ C1, i.T @ D0, i.T @ C1 @ i],
        ]
    )


def micromorphic_W(C0, G0, F0, C1, D0, C2) -> np.ndarray:
    """Inverse ``W`` of :func:`micromorphic_N`; raises if that matrix is singular."""
    N = micromorphic_N(C0, G0, F0, C1, D0, C2)
    cond = np.linalg.cond(N)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularBlockError(f"micromorphic constitutive matrix is singular (cond {cond:.3g})")
    W = np.linalg.inv(N)
    if np.allclose(N, N.T, rtol=0, atol=1e-14 * np.abs(N).max()):
        W = 0.5 * (W + W.T)
    return W


def _c2_matrix(c2) -> np.ndarray:
    c2 = np.asarray(c2, dtype=float)
    if c2.ndim == 0:
        return float(c2) * np.eye(27)
    return c2


def micromorphic_isotropic_blocks(p: Mapping) -> dict:
    """Constitutive blocks ``C0, G0, F0, C1, D0, C2`` from isotropic parameters."""
    return {
        "C0": isotropic_sym_C(p["mu0"], p["lam0"]),
        "G0": isotropic_G0(p["omega0"], p["beta0"]),
        "F0": np.zeros((6, 27)),
        "C1": isotropic_C(p["alpha1"], p["mu1"], p["lam1"]),
        "D0": np.zeros((9, 27)),
        "C2": _c2_matrix(p.get("C2", p.get("c2", 1.0))),
    }


def micromorphic_inequalities(p: Mapping) -> dict:
    """Named quantities that must all be positive in the isotropic case."""
    c2 = _c2_matrix(p.get("C2", p.get("c2", 1.0)))
    return {
        "mu1 > 0": p["mu1"],
        "lam1 + 2/3 mu1 > 0": p["lam1"] + 2.0 * p["mu1"] / 3.0,
        "alpha1 > 0": p["alpha1"],
        "mu1 mu0 - omega0^2 > 0": p["mu1"] * p["mu0"] - p["omega0"] ** 2,
        "(3 lam1 + 2 mu1)(3 lam0 + 2 mu0) - (3 beta0 + 2 omega0)^2 > 0": (3 * p["lam1"] + 2 * p["mu1"])
        * (3 * p["lam0"] + 2 * p["mu0"])
        - (3 * p["beta0"] + 2 * p["omega0"]) ** 2,
        "C2 positive definite": float(np.linalg.eigvalsh(0.5 * (c2 + c2.T))[0]),
    }


def check_micromorphic_isotropic(p: Mapping, band: float = MARGINAL_BAND) -> str:
    """Three-valued positivity verdict from the isotropic micromorphic inequalities."""
    return verdict_from_quantities(micromorphic_inequalities(p), band)


# ---------------------------------------------------------------------------
# hemitropic media


def hemitropic_blocks(p: Mapping) -> dict:
    """Stiffness blocks ``C0, E, C2`` (each 9x9) of the isotropic hemitropic law."""
    return {
        "C0": isotropic_C(p["alpha0"], p["mu0"], p["lam0"]),
        "E": isotropic_C(p["nu0"], p["kappa0"], p["delta0"]),
        "C2": isotropic_C(p["alpha2"], p["mu2"], p["lam2"]),
    }


def hemitropic_inequalities(p: Mapping) -> dict:
    l0 = p["lam0"] + 2.0 * p["mu0"] / 3.0
    l2 = p["lam2"] + 2.0 * p["mu2"] / 3.0
    d0 = p["delta0"] + 2.0 * p["kappa0"] / 3.0
    return {
        "mu0 > 0": p["mu0"],
        "alpha0 > 0": p["alpha0"],
        "lam0 + 2/3 mu0 > 0": l0,
        "mu0 mu2 - kappa0^2 > 0": p["mu0"] * p["mu2"] - p["kappa0"] ** 2,
        "alpha0 alpha2 - nu0^2 > 0": p["alpha0"] * p["alpha2"] - p["nu0"] ** 2,
        "(lam2 + 2/3 mu2)(lam0 + 2/3 mu0) - (delta0 + 2/3 kappa0)^2 > 0": l2 * l0 - d0 * d0,
    }


def check_hemitropic_isotropic(p: Mapping, band: float = MARGINAL_BAND) -> str:
    """Three-valued verdict from the six hemitropic inequalities."""
    return verdict_from_quantities(hemitropic_inequalities(p), band)


# ---------------------------------------------------------------------------
# microstretch media

# block shapes with vector micro-rotation, scalar stretch and vector stretch gradient
MICROSTRETCH_SHAPES = {
    "C0": (9, 9),
    "B": (9, 9),
    "D": (9, 1),
    "F": (9, 3),
    "C1": (9, 9),
    "E": (9, 1),
    "G": (9, 3),
    "C2": (1, 1),
    "K": (1, 3),
    "C3": (3, 3),
}


def _shaped(name, m):
    m = np.asarray(m, dtype=float)
    shape = MICROSTRETCH_SHAPES[name]
    if m.ndim == 0 and shape == (1, 1):
        m = m.reshape(1, 1)
    if m.shape != shape:
        raise ValueError(f"{name} has shape {m.shape}, expected {shape}")
    return m


def microstretch_constitutive(C0, B, D, F, C1, E, G, C2, K, C3) -> np.ndarray:
    """Full 22x22 constitutive matrix mapping ``(e, kappa, phi, zeta)`` to ``(tau, mu, sigma, pi)``."""
    C0, B, D, F, C1, E, G, C2, K, C3 = (
        _shaped(n, m) for n, m in zip(MICROSTRETCH_SHAPES, (C0, B, D, F, C1, E, G, C2, K, C3))
    )
    return np.block(
        [
            [C0, B, D, F],
            [B.T, C1, E, G],
            [D.T, E.T, C2, K],
            [F.T, G.T, K.T, C3],
        ]
    )


def microstretch_reduce(C0, B, D, F, C1, E, G, C2, K, C3):
    """Eliminate the stretch from the microstretch constitutive relation.

    Returns
    -------
    W : ndarray (21, 21)
        Inverse of ``[[C0, B, F], [B^*, C1, G], [F^*, G^*, C3]]``.
    M2_block : ndarray (1, 1)
        ``C2 - (D^* E^* K) W (D; E; K^*)``.
    M1_coupling : ndarray (21, 1)
        ``W (D; E; K^*)``.
    """
    C0, B, D, F, C1, E, G, C2, K, C3 = (
        _shaped(n, m) for n, m in zip(MICROSTRETCH_SHAPES, (C0, B, D, F, C1, E, G, C2, K, C3))
    )
    Nm = np.block([[C0, B, F], [B.T, C1, G], [F.T, G.T, C3]])
    cond = np.linalg.cond(Nm)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularBlockError(f"microstretch constitutive block is singular (cond {cond:.3g})")
    W = np.linalg.inv(Nm)
    if np.allclose(Nm, Nm.T, rtol=0, atol=1e-14 * np.abs(Nm).max()):
        W = 0.5 * (W + W.T)
    col = np.vstack([D, E, K.T])
    coupling = W @ col
    M2_block = C2 - col.T @ coupling
    return W, M2_block, coupling
