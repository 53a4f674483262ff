"""Catalog of micro-structured elastic models and the reduction edges between them.

Every model is given by a state layout, the pairs of blocks coupled by the
spatial operator, and a per-node material law built from parameters. The
same law is lifted to a grid by :func:`build`.

Models
------
``micromorphic``
    Velocity, micro-deformation rate, combined stress ``iota_sym tau + sigma``,
    double stress and the symmetric relative stress. ``M0 = diag(rho0, rho2, W)``
    with ``W`` the inverse of the 42x42 constitutive matrix.
``cosserat``
    Velocity, spin, force stress and couple stress, ``M0 = diag(rho0, rho1,
    C0^{-1}, C1^{-1})``; the spin couples to the stress through ``Lambda``.
``cosserat_relative``
    The same medium with spin stored as a skew tensor and the couple stress as
    a ``1 (x) skew`` tensor. ``coupling`` is ``sqrt 2`` for the unitary change of
    variables and ``1`` for the rescaled form inherited from micromorphic media.
``hemitropic``
    Cosserat layout with a coupled stiffness ``[[C0, E^*], [E, C2]]`` and
    coupling weights ``eta0``, ``eta1``.
``classical``
    Velocity and symmetric stress.
``sym_stress``, ``sym0_variant``, ``sym0_sym_stress``
    Restrictions of micromorphic media to skew or deviatoric micro-deformation,
    with a full or symmetric stress.
``microstretch``
    Velocity, spin and stretch rate with force stress, couple stress and
    stretch flux; the stretch enters ``M1`` and ``M2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla

from .blocks import BlockOperator, block_inverse_2x2
from .evolution import EvoProblem, zero_forcing
from .grid import Grid, assemble_A, lift_block_operator
from .materials import (
    Block,
    MaterialLaw,
    Validity,
    hemitropic_blocks,
    hemitropic_inequalities,
    isotropic_C,
    isotropic_sym_C,
    micromorphic_inequalities,
    micromorphic_isotropic_blocks,
    micromorphic_W,
    microstretch_reduce,
)
from .reduction import Action, ReductionMap
from .tensors import IOTA, SKEW, lambda_matrix, lambda_star_matrix

__all__ = [
    "MODELS",
    "EDGES",
    "ModelDef",
    "InvalidParameters",
    "UnknownEdge",
    "build",
    "build_law",
    "resolve_params",
    "parameter_violations",
    "reduction_edge",
    "child_params",
    "zoo_list",
    "DEFAULT_GRID",
]

DEFAULT_GRID = Grid(8, 1.0 / 9.0)
SQRT2 = math.sqrt(2.0)


class InvalidParameters(ValueError):
    """Parameters violate the model's positivity conditions."""

    def __init__(self, model: str, violations):
        self.model = model
        self.violations = list(violations)
        super().__init__(f"{model}: " + "; ".join(self.violations))


class UnknownEdge(KeyError):
    pass


def _mat(x, d: int, name: str = "") -> np.ndarray:
    """Scalar to ``x * I_d``; array-likes are checked for shape ``(d, d)``."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(d)
    if a.shape != (d, d):
        raise ValueError(f"{name or 'matrix'} must be scalar or {d}x{d}, got shape {a.shape}")
    return a


def _arr(x, shape, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 and shape == (1, 1):
        a = a.reshape(1, 1)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


def _law(layout, M0_blocks: dict, M1_blocks: dict | None = None, M2_blocks: dict | None = None, name=""):
    spaces = [(b.label, b.dim) for b in layout]
    return MaterialLaw(
        layout,
        BlockOperator(spaces, blocks=M0_blocks),
        BlockOperator(spaces, blocks=M1_blocks or {}),
        BlockOperator(spaces, blocks=M2_blocks or {}),
        name=name,
    )


def _ineq(value: float, message: str) -> tuple:
    return (float(value), message)


# ---------------------------------------------------------------------------
# model definitions


@dataclass
class ModelDef:
    name: str
    description: str
    layout: list
    pairs: list
    defaults: dict
    law_fn: Callable
    inequalities: Callable | None = None  # params -> {name: (value, message)}
    param_doc: dict = field(default_factory=dict)


def _iso_message(prefix: str, kind: str) -> str:
    return {
        "mu": f"{prefix}: mu must be positive",
        "alpha": f"{prefix}: alpha must be positive",
        "lam": f"{prefix}: lambda + 2/3 mu must be positive",
    }[kind]


# -- cosserat -----------------------------------------------------------------

COSSERAT_LAYOUT = [Block("v", 1), Block("w", 1), Block("sigma", 2), Block("tau", 2)]


def _cosserat_C(p, k):
    key = f"C{k}"
    if p.get(key) is not None:
        return _mat(p[key], 9, key)
    return isotropic_C(p[f"alpha{k}"], p[f"mu{k}"], p[f"lam{k}"])


def _cosserat_law(p):
    L, Ls = lambda_matrix(), lambda_star_matrix()
    M0 = {
        ("v", "v"): _mat(p["rho0"], 3, "rho0"),
        ("w", "w"): _mat(p["rho1"], 3, "rho1"),
        ("sigma", "sigma"): np.linalg.inv(_cosserat_C(p, 0)),
        ("tau", "tau"): np.linalg.inv(_cosserat_C(p, 1)),
    }
    M1 = {("w", "sigma"): -Ls, ("sigma", "w"): L}
    return _law(COSSERAT_LAYOUT, M0, M1, name="cosserat")


def _cosserat_ineq(p):
    out = {}
    for k in (0, 1):
        if p.get(f"C{k}") is not None:
            continue
        mu, al, lam = p[f"mu{k}"], p[f"alpha{k}"], p[f"lam{k}"]
        out[f"mu{k} > 0"] = _ineq(mu, _iso_message(f"mu{k}", "mu"))
        out[f"alpha{k} > 0"] = _ineq(al, _iso_message(f"alpha{k}", "alpha"))
        out[f"lam{k} + 2/3 mu{k} > 0"] = _ineq(lam + 2 * mu / 3, _iso_message(f"lam{k}", "lam"))
    out["rho0 positive definite"] = _ineq(_min_eig(_mat(p["rho0"], 3)), "rho0: density must be positive definite")
    out["rho1 positive definite"] = _ineq(_min_eig(_mat(p["rho1"], 3)), "rho1: density must be positive definite")
    return out


def _min_eig(m) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


# -- cosserat relative -------------------------------------------------------

RELATIVE_LAYOUT = [Block("v", 1), Block("omega", 2, "skew"), Block("sigma", 2), Block("mu", 3, "skew")]


def _relative_law(p):
    c = float(p["coupling"])
    isk = IOTA["skew"]
    if p.get("compliance") is not None:
        comp = _mat(p["compliance"], 18, "compliance")
        M0s = {
            ("sigma", "sigma"): comp[:9, :9],
            ("sigma", "mu"): comp[:9, 9:],
            ("mu", "sigma"): comp[9:, :9],
            ("mu", "mu"): comp[9:, 9:],
        }
    else:
        C0 = _mat(p["C0"], 9, "C0") if p.get("C0") is not None else isotropic_C(p["alpha0"], p["mu0"], p["lam0"])
        M0s = {("sigma", "sigma"): np.linalg.inv(C0), ("mu", "mu"): np.linalg.inv(_mat(p["C2"], 9, "C2"))}
    M0 = {("v", "v"): _mat(p["rho0"], 3, "rho0"), ("omega", "omega"): _mat(p["rho2"], 3, "rho2"), **M0s}
    M1 = {("omega", "sigma"): -c * isk.T, ("sigma", "omega"): c * isk}
    return _law(RELATIVE_LAYOUT, M0, M1, name="cosserat_relative")


def _relative_ineq(p):
    out = {
        "rho0 positive definite": _ineq(_min_eig(_mat(p["rho0"], 3)), "rho0: density must be positive definite"),
        "rho2 positive definite": _ineq(_min_eig(_mat(p["rho2"], 3)), "rho2: density must be positive definite"),
    }
    if p.get("compliance") is None and p.get("C0") is None:
        mu, al, lam = p["mu0"], p["alpha0"], p["lam0"]
        out["mu0 > 0"] = _ineq(mu, _iso_message("mu0", "mu"))
        out["alpha0 > 0"] = _ineq(al, _iso_message("alpha0", "alpha"))
        out["lam0 + 2/3 mu0 > 0"] = _ineq(lam + 2 * mu / 3, _iso_message("lam0", "lam"))
    return out


# -- hemitropic -------------------------------------------------------------


def _hemitropic_compliance(p) -> np.ndarray:
    if p.get("compliance") is not None:
        return _mat(p["compliance"], 18, "compliance")
    blk = hemitropic_blocks(p)
    stiff = BlockOperator(
        [("sigma", 9), ("tau", 9)],
        blocks={
            ("sigma", "sigma"): blk["C0"],
            ("sigma", "tau"): blk["E"].T,
            ("tau", "sigma"): blk["E"],
            ("tau", "tau"): blk["C2"],
        },
    )
    return block_inverse_2x2(stiff).assemble(sparse=False)


def _hemitropic_law(p):
    L, Ls = lambda_matrix(), lambda_star_matrix()
    e0, e1 = float(p["eta0"]), float(p["eta1"])
    comp = _hemitropic_compliance(p)
    M0 = {
        ("v", "v"): _mat(p["rho0"], 3, "rho0"),
        ("w", "w"): _mat(p["rho1"], 3, "rho1"),
        ("sigma", "sigma"): comp[:9, :9],
        ("sigma", "tau"): comp[:9, 9:],
        ("tau", "sigma"): comp[9:, :9],
        ("tau", "tau"): comp[9:, 9:],
    }
    M1 = {}
    if e1 != 0.0:
        M1[("v", "tau")] = -e1 * Ls
        M1[("tau", "v")] = e1 * L
    if e0 != 0.0:
        M1[("w", "sigma")] = -e0 * Ls
        M1[("sigma", "w")] = e0 * L
    return _law(COSSERAT_LAYOUT, M0, M1, name="hemitropic")


def _hemitropic_ineq(p):
    out = {
        "rho0 positive definite": _ineq(_min_eig(_mat(p["rho0"], 3)), "rho0: density must be positive definite"),
        "rho1 positive definite": _ineq(_min_eig(_mat(p["rho1"], 3)), "rho1: density must be positive definite"),
    }
    if p.get("compliance") is None:
        for k, v in hemitropic_inequalities(p).items():
            out[k] = _ineq(v, f"hemitropic stiffness: {k} violated")
    return out


# -- classical ---------------------------------------------------------------

CLASSICAL_LAYOUT = [Block("v", 1), Block("T", 2, "sym")]


def _classical_law(p):
    if p.get("compliance") is not None:
        comp = _mat(p["compliance"], 6, "compliance")
    else:
        comp = np.linalg.inv(isotropic_sym_C(p["mu"], p["lam"]))
    return _law(CLASSICAL_LAYOUT, {("v", "v"): _mat(p["rho0"], 3, "rho0"), ("T", "T"): comp}, name="classical")


def _classical_ineq(p):
    out = {"rho0 positive definite": _ineq(_min_eig(_mat(p["rho0"], 3)), "rho0: density must be positive definite")}
    if p.get("compliance") is None:
        out["mu > 0"] = _ineq(p["mu"], "mu: mu must be positive")
        out["lam + 2/3 mu > 0"] = _ineq(p["lam"] + 2 * p["mu"] / 3, "lam: lambda + 2/3 mu must be positive")
    return out


# -- micromorphic -------------------------------------------------------------

MICROMORPHIC_LAYOUT = [
    Block("udot", 1),
    Block("psidot", 2),
    Block("Sigma", 2),
    Block("mu", 3),
    Block("s", 2, "sym"),
]


def micromorphic_blocks(p) -> dict:
    blocks = micromorphic_isotropic_blocks({k: v for k, v in p.items() if v is not None})
    shapes = {"C0": (6, 6), "G0": (6, 9), "F0": (6, 27), "C1": (9, 9), "D0": (9, 27), "C2": (27, 27)}
    for k, shape in shapes.items():
        if p.get(k) is not None:
            blocks[k] = _arr(p[k], shape, k) if k != "C2" else _mat(p[k], 27, k)
    return blocks


def _micromorphic_W(p) -> np.ndarray:
    b = micromorphic_blocks(p)
    return micromorphic_W(b["C0"], b["G0"], b["F0"], b["C1"], b["D0"], b["C2"])


def _micromorphic_law(p):
    W = _micromorphic_W(p)
    isym = IOTA["sym"]
    labels = ["Sigma", "mu", "s"]
    cuts = {"Sigma": slice(0, 9), "mu": slice(9, 36), "s": slice(36, 42)}
    M0 = {("udot", "udot"): _mat(p["rho0"], 3, "rho0"), ("psidot", "psidot"): _mat(p["rho2"], 9, "rho2")}
    for r in labels:
        for c in labels:
            blk = W[cuts[r], cuts[c]]
            if np.any(blk):
                M0[(r, c)] = blk
    M1 = {
        ("psidot", "Sigma"): -SKEW.matrix,
        ("Sigma", "psidot"): SKEW.matrix,
        ("psidot", "s"): -isym,
        ("s", "psidot"): isym.T,
    }
    return _law(MICROMORPHIC_LAYOUT, M0, M1, name="micromorphic")


def _micromorphic_ineq(p):
    out = {
        "rho0 positive definite": _ineq(_min_eig(_mat(p["rho0"], 3)), "rho0: density must be positive definite"),
        "rho2 positive definite": _ineq(_min_eig(_mat(p["rho2"], 9)), "rho2: density must be positive definite"),
    }
    if all(p.get(k) is None for k in ("C0", "G0", "F0", "C1", "D0")):
        q = dict(p)
        q["C2"] = micromorphic_blocks(p)["C2"]
        for k, v in micromorphic_inequalities(q).items():
            out[k] = _ineq(v, f"micromorphic stiffness: {k} violated")
    return out


# -- restrictions of micromorphic media -------------------------------------

SYM_STRESS_LAYOUT = [Block("v", 1), Block("omega", 2, "skew"), Block("T", 2, "sym"), Block("mu", 3, "skew")]
SYM0_VARIANT_LAYOUT = [Block("v", 1), Block("psi", 2, "sym0"), Block("sigma", 2), Block("mu", 3, "sym0")]
SYM0_SYM_STRESS_LAYOUT = [Block("v", 1), Block("psi", 2, "sym0"), Block("T", 2, "sym"), Block("mu", 3, "sym0")]


def _restricted_law(layout, name):
    micro_label, stress, mu = layout[1].label, layout[2], layout[3]

    def law(p):
        d_psi, d_s, d_mu = layout[1].dim, stress.dim, mu.dim
        if p.get("compliance") is None:
            raise ValueError(f"{name}: compliance is required")
        comp = _mat(p["compliance"], d_s + d_mu, "compliance")
        M0 = {
            ("v", "v"): _mat(p["rho0"], 3, "rho0"),
            (micro_label, micro_label): _mat(p["rho_psi"], d_psi, "rho_psi"),
            (stress.label, stress.label): comp[:d_s, :d_s],
            (stress.label, mu.label): comp[:d_s, d_s:],
            (mu.label, stress.label): comp[d_s:, :d_s],
            (mu.label, mu.label): comp[d_s:, d_s:],
        }
        return _law(layout, M0, name=name)

    return law


def _density_ineq(p, keys):
    return {
        f"{k} positive definite": _ineq(_min_eig(_mat(p[k], d)), f"{k}: density must be positive definite")
        for k, d in keys
    }


# -- microstretch -------------------------------------------------------------

MICROSTRETCH_LAYOUT = [
    Block("udot", 1),
    Block("psidot", 1),
    Block("phidot", 0),
    Block("tau", 2),
    Block("mu", 2),
    Block("pi", 1),
]

_MS_SHAPES = {
    "C0": (9, 9), "B": (9, 9), "D": (9, 1), "F": (9, 3), "C1": (9, 9),
    "E": (9, 1), "G": (9, 3), "K": (1, 3), "C3": (3, 3),
}


def microstretch_blocks(p) -> dict:
    """Constitutive blocks with ``C2`` resolved (``"balanced"`` gives ``M2 = 0``)."""
    b = {k: _arr(p[k], s, k) for k, s in _MS_SHAPES.items()}
    if isinstance(p["C2"], str):
        if p["C2"] != "balanced":
            raise ValueError("C2 must be a number, a 1x1 matrix or 'balanced'")
        W, _, coupling = microstretch_reduce(**b, C2=np.zeros((1, 1)))
        col = np.vstack([b["D"], b["E"], b["K"].T])
        b["C2"] = col.T @ coupling
    else:
        b["C2"] = _arr(p["C2"], (1, 1), "C2")
    return b


def _microstretch_law(p):
    b = microstretch_blocks(p)
    W, M2b, coupling = microstretch_reduce(**b)
    if isinstance(p["C2"], str):
        M2b = np.zeros((1, 1))  # balanced stretch stiffness: no M2 term by construction
    col = np.vstack([b["D"], b["E"], b["K"].T])
    row = col.T @ W
    L, Ls = lambda_matrix(), lambda_star_matrix()
    stress = ["tau", "mu", "pi"]
    cuts = {"tau": slice(0, 9), "mu": slice(9, 18), "pi": slice(18, 21)}
    M0 = {
        ("udot", "udot"): _mat(p["rho0"], 3, "rho0"),
        ("psidot", "psidot"): _mat(p["rho1"], 3, "rho1"),
        ("phidot", "phidot"): _mat(p["rho2"], 1, "rho2"),
    }
    for r in stress:
        for c in stress:
            blk = W[cuts[r], cuts[c]]
            if np.any(blk):
                M0[(r, c)] = blk
    M1 = {("psidot", "tau"): -Ls, ("tau", "psidot"): L}
    for s in stress:
        if np.any(row[:, cuts[s]]):
            M1[("phidot", s)] = row[:, cuts[s]]
            M1[(s, "phidot")] = -coupling[cuts[s], :]
    M2 = {("phidot", "phidot"): M2b} if np.any(M2b) else {}
    return _law(MICROSTRETCH_LAYOUT, M0, M1, M2, name="microstretch")


def _microstretch_ineq(p):
    return _density_ineq(p, [("rho0", 3), ("rho1", 3), ("rho2", 1)])


def _vec_identity() -> list:
    return (np.eye(3).reshape(9, 1)).tolist()


MODELS: dict = {}


def _register(m: ModelDef):
    MODELS[m.name] = m


_register(
    ModelDef(
        "cosserat",
        "micropolar medium: velocity, spin, force stress, couple stress",
        COSSERAT_LAYOUT,
        [("sigma", "v"), ("tau", "w")],
        {"rho0": 1.0, "rho1": 1.0, "alpha0": 1.0, "mu0": 1.0, "lam0": 1.0,
         "alpha1": 1.0, "mu1": 1.0, "lam1": 1.0, "C0": None, "C1": None},
        _cosserat_law,
        _cosserat_ineq,
        {"C0": "optional 9x9 stiffness overriding alpha0, mu0, lam0", "C1": "optional 9x9 couple stiffness"},
    )
)
_register(
    ModelDef(
        "cosserat_relative",
        "micropolar medium with spin as a skew tensor and couple stress in 1 (x) skew",
        RELATIVE_LAYOUT,
        [("sigma", "v"), ("mu", "omega")],
        {"rho0": 1.0, "rho2": 1.0, "alpha0": 1.0, "mu0": 1.0, "lam0": 1.0, "C0": None,
         "C2": 2.0, "compliance": None, "coupling": SQRT2},
        _relative_law,
        _relative_ineq,
        {"coupling": "sqrt(2) for the unitary relative, 1 for the rescaled form",
         "compliance": "optional 18x18 compliance on (sigma, mu) overriding C0 and C2"},
    )
)
_register(
    ModelDef(
        "hemitropic",
        "micropolar medium with chiral stiffness coupling [[C0, E^*], [E, C2]]",
        COSSERAT_LAYOUT,
        [("sigma", "v"), ("tau", "w")],
        {"rho0": 1.0, "rho1": 1.0, "mu0": 1.0, "alpha0": 1.0, "lam0": 1.0, "mu2": 1.0, "alpha2": 1.0,
         "lam2": 1.0, "kappa0": 0.3, "nu0": 0.2, "delta0": 0.1, "eta0": 1.0, "eta1": 0.0, "compliance": None},
        _hemitropic_law,
        _hemitropic_ineq,
        {"compliance": "optional 18x18 compliance on (sigma, tau) overriding the stiffness parameters"},
    )
)
_register(
    ModelDef(
        "classical",
        "classical elasticity: velocity and symmetric stress",
        CLASSICAL_LAYOUT,
        [("T", "v")],
        {"rho0": 1.0, "mu": 1.0, "lam": 1.0, "compliance": None},
        _classical_law,
        _classical_ineq,
        {"compliance": "optional 6x6 compliance on symmetric stress coordinates"},
    )
)
_register(
    ModelDef(
        "micromorphic",
        "micromorphic medium in the well-posed reformulated variables",
        MICROMORPHIC_LAYOUT,
        [("Sigma", "udot"), ("mu", "psidot")],
        {"rho0": 1.0, "rho2": 1.0, "mu0": 2.0, "lam0": 1.0, "beta0": 0.0, "omega0": 0.5,
         "mu1": 1.0, "lam1": 1.0, "alpha1": 1.0, "c2": 1.0,
         "C0": None, "G0": None, "F0": None, "C1": None, "D0": None, "C2": None},
        _micromorphic_law,
        _micromorphic_ineq,
        {"c2": "scalar double-stress stiffness (C2 = c2 I) unless C2 is given",
         "C0, G0, F0, C1, D0, C2": "optional explicit constitutive blocks"},
    )
)

# restricted models default to the coefficients inherited from default micromorphic media
_register(
    ModelDef(
        "sym_stress",
        "micromorphic restriction with skew micro-deformation and symmetric stress",
        SYM_STRESS_LAYOUT,
        [("T", "v"), ("mu", "omega")],
        {"rho0": 1.0, "rho_psi": 1.0, "compliance": None},
        _restricted_law(SYM_STRESS_LAYOUT, "sym_stress"),
        lambda p: _density_ineq(p, [("rho0", 3), ("rho_psi", 3)]),
        {"compliance": "15x15 compliance on (T, mu); default inherited from micromorphic media"},
    )
)
_register(
    ModelDef(
        "sym0_variant",
        "micromorphic restriction with deviatoric micro-deformation",
        SYM0_VARIANT_LAYOUT,
        [("sigma", "v"), ("mu", "psi")],
        {"rho0": 1.0, "rho_psi": 1.0, "compliance": None},
        _restricted_law(SYM0_VARIANT_LAYOUT, "sym0_variant"),
        lambda p: _density_ineq(p, [("rho0", 3), ("rho_psi", 5)]),
        {"compliance": "24x24 compliance on (sigma, mu); default inherited from micromorphic media"},
    )
)
_register(
    ModelDef(
        "sym0_sym_stress",
        "micromorphic restriction with deviatoric micro-deformation and symmetric stress",
        SYM0_SYM_STRESS_LAYOUT,
        [("T", "v"), ("mu", "psi")],
        {"rho0": 1.0, "rho_psi": 1.0, "compliance": None},
        _restricted_law(SYM0_SYM_STRESS_LAYOUT, "sym0_sym_stress"),
        lambda p: _density_ineq(p, [("rho0", 3), ("rho_psi", 5)]),
        {"compliance": "21x21 compliance on (T, mu); default inherited from micromorphic media"},
    )
)
_register(
    ModelDef(
        "microstretch",
        "micropolar medium with an extra scalar stretch degree of freedom",
        MICROSTRETCH_LAYOUT,
        [("tau", "udot"), ("mu", "psidot"), ("pi", "phidot")],
        {"rho0": 1.0, "rho1": 1.0, "rho2": 1.0,
         "C0": isotropic_C(1.0, 1.0, 1.0).tolist(), "B": np.zeros((9, 9)).tolist(),
         "D": (0.2 * np.eye(3).reshape(9, 1)).tolist(), "F": np.zeros((9, 3)).tolist(),
         "C1": isotropic_C(1.0, 1.0, 1.0).tolist(), "E": np.zeros((9, 1)).tolist(),
         "G": np.zeros((9, 3)).tolist(), "C2": 1.0, "K": np.zeros((1, 3)).tolist(),
         "C3": np.eye(3).tolist()},
        _microstretch_law,
        _microstretch_ineq,
        {"C2": "1x1 stretch stiffness, or 'balanced' for C2 = (D* E* K) W (D; E; K*)",
         "D, E": "9x1 stretch couplings", "K": "1x3 coupling of stretch and its gradient"},
    )
)


def _restricted_defaults(name: str) -> dict:
    return child_params("micromorphic", name, resolve_params("micromorphic"))


# ---------------------------------------------------------------------------
# parameters and builds


def resolve_params(name: str, params: Mapping | None = None) -> dict:
    """Defaults merged with ``params``; unknown keys raise ``KeyError``."""
    if name not in MODELS:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    m = MODELS[name]
    params = dict(params or {})
    unknown = set(params) - set(m.defaults)
    if unknown:
        raise KeyError(f"unknown parameters for {name}: {sorted(unknown)}")
    out = dict(m.defaults)
    out.update(params)
    if name in ("sym_stress", "sym0_variant", "sym0_sym_stress") and out.get("compliance") is None:
        inherited = _restricted_defaults(name)
        out["compliance"] = inherited["compliance"]
        if "rho_psi" not in params:
            out["rho_psi"] = inherited["rho_psi"]
        if "rho0" not in params:
            out["rho0"] = inherited["rho0"]
    for k, v in out.items():
        if isinstance(v, (int, float)) and not isinstance(v, bool) and not math.isfinite(v):
            raise ValueError(f"parameter {k} must be finite")
    return out


def parameter_violations(name: str, params: Mapping | None = None) -> list:
    """Messages of the violated parameter inequalities (empty if none)."""
    p = resolve_params(name, params)
    ineq = MODELS[name].inequalities
    if ineq is None:
        return []
    return [msg for value, msg in ineq(p).values() if not value > 0.0]


def build_law(name: str, params: Mapping | None = None, check: bool = True) -> MaterialLaw:
    """Per-node material law of a catalog model.

    With ``check`` the parameter inequalities are enforced first and
    :class:`InvalidParameters` names the violated ones.
    """
    p = resolve_params(name, params)
    if check:
        bad = parameter_violations(name, p)
        if bad:
            raise InvalidParameters(name, bad)
    law = MODELS[name].law_fn(p)
    law.name = name
    return law


def build(
    name: str,
    params: Mapping | None = None,
    grid: Grid | None = None,
    *,
    forcing=None,
    T: float = 1.0,
    onset: float = 0.0,
    check: bool = True,
    allow_indefinite_M2: bool = False,
) -> EvoProblem:
    """Grid-level evolution problem for a catalog model.

    The per-node law is validated once; lifting to the grid preserves the
    verdict, so the grid law inherits it.
    """
    grid = grid or DEFAULT_GRID
    m = MODELS[name] if name in MODELS else None
    if m is None:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    local = build_law(name, params, check)
    if check and not local.validity.valid:
        raise InvalidParameters(name, local.validity.reasons)
    law = MaterialLaw(
        m.layout,
        lift_block_operator(local.M0, grid),
        lift_block_operator(local.M1, grid),
        lift_block_operator(local.M2, grid),
        name=name,
    )
    law._validity = local.validity
    A = assemble_A(m.layout, m.pairs, grid)
    return EvoProblem(
        law, A, list(m.layout), grid, forcing or zero_forcing, T, onset, name, allow_indefinite_M2
    )


# ---------------------------------------------------------------------------
# reduction edges


@dataclass(frozen=True)
class EdgeDef:
    source: str
    target: str
    actions: tuple  # (action, target label) per source block
    description: str


def _kron3(m):
    return np.kron(np.eye(3), m)


EDGES: dict = {
    ("micromorphic", "cosserat_relative"): EdgeDef(
        "micromorphic", "cosserat_relative",
        (("identity", "v"), ("skew", "omega"), ("identity", "sigma"), ("skew", "mu"), ("zero", None)),
        "skew micro-deformation; rescaled micropolar relative (coupling 1)",
    ),
    ("micromorphic", "classical"): EdgeDef(
        "micromorphic", "classical",
        (("identity", "v"), ("zero", None), ("sym", "T"), ("zero", None), ("zero", None)),
        "no micro-deformation and symmetric stress",
    ),
    ("micromorphic", "sym_stress"): EdgeDef(
        "micromorphic", "sym_stress",
        (("identity", "v"), ("skew", "omega"), ("sym", "T"), ("skew", "mu"), ("zero", None)),
        "skew micro-deformation and symmetric stress",
    ),
    ("micromorphic", "sym0_variant"): EdgeDef(
        "micromorphic", "sym0_variant",
        (("identity", "v"), ("sym0", "psi"), ("identity", "sigma"), ("sym0", "mu"), ("zero", None)),
        "deviatoric micro-deformation",
    ),
    ("micromorphic", "sym0_sym_stress"): EdgeDef(
        "micromorphic", "sym0_sym_stress",
        (("identity", "v"), ("sym0", "psi"), ("sym", "T"), ("sym0", "mu"), ("zero", None)),
        "deviatoric micro-deformation and symmetric stress",
    ),
    ("cosserat", "cosserat_relative"): EdgeDef(
        "cosserat", "cosserat_relative",
        (("identity", "v"), ("axial", "omega"), ("identity", "sigma"), ("axial", "mu")),
        "unitary change of variables from axial vectors to skew tensors",
    ),
    ("microstretch", "hemitropic"): EdgeDef(
        "microstretch", "hemitropic",
        (("identity", "v"), ("identity", "w"), ("zero", None), ("identity", "sigma"), ("identity", "tau"),
         ("zero", None)),
        "drop the stretch; micropolar child with coupled compliance",
    ),
}


def reduction_edge(source: str, target: str) -> ReductionMap:
    """Reduction map of a catalog edge."""
    try:
        e = EDGES[(source, target)]
    except KeyError:
        raise UnknownEdge(f"no catalog edge {source} -> {target}; known: {sorted(EDGES)}") from None
    layout = MODELS[source].layout
    acts = [Action(b.label, a, t) for b, (a, t) in zip(layout, e.actions)]
    S = ReductionMap(list(layout), acts, name=f"{source}->{target}")
    if [b.label for b in S.child_layout] != [b.label for b in MODELS[target].layout]:
        raise AssertionError(f"edge {source}->{target} does not produce the {target} layout")
    return S


def child_params(source: str, target: str, params: Mapping | None = None) -> dict:
    """Parameters of the direct child build that an edge should reproduce.

    Density and compliance blocks are the sub-blocks of the mother coefficients
    on the retained subspaces; the micropolar relative uses the halved density
    and couple stiffness of the unitary change of variables.
    """
    if (source, target) not in EDGES:
        raise UnknownEdge(f"no catalog edge {source} -> {target}")
    p = resolve_params(source, params)
    isym, isk, is0 = IOTA["sym"], IOTA["skew"], IOTA["sym0"]
    if source == "micromorphic":
        W = _micromorphic_W(p)
        rho0 = _mat(p["rho0"], 3).tolist()
        rho2 = _mat(p["rho2"], 9)
        W00, W01, W11 = W[:9, :9], W[:9, 9:36], W[9:36, 9:36]
        if target == "classical":
            return {"rho0": rho0, "compliance": (isym.T @ W00 @ isym).tolist()}
        stress = isym if target in ("sym_stress", "sym0_sym_stress") else np.eye(9)
        micro = isk if target in ("cosserat_relative", "sym_stress") else is0
        E = _kron3(micro)
        comp = np.block(
            [[stress.T @ W00 @ stress, stress.T @ W01 @ E], [E.T @ W01.T @ stress, E.T @ W11 @ E]]
        )
        rho_m = (micro.T @ rho2 @ micro).tolist()
        if target == "cosserat_relative":
            return {"rho0": rho0, "rho2": rho_m, "compliance": comp.tolist(), "coupling": 1.0}
        return {"rho0": rho0, "rho_psi": rho_m, "compliance": comp.tolist()}
    if (source, target) == ("cosserat", "cosserat_relative"):
        L, Ls = lambda_matrix(), lambda_star_matrix()
        F = isk.T @ L  # iota_skew^* Lambda
        C0 = _cosserat_C(p, 0)
        C1 = _cosserat_C(p, 1)
        return {
            "rho0": _mat(p["rho0"], 3).tolist(),
            "rho2": (0.5 * F @ _mat(p["rho1"], 3) @ F.T).tolist(),
            "C0": C0.tolist(),
            "C2": (0.5 * _kron3(F) @ C1 @ _kron3(Ls @ isk)).tolist(),
            "coupling": SQRT2,
        }
    if (source, target) == ("microstretch", "hemitropic"):
        b = microstretch_blocks(p)
        W, _, _ = microstretch_reduce(**b)
        return {
            "rho0": _mat(p["rho0"], 3).tolist(),
            "rho1": _mat(p["rho1"], 3).tolist(),
            "compliance": W[:18, :18].tolist(),
            "eta0": 1.0,
            "eta1": 0.0,
        }
    raise UnknownEdge(f"no parameter rule for {source} -> {target}")


# ---------------------------------------------------------------------------
# catalog export


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def zoo_list() -> dict:
    """Names, layouts, parameter defaults and edges as a JSON-ready dict."""
    models = []
    for name, m in MODELS.items():
        models.append(
            {
                "name": name,
                "description": m.description,
                "layout": [b.to_dict() for b in m.layout],
                "A_pairs": [list(pr) for pr in m.pairs],
                "parameters": {
                    k: ("<matrix>" if isinstance(v, list) else _jsonable(v)) for k, v in m.defaults.items()
                },
                "parameter_notes": m.param_doc,
            }
        )
    edges = []
    for (s, t), e in EDGES.items():
        S = reduction_edge(s, t)
        edges.append(
            {
                "from": s,
                "to": t,
                "kind": S.kind,
                "description": e.description,
                "actions": [a for a, _ in e.actions],
                "tombstones": S.tombstones,
            }
        )
    return {"models": models, "edges": edges}


def micromorphic_original_stresses(Sigma, s):
    """Recover ``(tau, sigma)`` from the reformulated micromorphic stresses.

    ``Sigma = iota_sym tau + sigma`` and ``s = iota_sym^* sigma`` give
    ``sigma = iota_sym s + skew Sigma`` and ``tau = iota_sym^* Sigma - s``.
    Arrays are node-major with 9 and 6 components per node.
    """
    isym = IOTA["sym"]
    Sigma = np.asarray(Sigma, dtype=float).reshape(-1, 9)
    s = np.asarray(s, dtype=float).reshape(-1, 6)
    sigma = s @ isym.T + Sigma @ SKEW.matrix.T
    tau = Sigma @ isym - s
    return tau.ravel(), sigma.ravel()
