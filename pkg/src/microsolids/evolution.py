"""Causal time stepping for ``(d M0 + M1 + d^{-1} M2 + A) U = f``.

Two one-step schemes are provided. Both carry the antiderivative ``V`` of the
state alongside ``U`` and start from zero history.

``midpoint``
    Solves ``M0 (U' - U)/dt + (M1 + A) Ubar + M2 Vbar = f(t + dt/2)`` with
    ``Ubar = (U + U')/2`` and ``V' = V + dt Ubar``. The discrete energy
    ``E = <U, M0 U>/2 + <V, M2 V>/2`` then satisfies
    ``E' - E = dt <Ubar, f(t + dt/2)>`` exactly, so with the matching
    quadrature the balance residual is pure roundoff.
``implicit_euler``
    Solves ``M0 (U' - U)/dt + (M1 + A) U' + M2 V' = f(t + dt)`` with
    ``V' = V + dt U'``. The scheme dissipates ``|U' - U|^2_{M0}/2`` per step.

Each step needs one solve with a fixed matrix. A sparse LU factorisation is
computed once per ``(problem, dt, scheme)`` and every solve is checked to a
relative residual of ``1e-12``, with iterative refinement if needed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid, trapezoid

from .blocks import BlockOperator, classify
from .grid import Grid, lift_block_operator, node_coordinates
from .materials import Block, MaterialLaw, Validity

__all__ = [
    "EvoProblem",
    "Trajectory",
    "SolverError",
    "StepSolver",
    "step_midpoint",
    "step_implicit_euler",
    "run",
    "energy",
    "energy_parts",
    "energy_balance_residual",
    "trapezoid_work",
    "weighted_norm",
    "antiderivative",
    "block_conserved_quantity",
    "gaussian_pulse",
    "constant_forcing",
    "zero_forcing",
    "write_energy_csv",
    "SCHEMES",
]

SCHEMES = ("midpoint", "implicit_euler")
RESIDUAL_TOL = 1e-12


class SolverError(RuntimeError):
    """Linear solve did not reach the required residual."""


Forcing = Callable[[float], "np.ndarray | None"]


def zero_forcing(t: float):
    return None


@dataclass
class EvoProblem:
    """One instance of the evolution equation on a grid.

    Parameters
    ----------
    law : MaterialLaw
        Grid-level coefficients (blocks already lifted).
    A : BlockOperator
        Skew spatial operator over the same spaces.
    layout : list of Block
    grid : Grid or None
    forcing : callable ``t -> vector or None``
        ``None`` means zero forcing at that time.
    T : float
        Horizon.
    onset : float
        Start of the forcing support (diagnostic only).
    name : str
    allow_indefinite_M2 : bool
        Accept a law whose ``M2`` is indefinite (user-chosen weight).
    """

    law: MaterialLaw
    A: BlockOperator
    layout: list
    grid: Grid | None = None
    forcing: Forcing = zero_forcing
    T: float = 1.0
    onset: float = 0.0
    name: str = ""
    allow_indefinite_M2: bool = False
    _mats: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.A.row_spaces != self.law.spaces or self.A.col_spaces != self.law.spaces:
            raise ValueError("A and the material law live on different spaces")

    # assembled matrices are cached; the problem is treated as immutable
    def matrix(self, which: str) -> sp.csr_matrix:
        if which not in self._mats:
            src = {"M0": self.law.M0, "M1": self.law.M1, "M2": self.law.M2, "A": self.A}[which]
            self._mats[which] = sp.csr_matrix(src.assemble(sparse=True))
        return self._mats[which]

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def has_M2(self) -> bool:
        return self.matrix("M2").nnz > 0

    def offsets(self) -> dict:
        return self.A.offsets("row")

    def split(self, x) -> dict:
        """Block views of a state vector."""
        return {label: x[s] for label, s in self.offsets().items()}

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def check(self) -> Validity:
        v = self.law.validity
        skew_ok = _max_abs(self.matrix("A") + self.matrix("A").T) == 0.0
        reasons = list(v.reasons)
        if not skew_ok:
            reasons.append("A not exactly skew")
        return Validity(not reasons, tuple(reasons), v.warnings)

    def with_forcing(self, forcing: Forcing, onset: float | None = None) -> "EvoProblem":
        p = EvoProblem(
            self.law, self.A, self.layout, self.grid, forcing, self.T,
            self.onset if onset is None else onset, self.name, self.allow_indefinite_M2,
        )
        p._mats = self._mats
        return p


def _max_abs(m) -> float:
    if sp.issparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.abs(m).max()) if np.size(m) else 0.0


# ---------------------------------------------------------------------------
# linear solves


class StepSolver:
    """Factorised step matrix with residual-checked solves."""

    def __init__(self, K: sp.spmatrix):
        self.K = sp.csc_matrix(K)
        try:
            self.lu = spla.splu(self.K)
        except RuntimeError as exc:
            raise SolverError(f"step matrix could not be factorised: {exc}") from None

    def solve(self, b: np.ndarray) -> np.ndarray:
        if not np.any(b):
            return np.zeros_like(b)
        x = self.lu.solve(b)
        nb = np.linalg.norm(b)
        for _ in range(3):
            r = b - self.K @ x
            res = np.linalg.norm(r) / nb
            if res <= RESIDUAL_TOL:
                return x
            x = x + self.lu.solve(r)
        r = b - self.K @ x
        res = np.linalg.norm(r) / nb
        if res > RESIDUAL_TOL or not np.all(np.isfinite(x)):
            raise SolverError(f"linear solve failed: relative residual {res:.3e}")
        return x


def _step_matrix(p: EvoProblem, dt: float, scheme: str):
    key = ("K", scheme, float(dt))
    if key not in p._mats:
        M0, M1, M2, A = (p.matrix(w) for w in ("M0", "M1", "M2", "A"))
        if scheme == "midpoint":
            K = M0 + (dt / 2.0) * (M1 + A) + (dt * dt / 4.0) * M2
        elif scheme == "implicit_euler":
            K = M0 + dt * (M1 + A) + (dt * dt) * M2
        else:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        p._mats[key] = StepSolver(K)
    return p._mats[key]


def step_midpoint(p: EvoProblem, U, V, f_half, dt: float):
    """One implicit-midpoint step; returns ``(U', V')``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    solver = _step_matrix(p, dt, "midpoint")
    rhs = p.matrix("M0") @ U
    if p.has_M2:
        rhs = rhs - (dt / 2.0) * (p.matrix("M2") @ V)
    if f_half is not None:
        rhs = rhs + (dt / 2.0) * f_half
    X = solver.solve(rhs)
    return 2.0 * X - U, V + dt * X


def step_implicit_euler(p: EvoProblem, U, V, f_new, dt: float):
    """One implicit Euler step with right-endpoint forcing; returns ``(U', V')``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    solver = _step_matrix(p, dt, "implicit_euler")
    rhs = p.matrix("M0") @ U
    if p.has_M2:
        rhs = rhs - dt * (p.matrix("M2") @ V)
    if f_new is not None:
        rhs = rhs + dt * f_new
    Un = solver.solve(rhs)
    return Un, V + dt * Un


# ---------------------------------------------------------------------------
# energy


def energy_parts(p: EvoProblem, U, V) -> tuple[float, float]:
    """``(<U, M0 U>/2, <V, M2 V>/2)``."""
    e0 = 0.5 * float(U @ (p.matrix("M0") @ U))
    e2 = 0.5 * float(V @ (p.matrix("M2") @ V)) if p.has_M2 else 0.0
    return e0, e2


def energy(p: EvoProblem, U, V) -> float:
    e0, e2 = energy_parts(p, U, V)
    return e0 + e2


def _dot(f, U) -> float:
    return 0.0 if f is None else float(f @ U)


@dataclass
class Trajectory:
    """Time series produced by :func:`run`.

    ``states`` and ``aux`` hold the stored ``U_k`` and ``V_k`` at the indices in
    ``stored``; the scalar series cover every step.
    """

    dt: float
    scheme: str
    times: np.ndarray
    E_M0: np.ndarray
    E_M2: np.ndarray
    work: np.ndarray  # scheme-consistent cumulative work
    work_trapezoid: np.ndarray  # nodal trapezoid cumulative work
    max_abs: np.ndarray
    stored: list = field(default_factory=list)
    states: list = field(default_factory=list)
    aux: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def E_total(self) -> np.ndarray:
        return self.E_M0 + self.E_M2

    def residual_series(self, quadrature: str = "scheme") -> np.ndarray:
        w = self.work if quadrature == "scheme" else self.work_trapezoid
        return np.abs(self.E_total - self.E_total[0] - w)

    def first_nonzero_time(self) -> float | None:
        idx = np.flatnonzero(self.max_abs > 0.0)
        return None if idx.size == 0 else float(self.times[idx[0]])

    def state_array(self) -> np.ndarray:
        return np.asarray(self.states)


def run(
    p: EvoProblem,
    dt: float,
    scheme: str = "midpoint",
    keep: str | int = "none",
    U0=None,
    V0=None,
    observer: Callable | None = None,
) -> Trajectory:
    """Integrate from zero history over ``[0, T]``.

    Parameters
    ----------
    keep : "none", "all", "last" or int
        Which states to store; an integer stores every ``keep``-th step.
    U0, V0 : optional initial state and antiderivative (default zero)
    observer : callable ``(k, t, U, V)``, optional
        Called after every step (and once for the initial state).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = int(round(p.T / dt))
    if nsteps < 1 or abs(nsteps * dt - p.T) > 1e-9 * max(p.T, 1.0):
        raise ValueError(f"horizon T={p.T} is not a multiple of dt={dt}")
    v = p.check()
    if not v.valid:
        raise ValueError(f"problem is not admissible: {v}")
    if v.warnings and not p.allow_indefinite_M2:
        raise ValueError("M2 is indefinite; set allow_indefinite_M2 to integrate anyway")

    U = p.zeros() if U0 is None else np.array(U0, dtype=float)
    V = p.zeros() if V0 is None else np.array(V0, dtype=float)
    times = dt * np.arange(nsteps + 1)
    E0 = np.empty(nsteps + 1)
    E2 = np.empty(nsteps + 1)
    work = np.zeros(nsteps + 1)
    work_tr = np.zeros(nsteps + 1)
    mx = np.empty(nsteps + 1)
    traj = Trajectory(dt, scheme, times, E0, E2, work, work_tr, mx)

    def store(k):
        if keep == "all" or (isinstance(keep, int) and not isinstance(keep, bool) and k % keep == 0) or (
            keep == "last" and k == nsteps
        ):
            traj.stored.append(k)
            traj.states.append(U.copy())
            traj.aux.append(V.copy())

    E0[0], E2[0] = energy_parts(p, U, V)
    mx[0] = float(np.abs(U).max()) if U.size else 0.0
    f_prev = p.forcing(0.0)
    store(0)
    if observer is not None:
        observer(0, 0.0, U, V)
    for k in range(nsteps):
        t = times[k]
        f_next = p.forcing(times[k + 1])
        if scheme == "midpoint":
            f_half = p.forcing(t + 0.5 * dt)
            Un, Vn = step_midpoint(p, U, V, f_half, dt)
            work[k + 1] = work[k] + dt * _dot(f_half, 0.5 * (U + Un))
        else:
            Un, Vn = step_implicit_euler(p, U, V, f_next, dt)
            work[k + 1] = work[k] + dt * _dot(f_next, Un)
        work_tr[k + 1] = work_tr[k] + 0.5 * dt * (_dot(f_prev, U) + _dot(f_next, Un))
        U, V, f_prev = Un, Vn, f_next
        E0[k + 1], E2[k + 1] = energy_parts(p, U, V)
        mx[k + 1] = float(np.abs(U).max())
        if not np.isfinite(mx[k + 1]):
            raise SolverError(f"non-finite state at step {k + 1}")
        store(k + 1)
        if observer is not None:
            observer(k + 1, times[k + 1], U, V)
    return traj


def energy_balance_residual(traj: Trajectory, k_a: int = 0, k_b: int | None = None, quadrature: str = "scheme") -> float:
    """``|E(b) - E(a) - work(a, b)|`` between stored step indices ``k_a <= k_b``.

    ``quadrature="scheme"`` uses the scheme's own work sum (midpoint rule for
    the midpoint scheme, right endpoint for implicit Euler);
    ``"trapezoid"`` uses the nodal trapezoid rule on ``<U_k, f(t_k)>``.
    """
    k_b = traj.steps if k_b is None else k_b
    if not 0 <= k_a <= k_b <= traj.steps:
        raise ValueError("need 0 <= k_a <= k_b <= steps")
    w = traj.work if quadrature == "scheme" else traj.work_trapezoid
    E = traj.E_total
    return float(abs(E[k_b] - E[k_a] - (w[k_b] - w[k_a])))


def trapezoid_work(traj: Trajectory) -> float:
    return float(traj.work_trapezoid[-1])


# ---------------------------------------------------------------------------
# weighted norms


def weighted_norm(values, times, rho: float) -> float:
    """Trapezoid approximation of ``(int_0^T exp(-2 rho t) |u(t)|^2 dt)^{1/2}``.

    ``values`` is an array with time along the first axis.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    sq = values.reshape(len(times), -1)
    sq = np.einsum("ij,ij->i", sq, sq)
    return float(np.sqrt(trapezoid(np.exp(-2.0 * rho * times) * sq, times)))


def antiderivative(values, times) -> np.ndarray:
    """Causal cumulative trapezoid integral starting at zero."""
    values = np.asarray(values, dtype=float)
    return cumulative_trapezoid(values, np.asarray(times, dtype=float), axis=0, initial=0.0)


# ---------------------------------------------------------------------------
# block conserved quantity


def block_conserved_quantity(p: EvoProblem, traj: Trajectory, u0: Sequence[str], u1: Sequence[str]) -> np.ndarray:
    """Half-step values of ``<dU0, M00 dU0>/2 + <G U0, M11^{-1} G U0>/2``.

    ``u0`` and ``u1`` are the label groups of the velocity-like and stress-like
    halves; ``G`` is the ``(u1, u0)`` block of ``A``. ``dU0`` is the step
    difference quotient and ``G U0`` is evaluated at the step average, which
    is the pairing in which the midpoint scheme conserves it. Requires every
    state to be stored.
    """
    if traj.stored != list(range(traj.steps + 1)):
        raise ValueError("block_conserved_quantity needs keep='all'")
    off = p.offsets()
    idx0 = np.concatenate([np.arange(off[l].start, off[l].stop) for l in u0])
    idx1 = np.concatenate([np.arange(off[l].start, off[l].stop) for l in u1])
    M0 = p.matrix("M0")
    M00 = M0[idx0][:, idx0]
    M11 = sp.csc_matrix(M0[idx1][:, idx1])
    G = p.matrix("A")[idx1][:, idx0]
    lu = spla.splu(M11)
    X = traj.state_array()
    out = np.empty(traj.steps)
    for k in range(traj.steps):
        d = (X[k + 1, idx0] - X[k, idx0]) / traj.dt
        g = G @ (0.5 * (X[k + 1, idx0] + X[k, idx0]))
        out[k] = 0.5 * float(d @ (M00 @ d)) + 0.5 * float(g @ lu.solve(g))
    return out


# ---------------------------------------------------------------------------
# forcings


def _block_slice(p_layout, grid: Grid, block: str):
    start = 0
    for b in p_layout:
        size = b.dim * grid.nodes
        if b.label == block:
            return slice(start, start + size), b.dim
        start += size
    raise ValueError(f"unknown target block {block!r}")


def _spatial_profile(grid: Grid, spatial_width: float, center=None) -> np.ndarray:
    X = node_coordinates(grid)
    c = np.full(3, grid.extent / 2.0) if center is None else np.asarray(center, dtype=float)
    r2 = np.sum((X - c) ** 2, axis=1)
    return np.exp(-r2 / (2.0 * (spatial_width * grid.extent) ** 2))


def gaussian_pulse(
    layout,
    grid: Grid,
    block: str,
    component: int = 0,
    onset: float = 0.0,
    center: float = 0.5,
    width: float = 0.05,
    amplitude: float = 1.0,
    spatial_width: float = 0.15,
) -> Forcing:
    """Gaussian in time, truncated to ``[onset, 2 center - onset]``, times a spatial bump.

    The forcing is exactly zero outside the truncation window, which makes the
    onset sharp for causality checks.
    """
    if center <= onset:
        raise ValueError("pulse center must lie after the onset")
    sl, dim = _block_slice(layout, grid, block)
    if not 0 <= component < dim:
        raise ValueError(f"component {component} out of range for block {block!r} (dim {dim})")
    size = sum(b.dim for b in layout) * grid.nodes
    shape = np.zeros(size)
    shape[sl][component::dim] = amplitude * _spatial_profile(grid, spatial_width)
    end = 2.0 * center - onset

    def f(t: float):
        if t < onset or t > end:
            return None
        return np.exp(-((t - center) ** 2) / (2.0 * width * width)) * shape

    f.support = (onset, end)
    return f


def constant_forcing(layout, grid: Grid, block: str, component: int = 0, onset: float = 0.0,
                     amplitude: float = 1.0, spatial_width: float = 0.15) -> Forcing:
    """Spatial bump switched on at ``onset`` and held constant."""
    sl, dim = _block_slice(layout, grid, block)
    size = sum(b.dim for b in layout) * grid.nodes
    shape = np.zeros(size)
    shape[sl][component::dim] = amplitude * _spatial_profile(grid, spatial_width)

    def f(t: float):
        return None if t < onset else shape

    return f


def write_energy_csv(path, traj: Trajectory):
    """Columns ``t, E_total, E_M0, E_M2, work_integral, residual`` with 17 significant digits."""
    res = traj.residual_series("scheme")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E_total", "E_M0", "E_M2", "work_integral", "residual"])
        for row in zip(traj.times, traj.E_total, traj.E_M0, traj.E_M2, traj.work, res):
            w.writerow(["%.17e" % x for x in row])
    return path
