"""Command-line front end.

Commands
--------
``validate <cfg>``
    Classify the coefficients of the configured model and list violated
    parameter inequalities.
``run <cfg>``
    Integrate the configured problem and write the energy CSV, snapshots and
    a JSON report.
``derive <cfg>``
    Conjugate a mother model along a reduction edge and compare with the
    direct child build (optionally also the dynamics).
``zoo list``
    Print the model catalog as JSON.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 solver error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .blocks import classify
from .config import ConfigError, load_config, require, resolve_output
from .evolution import (
    SolverError,
    constant_forcing,
    energy_balance_residual,
    gaussian_pulse,
    run,
    weighted_norm,
    write_energy_csv,
    zero_forcing,
)
from .grid import Grid, write_snapshot
from .reduction import (
    PreconditionError,
    ReductionMap,
    conjugate_law,
    conjugate_problem,
    verify_descendant_dynamics,
)
from . import zoo

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
IDENTITY_TOL = 1e-12
DYNAMICS_TOL = 1e-10


def _grid(spec: dict | None) -> Grid:
    if not spec:
        return zoo.DEFAULT_GRID
    n = spec["n"]
    return Grid(n, spec.get("h", 1.0 / (n + 1)))


def _model(cfg: dict):
    require(cfg, "model")
    m = cfg["model"]
    if m["name"] not in zoo.MODELS:
        raise ConfigError(f"unknown model {m['name']!r}; choose from {sorted(zoo.MODELS)}")
    params = m.get("params", {})
    try:
        zoo.resolve_params(m["name"], params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc).strip("'\"")) from None
    return m["name"], params, _grid(m.get("grid"))


def _forcing(cfg: dict, layout, grid: Grid):
    f = cfg.get("forcing") or {"kind": "zero"}
    if f["kind"] == "zero":
        return zero_forcing, 0.0
    block = f["block"]
    if block not in [b.label for b in layout]:
        raise ConfigError(f"forcing block {block!r} is not in the layout {[b.label for b in layout]}")
    onset = f.get("onset", 0.0)
    try:
        if f["kind"] == "constant":
            fn = constant_forcing(layout, grid, block, f.get("component", 0), onset, f.get("amplitude", 1.0),
                                  f.get("spatial_width", 0.15))
        else:
            width = f.get("width", 0.02)
            fn = gaussian_pulse(layout, grid, block, f.get("component", 0), onset, f.get("center", onset + 5 * width),
                                width, f.get("amplitude", 1.0), f.get("spatial_width", 0.15))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return fn, onset


def _classification(c) -> dict:
    return {"symmetry": c.symmetry, "definiteness": c.definiteness, "min_pivot": float(c.min_pivot)}


def _emit(report: dict, cfg: dict | None, out=None):
    out = out or sys.stdout
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    out.write(text + "\n")
    if cfg and cfg.get("outputs", {}).get("report_json"):
        path = resolve_output(cfg, cfg["outputs"]["report_json"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg: dict, out=None) -> int:
    name, params, grid = _model(cfg)
    violations = zoo.parameter_violations(name, params)
    report = {"model": name, "violated_inequalities": violations}
    try:
        law = zoo.build_law(name, params, check=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        report.update({"valid": False, "reasons": [f"coefficients could not be built: {exc}"]})
        _emit(report, cfg, out)
        return EXIT_INVALID
    v = law.validity
    p = zoo.build(name, params, grid, check=False)
    A = p.matrix("A")
    report["classification"] = {
        "M0": _classification(classify(law.M0)),
        "M1": _classification(classify(law.M1)),
        "M2": _classification(classify(law.M2)),
        "A": {"symmetry": "skew" if abs(A + A.T).max() == 0.0 else "neither", "max_abs_A_plus_AT": float(abs(A + A.T).max())},
    }
    report["valid"] = bool(v.valid and not violations)
    report["reasons"] = list(v.reasons)
    report["warnings"] = list(v.warnings)
    _emit(report, cfg, out)
    return EXIT_OK if report["valid"] else EXIT_INVALID


def cmd_run(cfg: dict, force: bool = False, out=None) -> int:
    require(cfg, "dt", "T")
    name, params, grid = _model(cfg)
    force = force or cfg.get("force", False)
    try:
        p = zoo.build(name, params, grid, T=cfg["T"], allow_indefinite_M2=force)
    except zoo.InvalidParameters as exc:
        _emit({"model": name, "valid": False, "violated_inequalities": exc.violations}, cfg, out)
        return EXIT_INVALID
    if p.law.validity.warnings and not force:
        _emit({"model": name, "valid": False, "warnings": list(p.law.validity.warnings),
               "hint": "pass --force to integrate with an indefinite M2"}, cfg, out)
        return EXIT_INVALID
    fn, onset = _forcing(cfg, p.layout, grid)
    p = p.with_forcing(fn, onset)
    scheme = cfg.get("scheme", "midpoint")
    outputs = cfg.get("outputs", {})
    snap = outputs.get("snapshots")
    observer = None
    if snap:
        sdir = resolve_output(cfg, snap["dir"])
        sdir.mkdir(parents=True, exist_ok=True)
        fmt = snap.get("format", "binary")

        def observer(k, t, U, V):
            if k % snap["every"] == 0:
                fields = {lbl: U[sl] for lbl, sl in p.offsets().items()}
                ext = "bin" if fmt == "binary" else "csv"
                write_snapshot(sdir / f"step_{k:06d}.{ext}", fields, grid, p.layout, fmt, {"t": float(t), "step": k})

    try:
        traj = run(p, cfg["dt"], scheme, observer=observer)
    except SolverError as exc:
        _emit({"model": name, "error": f"solver failure: {exc}"}, cfg, out)
        return EXIT_SOLVER
    if outputs.get("energy_csv"):
        path = resolve_output(cfg, outputs["energy_csv"])
        path.parent.mkdir(parents=True, exist_ok=True)
        write_energy_csv(path, traj)
    first = traj.first_nonzero_time()
    E = traj.E_total
    rel = traj.residual_series("scheme") / max(float(np.abs(E).max()), 1e-300)
    report = {
        "model": name,
        "scheme": scheme,
        "dt": cfg["dt"],
        "T": cfg["T"],
        "steps": traj.steps,
        "grid": {"n": grid.n, "h": grid.h},
        "final_balance_residual": energy_balance_residual(traj),
        "max_relative_balance_residual": float(rel.max()),
        "final_energy": float(E[-1]),
        "causality": {
            "onset": onset,
            "first_nonzero_time": first,
            "ok": first is None or first >= onset,
        },
    }
    if "rho" in cfg:
        report["rho"] = cfg["rho"]
        report["weighted_M0_norm"] = weighted_norm(np.sqrt(2.0 * np.maximum(traj.E_M0, 0.0)), traj.times, cfg["rho"])
    _emit(report, cfg, out)
    return EXIT_OK


def cmd_derive(cfg: dict, force: bool = False, out=None) -> int:
    require(cfg, "edge")
    e = cfg["edge"]
    src, tgt = e["from"], e.get("to")
    if src not in zoo.MODELS:
        raise ConfigError(f"unknown mother model {src!r}")
    params = e.get("params", {})
    try:
        zoo.resolve_params(src, params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc).strip("'\"")) from None
    if "actions" in e:
        try:
            S = ReductionMap.from_spec(zoo.MODELS[src].layout, e["actions"], f"{src}->{tgt or 'custom'}")
        except ValueError as exc:
            raise ConfigError(f"bad action list: {exc}") from None
    else:
        if tgt is None:
            raise ConfigError("edge needs 'to' or an 'actions' list")
        try:
            S = zoo.reduction_edge(src, tgt)
        except zoo.UnknownEdge as exc:
            raise ConfigError(str(exc).strip("'\"")) from None
    grid = _grid(e.get("grid") or {"n": 4})
    try:
        mother_law = zoo.build_law(src, params)
    except zoo.InvalidParameters as exc:
        _emit({"edge": [src, tgt], "valid": False, "violated_inequalities": exc.violations}, cfg, out)
        return EXIT_INVALID
    T = cfg.get("T", 1.0)
    mother = zoo.build(src, params, grid, T=T, allow_indefinite_M2=force)
    d = conjugate_problem(mother, S)
    child_local = conjugate_law(mother_law, S)
    report = {"edge": [src, tgt], "kind": S.kind, "map": S.describe(), "tombstones": S.tombstones}
    report["classification"] = {
        w: _classification(classify(getattr(child_local, w))) for w in ("M0", "M1", "M2")
    }
    report["child_validity"] = str(child_local.validity)
    ok = child_local.validity.valid
    comparable = (src, tgt) in zoo.EDGES and [b.label for b in S.child_layout] == [
        b.label for b in zoo.MODELS[tgt].layout
    ]
    if comparable:
        cp = zoo.child_params(src, tgt, params)
        direct_local = zoo.build_law(tgt, cp, check=False)
        direct = zoo.build(tgt, cp, grid, T=T, check=False)
        dA = d.child.matrix("A") - direct.matrix("A")
        dev_grid = max(d.child.law.blockwise_deviation(direct.law), float(abs(dA).max()) if dA.nnz else 0.0)
        dev_node = child_local.blockwise_deviation(direct_local)
        report["identity_checks"] = {
            "blockwise_deviation_per_node": dev_node,
            "blockwise_deviation_grid": dev_grid,
            "child_A_exactly_skew": float(abs(d.child.matrix("A") + d.child.matrix("A").T).max()) == 0.0,
            "tolerance": IDENTITY_TOL,
        }
        ok = ok and dev_node <= IDENTITY_TOL and dev_grid <= IDENTITY_TOL
    if e.get("dynamics"):
        require(cfg, "dt", "T")
        fn, _ = _forcing(cfg, d.child.layout, grid)
        try:
            dyn = verify_descendant_dynamics(d, fn, cfg["dt"], cfg.get("scheme", "midpoint"),
                                             force=force or cfg.get("force", False))
        except PreconditionError as exc:
            report["dynamics"] = {"refused": str(exc)}
            _emit(report, cfg, out)
            return EXIT_INVALID
        except SolverError as exc:
            report["dynamics"] = {"error": str(exc)}
            _emit(report, cfg, out)
            return EXIT_SOLVER
        report["dynamics_discrepancy"] = dyn["dynamics_discrepancy"]
        report["dynamics"] = {k: v for k, v in dyn.items() if k != "dynamics_discrepancy"}
        ok = ok and dyn["dynamics_discrepancy"] <= DYNAMICS_TOL
    report["ok"] = bool(ok)
    _emit(report, cfg, out)
    return EXIT_OK if ok else EXIT_INVALID


def cmd_zoo_list(out=None) -> int:
    out = out or sys.stdout
    out.write(json.dumps(zoo.zoo_list(), indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="microsolids", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="classify a model's coefficients")
    v.add_argument("config")
    r = sub.add_parser("run", help="integrate a configured problem")
    r.add_argument("config")
    r.add_argument("--force", action="store_true", help="integrate even with an indefinite M2")
    d = sub.add_parser("derive", help="check a reduction edge")
    d.add_argument("config")
    d.add_argument("--force", action="store_true", help="run dynamics even when the precondition fails")
    z = sub.add_parser("zoo", help="model catalog")
    z.add_argument("action", choices=["list"])
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "zoo":
            return cmd_zoo_list()
        cfg = load_config(args.config)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "run":
            return cmd_run(cfg, args.force)
        return cmd_derive(cfg, args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
