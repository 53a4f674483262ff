"""Walk the catalog reduction edges.

Every edge conjugates the mother coefficients with a partial isometry and is
compared with the child built directly. The dynamics part shows one
descendant that follows its mother exactly and one that does not.
Run with ``python3 demos/reduction_tour.py``.
"""
from __future__ import annotations

from microsolids import zoo
from microsolids.evolution import gaussian_pulse
from microsolids.grid import Grid
from microsolids.reduction import conjugate_law, conjugate_problem, invariance_defects, verify_descendant_dynamics

g = Grid.unit(4)

print("edge                                  kind        deviation  dropped")
for (src, tgt), edge in zoo.EDGES.items():
    S = zoo.reduction_edge(src, tgt)
    child = conjugate_law(zoo.build_law(src), S)
    direct = zoo.build_law(tgt, zoo.child_params(src, tgt), check=False)
    dev = child.blockwise_deviation(direct)
    print(f"{src + ' -> ' + tgt:38s}{S.kind:12s}{dev:9.1e}  {', '.join(S.tombstones) or '-'}")

print("\ndynamics on a 4^3 grid")
cases = [
    ("micromorphic", "cosserat_relative",
     {"omega0": -1.0, "beta0": -1.0, "mu1": 1.0, "lam1": 1.0, "mu0": 2.0, "lam0": 2.0}),
    ("micromorphic", "classical", {"omega0": 0.0, "beta0": 0.0}),
]
for src, tgt, params in cases:
    d = conjugate_problem(zoo.build(src, params, g, T=0.2), zoo.reduction_edge(src, tgt))
    f = gaussian_pulse(d.child.layout, g, "v", 0, onset=0.0, center=0.1, width=0.02)
    defects = invariance_defects(d.mother, d.S_grid)
    rep = verify_descendant_dynamics(d, f, 1e-3, force=True)
    print(f"  {src} -> {tgt}")
    print("    invariance defects: " + ", ".join(f"{k} {v:.1e}" for k, v in defects.items()))
    print(f"    trajectory discrepancy: {rep['dynamics_discrepancy']:.2e}")

# the classical child drops the skew part of the micromorphic stress, but the
# spatial operator feeds the full velocity gradient into it, so the retained
# subspace is not invariant and the two trajectories part ways
