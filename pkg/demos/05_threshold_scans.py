"""
Finite-box blocking thresholds
==============================

Scan the blocking probability along p on shared trial seeds and compare
the half-crossings in two dimensions, in three dimensions, with V_d
disturbed, and on the two-layer slab.  These are finite-box estimates.
"""

from dreterrace.experiments import (
    ExperimentGeometry,
    disturbed_curve,
    ordered_within_ci,
    scan_critical,
    slab_scan,
    strictly_below,
)

trials, tol = 2000, 0.005
g2 = ExperimentGeometry(2, 24, 8, trials=trials, seed=1)
base, pert = disturbed_curve(g2, tol=tol, reps=500)
d3 = scan_critical("half_orthant", ExperimentGeometry(3, 16, 5, trials=trials // 4, seed=2), tol=tol, reps=500)
slab = slab_scan(ExperimentGeometry(2, 24, 8, trials=trials, seed=3), tol=tol, reps=500)

for name, r in [("d=2", base), ("d=2, V_d at f(p)", pert), ("slab", slab), ("d=3 (smaller box)", d3)]:
    print(f"{name:>20}: {r.crossing:.4f}  95% CI [{r.ci[0]:.4f}, {r.ci[1]:.4f}]")

print("d=2 strictly below d=3:", strictly_below(base, d3))
print("disturbing V_d raises the crossing:", pert.crossing > base.crossing)
print("slab between:", ordered_within_ci(base, slab) and ordered_within_ci(slab, d3))
