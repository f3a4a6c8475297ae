"""
Slab coupling and a terrace surface
===================================

Build the two layer-1 environments derived from a slab, check their
marginal on V_d, and export a three-dimensional terrace as a PLY file.
"""

import tempfile
from pathlib import Path

from dreterrace.enhancement import f_disturbance, slab_terraces
from dreterrace.environment import EnvironmentField, ModelSpec, SlabBox, derive_eta_zeta
from dreterrace.experiments import export_surface
from dreterrace.lattice import Box, VdLattice

d, p = 2, 0.6
region = Box.cube(60, d)
slab = EnvironmentField(SlabBox.cube(61, d).box, seed=4, spec=ModelSpec("slab", d, p))
eta, zeta = derive_eta_zeta(slab, region)
vd = VdLattice.of(d).mask(region)
print(f"P(E) on V_d: {zeta[vd].mean():.4f}  (f(p) = {f_disturbance(p, d):.4f})")
print("eta inside zeta:", not (eta & ~zeta).any())

rep = slab_terraces(slab, (0, 0, 1))
print("slab terrace relations:", rep.clauses)

Q = Box.cube(20, 3)
env = EnvironmentField(Q, seed=8, spec=ModelSpec("half_orthant", 3, 0.95))
dest = Path(tempfile.mkdtemp()) / "terrace.ply"
out = export_surface(env, Q, (0, 0, 0), dest)
print(f"{out.status}: {len(out.points)} vertices written to {out.path}")
print("all type E:", out.all_type_e, " all on the terrace:", out.all_terrace)
