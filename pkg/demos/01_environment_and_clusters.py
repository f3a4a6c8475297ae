"""
Environments and forward clusters
=================================

Sample a half-orthant environment, look at which sites are of type E, and
follow the arrows out of the origin inside a box.
"""

import numpy as np

from dreterrace.environment import EnvironmentField, ModelSpec
from dreterrace.lattice import Box
from dreterrace.reachability import connects_to_down_set, forward_cluster, line_hit

# Every site draws one uniform from a hash of (seed, coordinates), so the
# same site always gets the same value no matter which box we look through.
Q = Box.cube(8, 2)
env = EnvironmentField(Q, seed=3, spec=ModelSpec("half_orthant", 2, 0.55))
om = env.omega_mask()
print(f"type-E fraction in Q: {om.mean():.3f}")

# Raising p only adds type-E sites: the masks are nested on a fixed seed.
more = EnvironmentField(Q, seed=3, spec=ModelSpec("half_orthant", 2, 0.7)).omega_mask()
print("nested under a larger p:", not np.any(om & ~more))

# The forward cluster of the origin.  Every site has the plus steps, so
# the cluster is closed under moving up.
cl = forward_cluster(env, Q, (0, 0))
for row in reversed(range(Q.shape[1])):
    print("".join("#" if cl[i, row] else ("." if om[i, row] else "o") for i in range(Q.shape[0])))

# Does the origin reach the lower-left quadrant (-3, -3)_- inside Q?
ok, path = connects_to_down_set(env, Q, (0, 0), (-3, -3))
print("reaches (-3,-3)_-:", ok, "in", len(path) - 1 if ok else None, "steps")

# A staged greedy walk hits any chosen axis line.
walk = line_hit(env, (0, 0), (-4, 2), 1)
print("line walk ends at", walk.points[-1])
