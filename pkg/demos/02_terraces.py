"""
Terraces, corners and push-ups
==============================

Extract the lower boundary of a cluster, push up one of its corners, and
stabilize it inside a window.
"""

from dreterrace.environment import EnvironmentField, ModelSpec
from dreterrace.lattice import Box, up_set_closure
from dreterrace.terrace import (
    corners_of,
    delete_h_corners_trace,
    extract_terrace,
    h_mask,
    lambda_q,
    push_up,
    stabilize_trace,
    trichotomy,
)


def show(t, Q):
    for y in reversed(range(Q.lo[1], Q.hi[1] + 1)):
        print("".join("T" if (x, y) in t else ("+" if t.in_up((x, y)) else ".")
                      for x in range(Q.lo[0], Q.hi[0] + 1)))
    print()


# A staircase built by hand: the terrace of the up-closure of a few points.
Q = Box((-4, -1), (1, 4))
stairs = [(-4, 3), (-3, 3), (-2, 2), (-2, 1), (-1, 1), (0, 0), (1, 0)]
t = lambda_q(up_set_closure(stairs, Q), Q)
show(t, Q)
print("corners:", corners_of(t).corners)
print("H sites:", Q.members(h_mask(t.sites)))

# Pushing up a corner removes it from the up-set.
show(push_up(t, (0, 0)), Q)

# H sites outside the origin's up-cone can be deleted one after another.
out = delete_h_corners_trace(t, (0, 0))
print("removed H corners:", out.removed)

# Stabilizing inside a window pushes every interior corner until none is left.
R = Box((0, 0), (6, 6))
tr = stabilize_trace(lambda_q(up_set_closure([(3, 3)], R), R), Box((1, 1), (5, 5)))
print("push-ups during stabilization:", len(tr.removed))
show(tr.terrace, R)

# The terrace of a random cluster.
env = EnvironmentField(Box.cube(6, 2), seed=1, spec=ModelSpec("half_orthant", 2, 0.8))
ct = extract_terrace(env, env.box, (0, 0))
print("cluster case:", trichotomy(ct, (0, 0)))
if ct is not None:
    show(ct, env.box)
