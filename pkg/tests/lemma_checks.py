"""Randomized property checks for the terrace calculus and its neighbours.

Every check draws one random instance from ``rng``, asserts the property
on it and returns the number of non-vacuous sub-cases it verified (0 when
the instance did not qualify, e.g. the cluster filled the box).  Instances
mix d in {2, 3} and p in {0.3, 0.6, 0.9}.
"""

from __future__ import annotations

import numpy as np

from dreterrace.enhancement import corner_conditions, critical_instance, find_pivotal
from dreterrace.environment import EnvironmentField, ModelSpec
from dreterrace.lattice import (
    Box,
    VdLattice,
    down_cone,
    down_set_closure,
    is_solid_above,
    leq,
    relative_boundary,
    up_cone,
    up_set_closure,
)
from dreterrace.reachability import forward_cluster
from dreterrace.enhancement import slab_terraces
from dreterrace.terrace import (
    corner_mask,
    extract_terrace,
    h_mask,
    is_corner,
    lambda_mask,
    lambda_q,
    push_up,
    q_terrace_witness,
    special_descending_path,
    stabilize,
    terrace_path,
    complement_path,
    trichotomy,
)

PS = (0.3, 0.6, 0.9)


def _box(rng, d, small=False):
    top = (4 if small else 6) if d == 2 else (2 if small else 3)
    lo = tuple(-int(rng.integers(1, top + 1)) for _ in range(d))
    hi = tuple(int(rng.integers(1, top + 1)) for _ in range(d))
    return Box(lo, hi)


def instance(rng, small=False):
    """A random environment, box, source and the source's terrace (or None)."""
    d = int(rng.choice([2, 3]))
    p = float(rng.choice(PS))
    Q = _box(rng, d, small)
    env = EnvironmentField(Q, int(rng.integers(2**62)), ModelSpec("half_orthant", d, p))
    # sources in the upper half keep low-p clusters from always filling Q
    x = tuple(int(rng.integers(0, h + 1)) for h in Q.hi)
    return env, Q, x, extract_terrace(env, Q, x)


def _lower_margin(Q):
    """Sites all of whose lower neighbours are in ``Q``."""
    m = np.zeros(Q.shape, dtype=bool)
    m[(slice(1, None),) * Q.d] = True
    return m


def _random_pushes(rng, t, k):
    """Chain of terraces obtained by pushing up ``k`` random corners."""
    chain = [t]
    for _ in range(k):
        cur = chain[-1]
        cs = cur.box.members(corner_mask(cur.up))
        if not cs or cur.up.sum() <= 1:
            break
        chain.append(push_up(cur, cs[int(rng.integers(len(cs)))]))
    return chain


def _sub_box(rng, R):
    lo, hi = [], []
    for a, b in zip(R.lo, R.hi):
        u, v = sorted(int(c) for c in rng.integers(a, b + 1, 2))
        lo.append(u)
        hi.append(v)
    return Box(tuple(lo), tuple(hi))


# -- terrace properties inside a box ---------------------------------------


def terrace_up_down(rng):
    """Up-set meets down-set of the terrace exactly in the terrace (lower margin)."""
    _, Q, _, t = instance(rng)
    if t is None:
        return 0
    both = t.up & down_set_closure(t.sites)
    m = _lower_margin(Q)
    assert np.array_equal(both[m], t.sites[m])
    return 1


def terrace_above_solid(rng):
    """Up-set minus terrace is solid above."""
    _, _, _, t = instance(rng)
    if t is None:
        return 0
    for s in _random_pushes(rng, t, 3):
        assert is_solid_above(s.up & ~s.sites)
    return 1


def terrace_rectangle(rng):
    """x in the up-set, y on the terrace, x <= y: the box [x, y] is on the terrace."""
    _, Q, _, t = instance(rng)
    if t is None:
        return 0
    m = _lower_margin(Q)
    ys = Q.members(t.sites)
    for k in rng.permutation(len(ys))[:25]:
        y = ys[k]
        below = t.up & m & down_cone(y, Q)
        rect = up_set_closure(below, Q) & down_cone(y, Q)
        assert not np.any(rect & ~t.sites), y
    return 1


def chain_intersection(rng):
    """The intersection of a decreasing chain of terraces is a terrace."""
    _, Q, _, t = instance(rng, small=True)
    if t is None:
        return 0
    chain = _random_pushes(rng, t, int(rng.integers(1, 6)))
    inter = np.logical_and.reduce([s.up for s in chain])
    assert is_solid_above(inter)
    lam = lambda_mask(inter)
    assert np.array_equal(lam, chain[-1].sites)
    assert np.array_equal(q_terrace_witness(lam, Q), lam)
    return 1


def _check_terrace_path(t, x, y):
    path = terrace_path(t, x, y)
    pts = path.points
    assert pts[0] == x and pts[-1] == y
    assert all(p in t for p in pts)
    dx = [sum(abs(a - b) for a, b in zip(p, x)) for p in pts]
    dy = [sum(abs(a - b) for a, b in zip(p, y)) for p in pts]
    assert all(b > a for a, b in zip(dx, dx[1:]))
    assert all(b < a for a, b in zip(dy, dy[1:]))
    for inc in path.increments:
        pos = [c for c in inc if c > 0]
        neg = [c for c in inc if c < 0]
        assert pos in ([], [1]) and neg in ([], [-1]) and (pos or neg)
    for i in range(len(x)):
        coords = [p[i] for p in pts]
        assert coords == sorted(coords) or coords == sorted(coords, reverse=True)


def terrace_paths(rng):
    """Monotone paths inside the terrace between any two of its sites."""
    _, Q, _, t = instance(rng)
    if t is None or len(t) < 2:
        return 0
    pts = t.points()
    for _ in range(5):
        a, b = rng.choice(len(pts), 2, replace=False)
        _check_terrace_path(t, pts[a], pts[b])
    return 1


def complement_paths(rng):
    """Paths avoiding the terrace between two sites on the same side of it."""
    _, Q, _, t = instance(rng)
    if t is None:
        return 0
    done = 0
    for side in (~t.up, t.up & ~t.sites):
        pts = Q.members(side)
        if len(pts) < 2:
            continue
        for _ in range(3):
            a, b = rng.choice(len(pts), 2, replace=False)
            path = complement_path(t, pts[a], pts[b])
            assert path.points[0] == pts[a] and path.points[-1] == pts[b]
            assert path.is_nearest_neighbour() and path.is_self_avoiding()
            assert all(Q.contains(p) and p not in t for p in path.points)
        done = 1
    return done


def restriction_solid(rng):
    """The up-closure of a set in a big box, cut to a sub-box, is solid above there."""
    d = int(rng.choice([2, 3]))
    P = _box(rng, d)
    Q = _sub_box(rng, P)
    B = rng.random(P.shape) < float(rng.choice(PS)) / 5
    A = up_set_closure(B, P)[Q.slices_in(P)]
    assert is_solid_above(A)
    return 1


def lambda_generates(rng):
    """The terrace of a solid-above set A != Q generates A, and is a terrace."""
    d = int(rng.choice([2, 3]))
    Q = _box(rng, d, small=True)
    A = up_set_closure(rng.random(Q.shape) < float(rng.choice(PS)) / 4, Q)
    if A.all():
        return 0
    lam = lambda_q(A, Q).sites
    assert np.array_equal(up_set_closure(lam, Q), A)
    assert np.array_equal(q_terrace_witness(lam, Q), lam)
    return 1


def above_minus_terrace_solid(rng):
    """Q ∩ Δ_+ ∖ Δ is solid above for extracted and pushed terraces."""
    _, Q, _, t = instance(rng)
    if t is None:
        return 0
    for s in _random_pushes(rng, t, 4):
        G = up_set_closure(s.sites, Q)
        assert is_solid_above(G & ~s.sites)
    return 1


def h_descent_step(rng):
    """An H-site is a corner or has an H-site among its lower neighbours."""
    _, Q, _, t = instance(rng)
    if t is None:
        return 0
    for s in _random_pushes(rng, t, 3):
        H = h_mask(s.sites)
        for z in Q.members(H):
            lower = [tuple(c - (k == i) for k, c in enumerate(z)) for i in range(Q.d)]
            assert is_corner(s, z) or any(Q.contains(y) and H[Q.local(y)] for y in lower)
    return 1


def push_up_sandwich(rng):
    """Pushing up a corner z: between Δ∖{z} and that plus z's upper neighbours."""
    _, Q, _, t = instance(rng)
    if t is None:
        return 0
    H = h_mask(t.sites)
    for z in Q.members(corner_mask(t.up)):
        if t.up.sum() <= 1:
            break
        new = push_up(t, z)
        base = t.sites.copy()
        base[Q.local(z)] = False
        ups = Q.mask(
            y for y in (tuple(c + (k == j) for k, c in enumerate(z)) for j in range(Q.d)) if Q.contains(y)
        )
        assert not np.any(base & ~new.sites)
        assert not np.any(new.sites & ~(base | ups))
        assert new.up.sum() == t.up.sum() - 1
        if H[Q.local(z)]:
            assert np.array_equal(new.sites, base)
    return 1


def descending_path(rng):
    """After stabilizing a window, grouped -e_i runs reach its relative boundary."""
    _, R, _, t = instance(rng)
    if t is None:
        return 0
    W = _sub_box(rng, R)
    s = stabilize(t, W)
    boundary, _ = relative_boundary(W, R)
    done = 0
    for x in W.members(s.sites[W.slices_in(R)]):
        path = special_descending_path(s, W, x)
        pts = path.points
        assert boundary[W.local(pts[-1])]
        assert all(W.contains(p) and p in s for p in pts)
        axes = [next(i for i, c in enumerate(inc) if c) for inc in path.increments]
        assert all(sum(inc) == -1 for inc in path.increments)
        assert axes == sorted(axes)
        done = 1
    return done


def stabilize_clauses(rng):
    """Stabilization: unchanged off the window, minimal, and anchored below."""
    _, R, _, t = instance(rng)
    if t is None:
        return 0
    W = _sub_box(rng, R)
    G = t.up
    in_w = np.zeros(R.shape, dtype=bool)
    in_w[W.slices_in(R)] = True
    bnd, interior = relative_boundary(W, R)
    int_r = np.zeros(R.shape, dtype=bool)
    int_r[W.slices_in(R)] = interior
    bnd_r = in_w & ~int_r
    pick = G & in_w & (rng.random(R.shape) < 0.05)
    s = stabilize(t, W, pick)
    # (i) same terrace off the window, same up-set off its interior
    assert np.array_equal(s.sites[~in_w], t.sites[~in_w])
    assert np.array_equal(s.up[~int_r], G[~int_r])
    # (ii) the minimal solid-above set agreeing off the interior and containing the protected set
    assert np.array_equal(s.up, up_set_closure((G & ~int_r) | pick, R))
    # (iii) every window terrace site dominates a protected or boundary site of G
    anchors = up_set_closure(G & (pick | bnd_r), R)
    assert not np.any(s.sites & in_w & ~anchors)
    assert not np.any(s.sites & ~G)
    assert not np.any(corner_mask(s.up) & int_r & ~pick)
    return 1


def extraction(rng):
    """The extracted terrace is of type E, inside the cluster, and generates it."""
    env, Q, x, t = instance(rng)
    if t is None:
        return 0
    cl = forward_cluster(env, Q, x)
    assert not np.any(t.sites & ~(cl & env.omega_mask(Q)))
    assert np.array_equal(up_set_closure(t.sites, Q), cl)
    return 1


def cluster_trichotomy(rng):
    """Fills the box, or has no H-sites, or contains the source with H above it."""
    env, Q, x, t = instance(rng)
    case = trichotomy(t, x)
    if case == "fills":
        assert forward_cluster(env, Q, x).all()
    elif case == "empty_h":
        assert not h_mask(t.sites).any()
    else:
        assert x in t and not np.any(h_mask(t.sites) & ~up_cone(x, Q))
    return 1


def pivotal_corners(rng):
    """Pivotal sites outside the origin's up-cone sit on the blocking terrace as corners do."""
    d = int(rng.choice([2, 3]))
    N = int(rng.integers(3, 8)) if d == 2 else int(rng.integers(2, 4))
    M = int(rng.integers(1, N))
    R = Box.cube(N, d)
    if rng.random() < 0.5:
        om, _ = critical_instance(d, N, M, int(rng.integers(2**62)))
    else:
        om = rng.random(R.shape) < float(rng.choice(PS))
    rep = find_pivotal(om, M, R)
    sites = [u for u in rep.sites if not leq((0,) * d, u)]
    for u in sites:
        assert corner_conditions(om, R, M, u), u
    return 1 if sites else 0


# -- V_d geometry ------------------------------------------------------------


def vd_line(rng):
    d = int(rng.integers(2, 6))
    V = VdLattice.of(d)
    x = tuple(int(c) for c in rng.integers(-1000, 1000, d))
    i = int(rng.integers(d))
    run = [tuple(c + (k if j == i else 0) for j, c in enumerate(x)) for k in range(V.rho)]
    assert any(V.contains(y) for y in run)
    return 1


def vd_separation(rng):
    d = int(rng.integers(2, 6))
    V = VdLattice.of(d)
    while True:
        x = tuple(int(c) for c in rng.integers(-50, 50, d))
        if V.contains(x):
            break
    near = {x} | {tuple(c - (k == j) for k, c in enumerate(x)) for j in range(d)}
    W = Box.cube(2, d, center=x)
    for xp in W.members(V.mask(W)):
        if xp == x:
            continue
        for i in range(d):
            assert tuple(c - (k == i) for k, c in enumerate(xp)) not in near
    return 1


# -- slab ---------------------------------------------------------------------


def slab_clauses(rng):
    d = int(rng.choice([2, 3]))
    n = int(rng.integers(3, 9)) if d == 2 else int(rng.integers(2, 4))
    p = float(rng.choice(PS))
    box = Box((-n,) * d + (1,), (n,) * d + (2,))
    env = EnvironmentField(box, int(rng.integers(2**62)), ModelSpec("slab", d, p))
    layer = int(rng.integers(1, 3))
    x = tuple(int(c) for c in rng.integers(0, n + 1, d)) + (layer,)
    rep = slab_terraces(env, x)
    assert rep.ok, rep.clauses
    return 1


CHECKS = {
    "terrace up/down margin": terrace_up_down,
    "terrace above-part solid": terrace_above_solid,
    "terrace rectangle": terrace_rectangle,
    "chain intersection": chain_intersection,
    "terrace paths": terrace_paths,
    "complement paths": complement_paths,
    "restriction solid above": restriction_solid,
    "lambda generates": lambda_generates,
    "above-minus-terrace solid": above_minus_terrace_solid,
    "H descent": h_descent_step,
    "push-up sandwich": push_up_sandwich,
    "descending path": descending_path,
    "stabilize clauses": stabilize_clauses,
    "extraction": extraction,
    "trichotomy": cluster_trichotomy,
    "pivotal corners": pivotal_corners,
    "V_d line coverage": vd_line,
    "V_d separation": vd_separation,
    "slab clauses": slab_clauses,
}


def run_check(name, count, seed, max_draws=None):
    """Run ``name`` until ``count`` non-vacuous instances pass; returns that number."""
    fn = CHECKS[name]
    rng = np.random.default_rng(seed)
    done = draws = 0
    max_draws = 50 * count if max_draws is None else max_draws
    while done < count and draws < max_draws:
        done += fn(rng)
        draws += 1
    return done
