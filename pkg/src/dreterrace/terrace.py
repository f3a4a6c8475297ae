"""Local terraces and the operations that reshape them.

A local terrace lives in a box and is described by its up-set ``G``, a
subset of the box closed under +e_i steps.  Its sites are the members of
``G`` with some lower neighbour in the box but outside ``G``.  Corners of
``G`` (members whose lower neighbours all lie outside ``G``) can be
removed one at a time ("pushed up") without losing the closure property.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .environment import EnvironmentField
from .lattice import (
    Box,
    as_point,
    is_solid_above,
    leq,
    relative_boundary,
    shifted,
    step,
    up_cone,
    up_set_closure,
)
from .reachability import LatticePath, forward_cluster


class TerraceError(RuntimeError):
    """A construction reached a state its hypotheses rule out."""


def lambda_mask(G: np.ndarray) -> np.ndarray:
    """Members of ``G`` with a lower neighbour in the box but not in ``G``."""
    G = np.asarray(G, dtype=bool)
    out = np.zeros(G.shape, dtype=bool)
    for i in range(G.ndim):
        out |= shifted(~G, i, 1, fill=False)
    return G & out


def corner_mask(G: np.ndarray) -> np.ndarray:
    """Members of ``G`` none of whose lower neighbours is in ``G``."""
    G = np.asarray(G, dtype=bool)
    out = G.copy()
    for i in range(G.ndim):
        out &= ~shifted(G, i, 1, fill=False)
    return out


def h_mask(delta: np.ndarray) -> np.ndarray:
    """Sites whose upper neighbours are all in ``delta`` or outside the box."""
    delta = np.asarray(delta, dtype=bool)
    out = delta.copy()
    for i in range(delta.ndim):
        out &= shifted(delta, i, -1, fill=True)
    return out


@dataclass(frozen=True, eq=False)
class QTerrace:
    """Canonical local terrace of the up-set ``up`` in ``box``."""

    box: Box
    up: np.ndarray
    sites: np.ndarray

    def __post_init__(self):
        self.up.setflags(write=False)
        self.sites.setflags(write=False)

    def __contains__(self, x) -> bool:
        return self.box.contains(x) and bool(self.sites[self.box.local(x)])

    def in_up(self, x) -> bool:
        return self.box.contains(x) and bool(self.up[self.box.local(x)])

    def points(self) -> list:
        return self.box.members(self.sites)

    def __len__(self) -> int:
        return int(self.sites.sum())

    def same_as(self, other: "QTerrace") -> bool:
        return self.box == other.box and np.array_equal(self.up, other.up)


@dataclass(frozen=True)
class CornerSet:
    corners: list
    h_set: list


def lambda_q(G: np.ndarray, Q: Box) -> QTerrace:
    """The canonical terrace of a box-closed up-set ``G``."""
    G = np.asarray(G, dtype=bool)
    if G.shape != Q.shape:
        raise ValueError("mask does not match box")
    if not is_solid_above(G):
        raise ValueError("G is not solid above within the box")
    return QTerrace(Q, G.copy(), lambda_mask(G))


def extract_terrace(env: EnvironmentField, Q: Box, x: Sequence[int]) -> QTerrace | None:
    """Terrace of the forward cluster of ``x`` in ``Q``.

    Returns None when the cluster fills ``Q`` (equivalently, reaches the
    lower corner).  Otherwise the terrace sites are checked to be of type E
    and to generate the cluster as an up-set.
    """
    if not env.spec.monotone:
        raise ValueError("terraces need a model where every site has the positive steps")
    cl = forward_cluster(env, Q, x)
    if cl.flat[0]:
        return None
    t = lambda_q(cl, Q)
    om = env.omega_mask(Q)
    if np.any(t.sites & ~om):
        raise TerraceError("terrace site outside Omega_1")
    if not np.array_equal(up_set_closure(t.sites, Q), cl):
        raise TerraceError("terrace does not generate the cluster")
    return t


def corners_of(t: QTerrace) -> CornerSet:
    _check_canonical(t)
    return CornerSet(t.box.members(corner_mask(t.up)), t.box.members(h_mask(t.sites)))


def _check_canonical(t: QTerrace) -> None:
    if not np.array_equal(t.sites, lambda_mask(t.up)):
        raise ValueError("terrace is not in canonical form")


def is_corner(t: QTerrace, z) -> bool:
    z = as_point(z, t.box.d)
    if not t.in_up(z):
        return False
    return not any(t.in_up(step(z, i, -1)) for i in range(t.box.d))


def push_up(t: QTerrace, z: Sequence[int]) -> QTerrace:
    """Remove the corner ``z`` from the up-set and re-extract the terrace."""
    z = as_point(z, t.box.d)
    if not is_corner(t, z):
        raise ValueError(f"{z} is not a corner")
    G = t.up.copy()
    G[t.box.local(z)] = False
    return QTerrace(t.box, G, lambda_mask(G))


def trichotomy(t: QTerrace | None, x: Sequence[int]) -> str:
    """Which case of the cluster-terrace trichotomy holds for source ``x``.

    Returns ``"fills"`` (no terrace), ``"empty_h"`` or ``"h_above_x"``;
    raises if none applies.
    """
    if t is None:
        return "fills"
    H = h_mask(t.sites)
    if not H.any():
        return "empty_h"
    if x in t and not np.any(H & ~up_cone(x, t.box)):
        return "h_above_x"
    raise TerraceError("trichotomy violated")


def _window_mask(R: Box, Q: Box) -> np.ndarray:
    """Relative interior of ``Q`` in ``R``, as a mask over ``R``."""
    _, interior = relative_boundary(Q, R)
    out = np.zeros(R.shape, dtype=bool)
    out[Q.slices_in(R)] = interior
    return out


def _as_mask(A, R: Box) -> np.ndarray:
    if A is None:
        return np.zeros(R.shape, dtype=bool)
    if isinstance(A, np.ndarray):
        return A.astype(bool)
    return R.mask(A)


@dataclass
class PushTrace:
    terrace: QTerrace
    removed: list
    halted: bool = False


def stabilize_trace(t: QTerrace, Q: Box, A=None, stop: Sequence[int] | None = None) -> PushTrace:
    """Push up every corner in the relative interior of ``Q`` outside ``A``.

    Corners are removed smallest-first in row-major order; when ``stop`` is
    given the process halts just before that site would be removed.
    """
    R = t.box
    A = _as_mask(A, R)
    if np.any(A & ~t.up):
        raise ValueError("protected set is not inside the up-set")
    if not t.up.any() or t.up.all():
        raise ValueError("up-set must be neither empty nor the whole box")
    window = _window_mask(R, Q) & ~A
    member = np.ascontiguousarray(t.up).ravel().copy()
    stop_idx = -1 if stop is None else R.index(stop)
    removed, halted = _kernels.sweep_corners(
        member, window.ravel(), np.asarray(R.shape, dtype=np.int64), stop_idx
    )
    G = member.reshape(R.shape)
    return PushTrace(QTerrace(R, G, lambda_mask(G)), [R.point(k) for k in removed], bool(halted))


def stabilize(t: QTerrace, Q: Box, A=None) -> QTerrace:
    return stabilize_trace(t, Q, A).terrace


def h_descent(t: QTerrace, z: Sequence[int]) -> tuple:
    """Walk down from an H-site to a corner through H-sites.

    Each step takes the smallest axis ``i`` with ``z - e_i`` in H.
    """
    H = h_mask(t.sites)
    R = t.box
    z = as_point(z, R.d)
    while not is_corner(t, z):
        for i in range(R.d):
            y = step(z, i, -1)
            if R.contains(y) and H[R.local(y)]:
                z = y
                break
        else:
            raise TerraceError(f"descent stuck at {z}")
    return z


def delete_h_corners_trace(
    t: QTerrace,
    apex: Sequence[int],
    window: Box | None = None,
    stop: Sequence[int] | None = None,
) -> PushTrace:
    """Remove H-sites outside the up-cone of ``apex`` until none remain.

    Each removal is a corner found by descending from the smallest
    offending H-site.  With ``window`` given, every removed site must lie
    in its relative interior.  With ``stop`` given the process halts just
    before that site would be removed.
    """
    R = t.box
    _check_canonical(t)
    cone = up_cone(apex, R)
    inner = _window_mask(R, window) if window is not None else None
    G = t.up.copy()
    delta = t.sites.copy()
    removed = []
    while True:
        bad = h_mask(delta) & ~cone
        if not bad.any():
            break
        start = R.point(int(np.flatnonzero(bad.ravel())[0]))
        cur = QTerrace(R, G, delta)
        z = h_descent(cur, start)
        if stop is not None and z == tuple(stop):
            return PushTrace(QTerrace(R, G, delta), removed, True)
        if inner is not None and not inner[R.local(z)]:
            raise TerraceError(f"H-corner {z} outside the window interior")
        G = G.copy()
        G[R.local(z)] = False
        new_delta = lambda_mask(G)
        expect = delta.copy()
        expect[R.local(z)] = False
        if not np.array_equal(new_delta, expect):
            raise TerraceError(f"removing H-corner {z} changed more than one site")
        delta = new_delta
        removed.append(z)
    return PushTrace(QTerrace(R, G, delta), removed, False)


def delete_h_corners(t: QTerrace, apex: Sequence[int], window: Box | None = None) -> QTerrace:
    return delete_h_corners_trace(t, apex, window).terrace


def terrace_path(t: QTerrace, x: Sequence[int], y: Sequence[int]) -> LatticePath:
    """Monotone path inside the terrace from ``x`` to ``y``.

    Steps are +e_i, -e_k or e_i - e_k; every coordinate moves monotonically
    from ``x`` towards ``y``.
    """
    d = t.box.d
    x = as_point(x, d)
    y = as_point(y, d)
    if x not in t or y not in t:
        raise ValueError("endpoints must be terrace sites")
    if x == y:
        return LatticePath([x])
    if leq(y, x):
        rev = terrace_path(t, y, x)
        return LatticePath(list(reversed(rev.points)))
    pts = [x]
    z = x
    while z != y:
        up_axes = [i for i in range(d) if z[i] < y[i]]
        down_axes = [k for k in range(d) if z[k] > y[k]]
        if not down_axes:
            nxt = step(z, up_axes[0], 1)
        elif not up_axes:
            # remaining moves only decrease; build from y and reverse
            tail = terrace_path(t, y, z)
            pts.extend(reversed(tail.points[:-1]))
            return LatticePath(pts)
        else:
            i, k = up_axes[0], down_axes[0]
            a = step(z, k, -1)
            b = step(a, i, 1)
            if t.in_up(a):
                nxt = a
            elif t.in_up(b):
                nxt = b
            else:
                nxt = step(z, i, 1)
        if nxt not in t:
            raise TerraceError(f"path left the terrace at {nxt}")
        pts.append(nxt)
        z = nxt
    return LatticePath(pts)


def complement_path(t: QTerrace, x: Sequence[int], y: Sequence[int]) -> LatticePath:
    """Self-avoiding path in the box avoiding the terrace.

    Both endpoints must lie below the terrace (outside the up-set) or both
    strictly above it (in the up-set but not on the terrace).
    """
    d = t.box.d
    x = t.box.check(x)
    y = t.box.check(y)
    below = not t.in_up(x) and not t.in_up(y)
    above = t.in_up(x) and t.in_up(y) and x not in t and y not in t
    if not (below or above):
        raise ValueError("endpoints must both be below or both strictly above the terrace")
    pts = [x]
    z = x
    first = (lambda a, b: a > b) if below else (lambda a, b: a < b)
    for phase in (0, 1):
        for i in range(d):
            while (first(z[i], y[i]) if phase == 0 else z[i] != y[i]):
                z = step(z, i, 1 if y[i] > z[i] else -1)
                pts.append(z)
    return LatticePath(pts)


def special_descending_path(t: QTerrace, Q: Box, x: Sequence[int]) -> LatticePath:
    """Path of grouped -e_1, -e_2, ... runs from ``x`` to the relative boundary.

    ``t`` is a terrace of the ambient box and ``x`` a terrace site of
    ``Q``.  Each run continues while the next site is a terrace site of
    ``Q``; it stops early at a terrace site on the relative boundary of
    ``Q``.  If every run ends in the relative interior the final site is a
    corner there and a TerraceError names it.
    """
    R = t.box
    d = R.d
    x = Q.check(x)
    if x not in t:
        raise ValueError("start must be a terrace site")
    boundary, _ = relative_boundary(Q, R)

    def on_boundary(p):
        return bool(boundary[Q.local(p)])

    pts = [x]
    z = x
    if on_boundary(z):
        return LatticePath(pts)
    for j in range(d):
        while True:
            nxt = step(z, j, -1)
            if not (Q.contains(nxt) and nxt in t):
                break
            z = nxt
            pts.append(z)
            if on_boundary(z):
                return LatticePath(pts)
    raise TerraceError(f"descent ended at interior corner {z}")


def q_terrace_witness(delta: np.ndarray, Q: Box) -> np.ndarray:
    """Trace on ``Q`` of the terrace of an explicit unbounded good set.

    With ``A`` the up-closure of ``delta`` in ``Q`` and ``B`` the lower
    neighbours of ``A`` that leave ``Q``, the set of points that either
    exceed the top corner in coordinate sum or dominate a member of ``A``
    or ``B`` is good; its terrace restricted to ``Q`` is returned,
    computed pointwise.
    """
    A = up_set_closure(delta, Q)
    a_pts = Q.members(A)
    b_pts = [
        step(w, i, -1) for w in a_pts for i in range(Q.d) if w[i] == Q.lo[i]
    ]
    top = sum(Q.hi)

    def in_c(y):
        if sum(y) > top:
            return True
        if any(leq(w, y) for w in a_pts):
            return True
        return any(leq(b, y) for b in b_pts)

    out = np.zeros(Q.shape, dtype=bool)
    for x in Q.points():
        if in_c(x) and any(not in_c(step(x, i, -1)) for i in range(Q.d)):
            out[Q.local(x)] = True
    return out


def write_terrace_csv(t: QTerrace, dest) -> Path:
    dest = Path(dest)
    with dest.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(t.box.d)])
        w.writerows(t.points())
    return dest


def write_ply(points: Iterable[Sequence[int]], dest, comment: str | None = None) -> Path:
    """ASCII PLY point cloud of 3D lattice points."""
    pts = [tuple(int(c) for c in p) for p in points]
    if any(len(p) != 3 for p in pts):
        raise ValueError("PLY export needs 3D points")
    lines = ["ply", "format ascii 1.0"]
    if comment:
        lines.append(f"comment {comment}")
    lines += [f"element vertex {len(pts)}", "property int x", "property int y", "property int z", "end_header"]
    lines += [f"{a} {b} {c}" for a, b, c in pts]
    dest = Path(dest)
    dest.write_text("\n".join(lines) + "\n")
    return dest


def read_ply(src) -> list:
    lines = Path(src).read_text().splitlines()
    end = lines.index("end_header")
    n = next(int(l.split()[-1]) for l in lines[:end] if l.startswith("element vertex"))
    return [tuple(int(v) for v in l.split()) for l in lines[end + 1 : end + 1 + n]]
