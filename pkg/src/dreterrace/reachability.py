"""Forward clusters inside boxes and explicit path constructions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .environment import EnvironmentField
from .lattice import Box, as_point, down_cone, step, sub


@dataclass
class LatticePath:
    points: list = field(default_factory=list)
    ok: bool = True

    def __len__(self):
        return len(self.points)

    @property
    def increments(self) -> list:
        return [sub(b, a) for a, b in zip(self.points, self.points[1:])]

    def is_nearest_neighbour(self) -> bool:
        return all(sum(abs(c) for c in inc) == 1 for inc in self.increments)

    def is_self_avoiding(self) -> bool:
        return len(set(self.points)) == len(self.points)


@dataclass(frozen=True)
class LValueRecord:
    base: tuple
    axis: int
    value: int | None

    @property
    def found(self) -> bool:
        return self.value is not None


def _cluster(env: EnvironmentField, Q: Box, x) -> tuple:
    if not env.box.contains_box(Q):
        raise ValueError("Q is not contained in the environment box")
    x = Q.check(x)
    plus, minus = env.arrows(Q)
    seen, parent = _kernels.forward_reach(plus, minus, np.asarray(Q.shape, dtype=np.int64), Q.index(x))
    return seen, parent


def forward_cluster(env: EnvironmentField, Q: Box, x: Sequence[int]) -> np.ndarray:
    """Sites of ``Q`` reachable from ``x`` by arrows that stay in ``Q``."""
    seen, _ = _cluster(env, Q, x)
    return seen.reshape(Q.shape)


def cluster_from_mask(omega1: np.ndarray, x_index: int, monotone: bool = True) -> np.ndarray:
    """Forward cluster for an explicit type-E mask (half-orthant arrows by default)."""
    om = np.ascontiguousarray(omega1, dtype=bool).ravel()
    plus = np.ones_like(om) if monotone else om.copy()
    seen, _ = _kernels.forward_reach(plus, ~om, np.asarray(omega1.shape, dtype=np.int64), x_index)
    return seen.reshape(omega1.shape)


def connects_to_down_set(env: EnvironmentField, R: Box, x: Sequence[int], target: Sequence[int]) -> tuple:
    """Whether ``x`` reaches ``target_- ∩ R`` inside ``R``.

    Returns ``(connected, path)`` where ``path`` is a BFS witness (or None).
    """
    x = R.check(x)
    seen, parent = _cluster(env, R, x)
    hits = np.flatnonzero(seen & down_cone(target, R).ravel())
    if hits.size == 0:
        return False, None
    depth = {-1: -1}

    def depth_of(k):
        chain = []
        while k not in depth:
            chain.append(k)
            k = int(parent[k])
        base = depth[k]
        for j in reversed(chain):
            base += 1
            depth[j] = base
        return base

    # shortest witness: the hit nearest the source in the search tree
    node = min((int(h) for h in hits), key=lambda h: (depth_of(h), h))
    rev = [node]
    while parent[node] >= 0:
        node = int(parent[node])
        rev.append(node)
    return True, LatticePath([R.point(k) for k in reversed(rev)])


def l_values(env: EnvironmentField, Q: Box, source: Sequence[int], axis: int) -> list:
    """Lowest cluster point on every axis-parallel line of ``Q``.

    The base point of each line has coordinate ``axis`` equal to that of
    ``source``; the value is the smallest offset ``k`` with ``base + k e_axis``
    in the cluster, or None when the line misses the cluster inside ``Q``.
    """
    source = Q.check(source)
    cl = forward_cluster(env, Q, source)
    moved = np.moveaxis(cl, axis, -1)
    first = np.argmax(moved, axis=-1)
    hit = moved.any(axis=-1)
    others = [k for k in range(Q.d) if k != axis]
    out = []
    for off in np.ndindex(*moved.shape[:-1]):
        base = [0] * Q.d
        for k, o in zip(others, off):
            base[k] = Q.lo[k] + o
        base[axis] = source[axis]
        val = int(Q.lo[axis] + first[off] - source[axis]) if hit[off] else None
        out.append(LValueRecord(tuple(base), axis, val))
    return out


def wn_se_path(
    env: EnvironmentField,
    start: Sequence[int],
    plane: tuple,
    variant: str,
    stop: Callable[[tuple], bool],
    budget: int = 10**6,
) -> LatticePath:
    """Greedy path in the coordinate plane ``(i, j)``.

    ``Wn`` steps ``-e_i`` whenever that arrow is present and ``+e_j``
    otherwise; ``Se`` steps ``-e_j`` whenever possible and ``+e_i``
    otherwise.  The field is evaluated lazily, so the path may leave the
    environment box.  The walk ends when ``stop`` holds; if the step budget
    runs out first the partial path is returned with ``ok=False``.
    """
    i, j = plane
    if i == j:
        raise ValueError("plane axes must differ")
    if variant not in ("Wn", "Se"):
        raise ValueError("variant must be 'Wn' or 'Se'")
    down, up = (i, j) if variant == "Wn" else (j, i)
    x = as_point(start, env.d)
    pts = [x]
    for _ in range(budget):
        if stop(x):
            return LatticePath(pts)
        if env.has_step(x, down, -1, check=False):
            x = step(x, down, -1)
        else:
            x = step(x, up, 1)
        pts.append(x)
    return LatticePath(pts, ok=stop(x))


def line_hit(env: EnvironmentField, u: Sequence[int], v: Sequence[int], j: int, budget: int = 10**6) -> LatticePath:
    """Staged greedy walk from ``u`` to a point ``v + k e_j``.

    Each axis ``i != j`` in turn is brought to ``v^i`` by a Wn walk in the
    plane ``(i, j)`` (when ``v^i`` is below) or an Se walk (when above).
    The final point of the returned path has the form ``v + k e_j``.
    """
    u = as_point(u, env.d)
    v = as_point(v, env.d)
    pts = [u]
    for i in range(env.d):
        if i == j:
            continue
        x = pts[-1]
        target = v[i]
        if x[i] == target:
            continue
        variant = "Wn" if target < x[i] else "Se"
        leg = wn_se_path(env, x, (i, j), variant, lambda y, i=i, t=target: y[i] == t, budget)
        pts.extend(leg.points[1:])
        if not leg.ok:
            return LatticePath(pts, ok=False)
    return LatticePath(pts)


def path_consistent(env: EnvironmentField, path: LatticePath) -> bool:
    """Every step of ``path`` uses an arrow present in ``env``."""
    for a, inc in zip(path.points, path.increments):
        nz = [k for k, c in enumerate(inc) if c != 0]
        if len(nz) != 1 or abs(inc[nz[0]]) != 1:
            return False
        if not env.has_step(a, nz[0], inc[nz[0]], check=False):
            return False
    return True


def write_path_csv(path: LatticePath, dest, env: EnvironmentField | None = None) -> Path:
    dest = Path(dest)
    with dest.open("w", newline="") as fh:
        if env is not None:
            fh.write(f"# model={env.spec.kind} d={env.spec.d} p={env.spec.p} q={env.spec.q} seed={env.seed}\n")
        w = csv.writer(fh)
        d = len(path.points[0]) if path.points else 0
        w.writerow([f"x{k + 1}" for k in range(d)])
        w.writerows(path.points)
    return dest
