"""Integer lattice geometry: points, boxes, cones, boundaries and V_d.

Subsets of a box are boolean arrays shaped like the box, indexed in
row-major order from the lower corner.  A point is a tuple of ints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_DIM = 16

Point = tuple


def as_point(x: Iterable[int], d: int | None = None) -> tuple:
    """Convert ``x`` to a tuple of Python ints, checking the dimension."""
    pt = tuple(int(c) for c in x)
    if d is not None and len(pt) != d:
        raise ValueError(f"point {pt} has dimension {len(pt)}, expected {d}")
    if not 1 <= len(pt) <= MAX_DIM:
        raise ValueError(f"dimension {len(pt)} outside [1, {MAX_DIM}]")
    return pt


def unit(i: int, d: int) -> tuple:
    """The i-th canonical basis vector (0-based axis)."""
    return tuple(1 if k == i else 0 for k in range(d))


def origin(d: int) -> tuple:
    return (0,) * d


def add(x: Sequence[int], y: Sequence[int]) -> tuple:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Sequence[int], y: Sequence[int]) -> tuple:
    return tuple(a - b for a, b in zip(x, y))


def step(x: Sequence[int], i: int, k: int = 1) -> tuple:
    """``x + k e_i``."""
    out = list(x)
    out[i] += k
    return tuple(out)


def leq(x: Sequence[int], y: Sequence[int]) -> bool:
    """Componentwise order, i.e. ``y`` lies in the up-cone of ``x``."""
    return all(a <= b for a, b in zip(x, y))


@dataclass(frozen=True)
class Box:
    """The box ``[lo, hi]`` of lattice points between two corners."""

    lo: tuple
    hi: tuple
    _shape: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi, len(lo))
        if not leq(lo, hi):
            raise ValueError(f"empty box: {lo} is not below {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "_shape", tuple(b - a + 1 for a, b in zip(lo, hi)))

    @classmethod
    def cube(cls, n: int, d: int, center: Sequence[int] | None = None) -> "Box":
        """``center + [-n 1, n 1]``."""
        c = origin(d) if center is None else as_point(center, d)
        return cls(tuple(a - n for a in c), tuple(a + n for a in c))

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return self._shape

    @property
    def size(self) -> int:
        return math.prod(self._shape)

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and leq(self.lo, x) and leq(x, self.hi)

    def contains_box(self, other: "Box") -> bool:
        return self.contains(other.lo) and self.contains(other.hi)

    def check(self, x: Sequence[int]) -> tuple:
        pt = as_point(x, self.d)
        if not self.contains(pt):
            raise ValueError(f"point {pt} outside box {self.lo}..{self.hi}")
        return pt

    def index(self, x: Sequence[int]) -> int:
        """Row-major flat index of ``x``."""
        pt = self.check(x)
        return int(np.ravel_multi_index(sub(pt, self.lo), self._shape))

    def local(self, x: Sequence[int]) -> tuple:
        """Array index of ``x`` (offset from the lower corner)."""
        return sub(self.check(x), self.lo)

    def point(self, flat: int) -> tuple:
        return add((int(c) for c in np.unravel_index(int(flat), self._shape)), self.lo)

    def points(self) -> Iterator[tuple]:
        for off in np.ndindex(*self._shape):
            yield add(off, self.lo)

    def coords(self) -> np.ndarray:
        """Array of shape ``(size, d)`` listing all points in row-major order."""
        grids = np.indices(self._shape).reshape(self.d, -1).T
        return grids + np.asarray(self.lo, dtype=np.int64)

    def intersect(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        return Box(lo, hi) if leq(lo, hi) else None

    def slices_in(self, outer: "Box") -> tuple:
        """Slices selecting this box inside an array shaped like ``outer``."""
        if not outer.contains_box(self):
            raise ValueError("box is not contained in the outer box")
        return tuple(slice(a - c, b - c + 1) for a, b, c in zip(self.lo, self.hi, outer.lo))

    def mask(self, points: Iterable[Sequence[int]]) -> np.ndarray:
        """Boolean mask of the given points; every point must lie in the box."""
        out = np.zeros(self._shape, dtype=bool)
        for x in points:
            out[self.local(x)] = True
        return out

    def members(self, mask: np.ndarray) -> list:
        """Points flagged by ``mask``, in row-major order."""
        return [add(tuple(int(c) for c in off), self.lo) for off in np.argwhere(mask)]


def up_cone(z: Sequence[int], Q: Box) -> np.ndarray:
    """Mask of ``z_+ ∩ Q``."""
    z = as_point(z, Q.d)
    out = np.zeros(Q.shape, dtype=bool)
    sl = []
    for a, b, c in zip(Q.lo, Q.hi, z):
        if c > b:
            return out
        sl.append(slice(max(c, a) - a, None))
    out[tuple(sl)] = True
    return out


def down_cone(z: Sequence[int], Q: Box) -> np.ndarray:
    """Mask of ``z_- ∩ Q``."""
    z = as_point(z, Q.d)
    out = np.zeros(Q.shape, dtype=bool)
    sl = []
    for a, b, c in zip(Q.lo, Q.hi, z):
        if c < a:
            return out
        sl.append(slice(0, min(c, b) - a + 1))
    out[tuple(sl)] = True
    return out


def up_set_closure(A, Q: Box) -> np.ndarray:
    """``A_+ ∩ Q`` for a mask or an iterable of points of ``Q``.

    A prefix-OR along each axis in turn adds exactly the points that
    dominate some member of ``A``.
    """
    if isinstance(A, np.ndarray):
        if A.shape != Q.shape:
            raise ValueError(f"mask shape {A.shape} does not match box {Q.shape}")
        out = A.astype(bool, copy=True)
    else:
        out = Q.mask(A)
    for axis in range(Q.d):
        np.logical_or.accumulate(out, axis=axis, out=out)
    return out


def down_set_closure(A: np.ndarray) -> np.ndarray:
    out = np.asarray(A, dtype=bool)[tuple(slice(None, None, -1) for _ in A.shape)]
    out = out.copy()
    for axis in range(out.ndim):
        np.logical_or.accumulate(out, axis=axis, out=out)
    return out[tuple(slice(None, None, -1) for _ in A.shape)]


def is_solid_above(A: np.ndarray) -> bool:
    """True iff ``A`` is closed under +e_i steps that stay in its box."""
    A = np.asarray(A, dtype=bool)
    for axis in range(A.ndim):
        lower = [slice(None)] * A.ndim
        upper = [slice(None)] * A.ndim
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        if np.any(A[tuple(lower)] & ~A[tuple(upper)]):
            return False
    return True


def shifted(mask: np.ndarray, axis: int, k: int, fill: bool = False) -> np.ndarray:
    """``out[x] = mask[x - k e_axis]``, with ``fill`` where that falls outside."""
    out = np.full(mask.shape, fill, dtype=bool)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if k > 0:
        src[axis] = slice(None, -k)
        dst[axis] = slice(k, None)
    elif k < 0:
        src[axis] = slice(-k, None)
        dst[axis] = slice(None, k)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def relative_boundary(Q: Box, R: Box) -> tuple:
    """Split ``Q`` into the sites adjacent to ``R∖Q`` and the rest.

    Returns ``(boundary, interior)`` as masks shaped like ``Q``.
    """
    if not R.contains_box(Q):
        raise ValueError("Q is not contained in R")
    boundary = np.zeros(Q.shape, dtype=bool)
    for i in range(Q.d):
        if Q.lo[i] > R.lo[i]:
            idx = [slice(None)] * Q.d
            idx[i] = 0
            boundary[tuple(idx)] = True
        if Q.hi[i] < R.hi[i]:
            idx = [slice(None)] * Q.d
            idx[i] = -1
            boundary[tuple(idx)] = True
    return boundary, ~boundary


def embed(mask: np.ndarray, inner: Box, outer: Box) -> np.ndarray:
    """Place a mask over ``inner`` into an all-False mask over ``outer``."""
    out = np.zeros(outer.shape, dtype=bool)
    out[inner.slices_in(outer)] = mask
    return out


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, math.isqrt(n) + 1))


def smallest_prime_above(m: int) -> int:
    n = m + 1
    while not _is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class VdLattice:
    """The sub-lattice ``{x : h(x) ≡ 0 mod rho}`` used for enhancement sites.

    ``h`` weights coordinate ``2i-1`` by ``+i`` and coordinate ``2i`` by
    ``-i`` (1-based), and ``rho`` is the smallest prime above
    ``2 ceil(d/2)``.
    """

    d: int
    rho: int
    coeffs: tuple

    @classmethod
    def of(cls, d: int) -> "VdLattice":
        if not 1 <= d <= MAX_DIM:
            raise ValueError(f"dimension {d} outside [1, {MAX_DIM}]")
        coeffs = tuple((k // 2 + 1) * (1 if k % 2 == 0 else -1) for k in range(d))
        return cls(d, smallest_prime_above(2 * math.ceil(d / 2)), coeffs)

    def h(self, x: Sequence[int]) -> int:
        x = as_point(x, self.d)
        return sum(c * v for c, v in zip(self.coeffs, x))

    def contains(self, x: Sequence[int]) -> bool:
        return self.h(x) % self.rho == 0

    def mask(self, Q: Box) -> np.ndarray:
        if Q.d != self.d:
            raise ValueError("dimension mismatch")
        h = np.zeros(Q.shape, dtype=np.int64)
        for i, c in enumerate(self.coeffs):
            ax = np.arange(Q.lo[i], Q.hi[i] + 1, dtype=np.int64) * c
            h = h + ax.reshape([-1 if k == i else 1 for k in range(Q.d)])
        return np.mod(h, self.rho) == 0


def vd_contains(V: VdLattice, x: Sequence[int]) -> bool:
    if len(x) != V.d:
        raise ValueError("dimension mismatch")
    return V.contains(x)
