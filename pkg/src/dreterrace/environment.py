"""Coupled random environments.

Every site ``x`` carries a uniform ``U_x`` computed by a counter-based hash
of ``(seed, x)``, so the field is defined on all of Z^d and any site can be
regenerated on its own.  A site is of type E (only the positive unit steps)
when ``U_x <= p``, and of type F otherwise.  With a common seed, raising
``p`` can only turn F sites into E sites.

Models
------
orthant
    E = positive steps, F = negative steps.
half_orthant
    E = positive steps, F = all 2d steps.
disturbed
    half-orthant, but sites of V_d use the threshold ``q``.
slab
    half-orthant on Z^d x {1, 2}, the last coordinate taking the values 1
    and 2.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .lattice import Box, VdLattice, as_point, shifted

MODELS = ("orthant", "half_orthant", "disturbed", "slab")
_MODEL_CODES = {name: k for k, name in enumerate(MODELS)}
MAGIC = b"DRE1"


class StepSet(str, enum.Enum):
    E = "E"
    F = "F"


@dataclass(frozen=True)
class ModelSpec:
    """Model kind, base dimension and parameters.

    For the slab model ``d`` is the dimension of the base lattice and the
    field lives in dimension ``d + 1``.
    """

    kind: str
    d: int
    p: float
    q: float | None = None

    def __post_init__(self):
        kind = {"half": "half_orthant"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in MODELS:
            raise ValueError(f"unknown model {self.kind!r}")
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        if kind == "disturbed":
            if self.q is None or not 0.0 <= self.q <= 1.0:
                raise ValueError("disturbed model needs q in [0, 1]")
        elif self.q is not None and self.q != self.p:
            raise ValueError(f"q is only meaningful for the disturbed model, got {kind}")

    @property
    def field_dim(self) -> int:
        return self.d + 1 if self.kind == "slab" else self.d

    @property
    def monotone(self) -> bool:
        """Whether every site has all positive unit steps."""
        return self.kind != "orthant"

    def with_p(self, p: float, q: float | None = None) -> "ModelSpec":
        if self.kind == "disturbed":
            return ModelSpec(self.kind, self.d, p, self.q if q is None else q)
        return ModelSpec(self.kind, self.d, p)


@dataclass(frozen=True)
class SlabBox:
    """A base box of Z^d stacked on the two layers 1 and 2."""

    base: Box

    @property
    def box(self) -> Box:
        return Box(self.base.lo + (1,), self.base.hi + (2,))

    @classmethod
    def cube(cls, n: int, d: int) -> "SlabBox":
        return cls(Box.cube(n, d))


def uniform(seed: int, x: Sequence[int]) -> float:
    """The coupled uniform attached to site ``x`` under ``seed``."""
    return float(_kernels.uniform_at(np.uint64(seed), np.asarray(x, dtype=np.int64)))


def trial_seed(base: int, t: int) -> int:
    """Seed of trial ``t`` derived from a base seed."""
    return int(_kernels.derive_seed(np.uint64(base), np.uint64(t)))


def uniform_field(seed: int, Q: Box) -> np.ndarray:
    """All uniforms of ``Q`` as an array shaped like the box."""
    arr = _kernels.uniform_box(
        np.uint64(seed), np.asarray(Q.lo, dtype=np.int64), np.asarray(Q.shape, dtype=np.int64)
    )
    return arr.reshape(Q.shape)


@dataclass(frozen=True)
class EnvironmentField:
    """An environment on a box: seed, model and optional forced sites.

    ``overrides`` maps points to ``True`` (type E) or ``False`` (type F).
    """

    box: Box
    seed: int
    spec: ModelSpec
    overrides: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.box.d != self.spec.field_dim:
            raise ValueError(
                f"box dimension {self.box.d} does not match model dimension {self.spec.field_dim}"
            )
        if self.spec.kind == "slab" and not (self.box.lo[-1] >= 1 and self.box.hi[-1] <= 2):
            raise ValueError("slab boxes must have last coordinate in {1, 2}")
        clean = {}
        for x, v in dict(self.overrides).items():
            clean[self.box.check(x)] = _as_bool_state(v)
        object.__setattr__(self, "overrides", clean)
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def d(self) -> int:
        return self.box.d

    def _vd(self) -> VdLattice | None:
        if self.spec.kind == "disturbed":
            return VdLattice.of(self.spec.d)
        return None

    def uniform(self, x: Sequence[int]) -> float:
        return uniform(self.seed, as_point(x, self.d))

    def omega1_at(self, x: Sequence[int], check: bool = True) -> bool:
        """Whether ``x`` is of type E.  ``check=False`` evaluates off the box."""
        x = self.box.check(x) if check else as_point(x, self.d)
        if x in self.overrides:
            return self.overrides[x]
        thr = self.spec.p
        vd = self._vd()
        if vd is not None and vd.contains(x):
            thr = self.spec.q
        return self.uniform(x) <= thr

    def has_step(self, x: Sequence[int], i: int, sign: int, check: bool = True) -> bool:
        """Whether the arrow ``x -> x + sign e_i`` is present."""
        e = self.omega1_at(x, check)
        if sign > 0:
            return e or self.spec.monotone
        return not e

    def thresholds(self, Q: Box) -> np.ndarray:
        thr = np.full(Q.shape, self.spec.p)
        vd = self._vd()
        if vd is not None:
            thr[vd.mask(Q)] = self.spec.q
        return thr

    def omega_mask(self, Q: Box | None = None) -> np.ndarray:
        """Mask of type-E sites of ``Q`` (default: the whole box)."""
        Q = self.box if Q is None else Q
        if not self.box.contains_box(Q):
            raise ValueError("Q is not contained in the environment box")
        mask = uniform_field(self.seed, Q) <= self.thresholds(Q)
        for x, v in self.overrides.items():
            if Q.contains(x):
                mask[Q.local(x)] = v
        return mask

    def arrows(self, Q: Box | None = None) -> tuple:
        """Flat ``(plus, minus)`` arrow flags of the sites of ``Q``."""
        om = self.omega_mask(Q).ravel()
        if self.spec.monotone:
            return np.ones_like(om), ~om
        return om.copy(), ~om


def _as_bool_state(v) -> bool:
    if isinstance(v, StepSet):
        return v is StepSet.E
    if isinstance(v, str):
        return StepSet(v) is StepSet.E
    return bool(v)


def site_config(env: EnvironmentField, x: Sequence[int]) -> StepSet:
    return StepSet.E if env.omega1_at(x) else StepSet.F


def omega_mask(env: EnvironmentField, Q: Box | None = None) -> np.ndarray:
    return env.omega_mask(Q)


def force_config(env: EnvironmentField, overrides: Mapping) -> EnvironmentField:
    """A copy of ``env`` with the given sites forced to E (True) or F (False)."""
    merged = dict(env.overrides)
    for x, v in dict(overrides).items():
        merged[env.box.check(x)] = _as_bool_state(v)
    return EnvironmentField(env.box, env.seed, env.spec, merged)


def from_mask(omega1: np.ndarray, Q: Box, spec: ModelSpec, seed: int = 0) -> EnvironmentField:
    """An environment whose type-E sites are exactly ``omega1``."""
    base = EnvironmentField(Q, seed, spec)
    raw = base.omega_mask()
    diff = np.argwhere(raw != omega1)
    return EnvironmentField(
        Q, seed, spec, {tuple(int(c) + a for c, a in zip(off, Q.lo)): bool(omega1[tuple(off)]) for off in diff}
    )


def derive_eta_zeta(slab_env: EnvironmentField, region: Box) -> tuple:
    """Layer-1 environments built from a two-layer slab.

    A site ``x`` of ``region`` (a box of the base lattice) is E in the first
    environment iff ``(x, 1)`` is E and at least one of ``(x, 2)`` and
    ``(x - e_j, 2)`` is E.  The second environment uses that rule on V_d
    sites and the raw layer-1 type elsewhere.

    Returns the two masks over ``region``.
    """
    if slab_env.spec.kind != "slab":
        raise ValueError("derive_eta_zeta needs a slab environment")
    d = slab_env.spec.d
    if region.d != d:
        raise ValueError("region must live in the base lattice")
    grown = Box(tuple(a - 1 for a in region.lo), region.hi)
    layer1 = Box(region.lo + (1,), region.hi + (1,))
    layer2 = Box(grown.lo + (2,), grown.hi + (2,))
    if not (slab_env.box.contains_box(layer1) and slab_env.box.contains_box(layer2)):
        raise ValueError("slab box must extend one step below the region in every base direction")
    lower = slab_env.omega_mask(layer1)[..., 0]
    upper = slab_env.omega_mask(layer2)[..., 0]
    inner = tuple(slice(1, None) for _ in range(d))
    any_up = upper[inner].copy()
    for j in range(d):
        any_up |= shifted(upper, j, 1)[inner]
    eta = lower & any_up
    vd = VdLattice.of(d).mask(region)
    zeta = np.where(vd, eta, lower)
    return eta, zeta


def write_snapshot(env: EnvironmentField, path, Q: Box | None = None) -> Path:
    """Write the type-E mask of ``Q`` as a packed binary snapshot."""
    Q = env.box if Q is None else Q
    mask = env.omega_mask(Q)
    q = env.spec.q if env.spec.q is not None else env.spec.p
    head = MAGIC + struct.pack("<I", Q.d)
    head += struct.pack(f"<{Q.d}q", *Q.lo) + struct.pack(f"<{Q.d}q", *Q.hi)
    head += struct.pack("<QBdd", env.seed, _MODEL_CODES[env.spec.kind], env.spec.p, q)
    path = Path(path)
    path.write_bytes(head + np.packbits(mask.ravel(), bitorder="big").tobytes())
    return path


def read_snapshot(path) -> dict:
    """Inverse of :func:`write_snapshot`."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not a DRE1 snapshot")
    (d,) = struct.unpack_from("<I", raw, 4)
    off = 8
    lo = struct.unpack_from(f"<{d}q", raw, off)
    off += 8 * d
    hi = struct.unpack_from(f"<{d}q", raw, off)
    off += 8 * d
    seed, code, p, q = struct.unpack_from("<QBdd", raw, off)
    off += struct.calcsize("<QBdd")
    box = Box(lo, hi)
    bits = np.unpackbits(np.frombuffer(raw[off:], dtype=np.uint8), count=box.size, bitorder="big")
    return {
        "box": box,
        "seed": seed,
        "model": MODELS[code],
        "p": p,
        "q": q,
        "omega1": bits.astype(bool).reshape(box.shape),
    }
