"""Randomized self-checks behind ``dreterrace validate``.

Each suite draws ``cases`` random instances from a seeded generator,
compares the library against a direct recomputation and returns a
:class:`SuiteResult`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .enhancement import critical_instance, find_pivotal, local_modify, verify_certificate
from .environment import EnvironmentField, ModelSpec
from .lattice import Box, VdLattice, leq, step, up_set_closure
from .terrace import (
    TerraceError,
    corner_mask,
    delete_h_corners,
    extract_terrace,
    h_mask,
    lambda_q,
    stabilize,
    trichotomy,
)

SUITES = ("geometry", "terrace", "pivotal", "modify")


@dataclass
class SuiteResult:
    suite: str
    cases: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def line(self) -> str:
        state = "PASS" if self.ok else "FAIL"
        return f"{state} {self.suite}: {self.cases - len(self.failures)}/{self.cases}"


def _brute_closure(A: np.ndarray, Q: Box) -> np.ndarray:
    pts = Q.members(A)
    out = np.zeros(Q.shape, dtype=bool)
    for y in Q.points():
        out[Q.local(y)] = any(leq(a, y) for a in pts)
    return out


def _brute_lambda(G: np.ndarray, Q: Box) -> np.ndarray:
    out = np.zeros(Q.shape, dtype=bool)
    for y in Q.members(G):
        out[Q.local(y)] = any(
            Q.contains(step(y, i, -1)) and not G[Q.local(step(y, i, -1))] for i in range(Q.d)
        )
    return out


def check_geometry(cases: int, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("geometry", cases)
    for c in range(cases):
        d = int(rng.integers(1, 4))
        lo = tuple(int(v) for v in rng.integers(-3, 3, d))
        Q = Box(lo, tuple(a + int(rng.integers(0, 4)) for a in lo))
        A = rng.random(Q.shape) < rng.uniform(0.05, 0.5)
        G = up_set_closure(A, Q)
        if not np.array_equal(G, _brute_closure(A, Q)):
            res.failures.append((c, "closure"))
        elif not np.array_equal(lambda_q(G, Q).sites, _brute_lambda(G, Q)):
            res.failures.append((c, "lambda"))
    return res


def check_terrace(cases: int, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("terrace", cases)
    for c in range(cases):
        d = int(rng.integers(2, 4))
        p = float(rng.choice([0.3, 0.6, 0.9]))
        n = int(rng.integers(3, 7 if d == 2 else 5))
        Q = Box.cube(n, d)
        env = EnvironmentField(Q, int(rng.integers(2**62)), ModelSpec("half_orthant", d, p))
        try:
            t = extract_terrace(env, Q, (0,) * d)
            trichotomy(t, (0,) * d)
            if t is None:
                continue
            inner = Box.cube(n - 1, d)
            s = stabilize(t, inner)
            if np.any(corner_mask(s.up)[inner.slices_in(Q)][(slice(1, -1),) * d]):
                res.failures.append((c, "corner left after stabilize"))
            h = delete_h_corners(t, (0,) * d)
            stray = h_mask(h.sites) & ~up_set_closure(Q.mask([(0,) * d]), Q)
            if stray.any():
                res.failures.append((c, "H outside the apex cone"))
        except (TerraceError, ValueError) as err:
            res.failures.append((c, repr(err)))
    return res


def check_pivotal(cases: int, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("pivotal", cases)
    for c in range(cases):
        d = int(rng.integers(2, 4))
        N = int(rng.integers(2, 5 if d == 2 else 3))
        M = int(rng.integers(1, N))
        R = Box.cube(N, d)
        om = rng.random(R.shape) < rng.uniform(0.1, 0.9)
        a = find_pivotal(om, M, R, mode="fast").mask
        b = find_pivotal(om, M, R, mode="naive").mask
        if not np.array_equal(a, b):
            res.failures.append((c, "fast and naive differ"))
    return res


def check_modify(cases: int, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("modify", cases)
    done = 0
    for s in itertools.count():
        if done >= cases:
            break
        d = 2 if s % 2 == 0 else 3
        n = VdLattice.of(d).rho + 5
        M = n + 1 + int(rng.integers(0, 3))
        N = M + 1 + int(rng.integers(0, n + 3))
        R = Box.cube(N, d)
        om, _ = critical_instance(d, N, M, seed * 1_000_003 + s)
        off = find_pivotal(om, M, R).off_vd
        if not off:
            continue
        u = off[int(rng.integers(len(off)))]
        cert = local_modify(om, u, n, M, R)
        again = verify_certificate(om, R, M, cert)
        if not cert.ok or not all(again.values()):
            res.failures.append((s, cert.first_failure))
        done += 1
    return res


def run_suite(name: str, cases: int, seed: int = 0) -> SuiteResult:
    runner = {
        "geometry": check_geometry,
        "terrace": check_terrace,
        "pivotal": check_pivotal,
        "modify": check_modify,
    }.get(name)
    if runner is None:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    return runner(cases, seed)
