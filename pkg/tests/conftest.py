"""Brute-force oracles shared by the tests.

These are deliberately naive and pure Python: points are tuples, sets are
Python sets, and reachability is a fixed-point iteration over the arrow
relation.  None of them calls into the library's kernels.
"""

import itertools

import numpy as np
import pytest


def box_points(lo, hi):
    return list(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))))


def in_box(x, lo, hi):
    return all(a <= c <= b for c, a, b in zip(x, lo, hi))


def geq(y, x):
    return all(b >= a for a, b in zip(x, y))


def shift(x, i, k):
    y = list(x)
    y[i] += k
    return tuple(y)


def closure_oracle(A, lo, hi):
    """Union of up-cones of ``A`` intersected with the box."""
    return {y for y in box_points(lo, hi) if any(geq(y, a) for a in A)}


def lambda_oracle(G, lo, hi):
    d = len(lo)
    return {
        x for x in G
        if any(in_box(shift(x, i, -1), lo, hi) and shift(x, i, -1) not in G for i in range(d))
    }


def arrows_oracle(x, E, d, monotone=True):
    """Targets of the arrows out of ``x`` (E sites: plus steps only)."""
    out = []
    for i in range(d):
        if monotone or x in E:
            out.append(shift(x, i, 1))
        if x not in E:
            out.append(shift(x, i, -1))
    return out


def cluster_oracle(E, lo, hi, src, monotone=True):
    """Reflexive-transitive closure of the arrow relation, by fixed point."""
    d = len(lo)
    reached = {src}
    while True:
        new = {
            y for x in reached for y in arrows_oracle(x, E, d, monotone)
            if in_box(y, lo, hi)
        } - reached
        if not new:
            return reached
        reached |= new


def connects_oracle(E, N, M, d):
    lo, hi = (-N,) * d, (N,) * d
    cl = cluster_oracle(E, lo, hi, (0,) * d)
    return any(all(c <= -M for c in y) for y in cl)


def pivotal_oracle(E, N, M, d):
    """Two-sided per-site recomputation of the pivotal set."""
    out = set()
    for u in box_points((-N,) * d, (N,) * d):
        if connects_oracle(E | {u}, N, M, d):
            continue
        if connects_oracle(E - {u}, N, M, d):
            out.add(u)
    return out


def mask_to_set(mask, lo):
    return {tuple(int(c) + a for c, a in zip(idx, lo)) for idx in np.argwhere(mask)}


def set_to_mask(S, lo, hi):
    shape = tuple(b - a + 1 for a, b in zip(lo, hi))
    m = np.zeros(shape, dtype=bool)
    for x in S:
        m[tuple(c - a for c, a in zip(x, lo))] = True
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
