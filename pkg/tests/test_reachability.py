import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cluster_oracle, mask_to_set
from dreterrace.environment import EnvironmentField, ModelSpec, force_config, from_mask
from dreterrace.lattice import Box, is_solid_above, leq, up_cone
from dreterrace.reachability import (
    cluster_from_mask,
    connects_to_down_set,
    forward_cluster,
    l_values,
    line_hit,
    path_consistent,
    wn_se_path,
    write_path_csv,
)
from dreterrace.terrace import extract_terrace


def env(p, d=2, n=4, seed=0, kind="half_orthant"):
    return EnvironmentField(Box.cube(n, d), seed, ModelSpec(kind, d, p))


def test_cluster_extremes():
    e = env(0.0)
    assert forward_cluster(e, e.box, (1, 2)).all()
    e = env(1.0)
    assert np.array_equal(forward_cluster(e, e.box, (1, -2)), up_cone((1, -2), e.box))


def test_cluster_corner_example():
    Q = Box((0, 0), (1, 1))
    e = EnvironmentField(Q, 0, ModelSpec("half_orthant", 2, 1.0))
    assert Q.members(forward_cluster(e, Q, (1, 1))) == [(1, 1)]


def test_cluster_rejects_outside_source():
    e = env(0.5)
    with pytest.raises(ValueError):
        forward_cluster(e, e.box, (9, 0))


def test_cluster_in_sub_box_stays_inside():
    e = env(0.5, n=6, seed=3)
    Q = Box((-2, -3), (4, 2))
    cl = forward_cluster(e, Q, (0, 0))
    E = mask_to_set(e.omega_mask(Q), Q.lo)
    assert mask_to_set(cl, Q.lo) == cluster_oracle(E, Q.lo, Q.hi, (0, 0))


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["orthant", "half_orthant", "disturbed"]),
    st.integers(2, 3),
    st.floats(0.05, 0.95),
    st.integers(0, 2**62),
)
def test_cluster_matches_oracle(kind, d, p, seed):
    spec = ModelSpec(kind, d, p, p / 2 if kind == "disturbed" else None)
    Q = Box.cube(3 if d == 2 else 2, d)
    e = EnvironmentField(Q, seed, spec)
    E = mask_to_set(e.omega_mask(), Q.lo)
    x = (0,) * d
    got = mask_to_set(forward_cluster(e, Q, x), Q.lo)
    assert got == cluster_oracle(E, Q.lo, Q.hi, x, monotone=spec.monotone)
    if spec.monotone:
        assert is_solid_above(forward_cluster(e, Q, x))


def test_cluster_from_mask_agrees(rng):
    Q = Box.cube(3, 2)
    for _ in range(50):
        om = rng.random(Q.shape) < 0.5
        e = from_mask(om, Q, ModelSpec("half_orthant", 2, 0.5))
        k = int(rng.integers(Q.size))
        assert np.array_equal(cluster_from_mask(om, k), forward_cluster(e, Q, Q.point(k)))


def test_connects_examples():
    e = env(0.4, seed=2)
    ok, path = connects_to_down_set(e, e.box, (1, 1), (1, 1))
    assert ok and path.points == [(1, 1)]
    e = env(1.0)
    ok, path = connects_to_down_set(e, e.box, (0, 0), (0, -1))
    assert not ok and path is None


@pytest.mark.parametrize("seed", range(20))
def test_connects_witness_is_a_valid_path(seed):
    e = env(0.45, n=6, seed=seed)
    ok, path = connects_to_down_set(e, e.box, (0, 0), (-3, -3))
    E = mask_to_set(e.omega_mask(), e.box.lo)
    cl = cluster_oracle(E, e.box.lo, e.box.hi, (0, 0))
    assert ok == any(leq(y, (-3, -3)) for y in cl)
    if ok:
        assert path.points[0] == (0, 0) and leq(path.points[-1], (-3, -3))
        assert path.is_nearest_neighbour() and path_consistent(e, path)
        assert all(e.box.contains(x) for x in path.points)


def test_l_values_examples():
    e = env(0.0, n=3)
    recs = l_values(e, e.box, (1, 1), 0)
    assert all(r.found and r.value == -3 - 1 for r in recs)
    e = env(0.6, n=5, seed=9)
    recs = l_values(e, e.box, (0, 0), 1)
    assert [r.value for r in recs if r.base == (0, 0)][0] <= 0


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_l_values_match_mask(axis):
    e = env(0.5, d=3, n=3, seed=axis)
    src = (0, 1, -1)
    cl = forward_cluster(e, e.box, src)
    for r in l_values(e, e.box, src, axis):
        line = [tuple(b + (k if j == axis else 0) for j, b in enumerate(r.base)) for k in range(-8, 8)]
        hits = [k for k, y in zip(range(-8, 8), line) if e.box.contains(y) and cl[e.box.local(y)]]
        if r.found:
            assert hits and r.value == min(hits)
            below = tuple(c - (j == axis) for j, c in enumerate(r.base))
            below = tuple(b + (r.value if j == axis else 0) for j, b in enumerate(below))
            assert not (e.box.contains(below) and cl[e.box.local(below)])
        else:
            assert not hits


def test_wn_paths_extremes():
    e = env(0.0, n=10)
    p = wn_se_path(e, (0, 0), (0, 1), "Wn", lambda x: x[0] == -5)
    assert p.points == [(-k, 0) for k in range(6)]
    e = env(1.0, n=10)
    p = wn_se_path(e, (0, 0), (0, 1), "Wn", lambda x: x[1] == 4)
    assert p.points == [(0, k) for k in range(5)]


def test_wn_budget_and_errors():
    e = env(1.0)
    p = wn_se_path(e, (0, 0), (0, 1), "Wn", lambda x: False, budget=10)
    assert not p.ok and len(p) == 11
    with pytest.raises(ValueError):
        wn_se_path(e, (0, 0), (1, 1), "Wn", lambda x: True)
    with pytest.raises(ValueError):
        wn_se_path(e, (0, 0), (0, 1), "Nw", lambda x: True)


@pytest.mark.parametrize("seed", range(30))
def test_line_hit_staged(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    e = EnvironmentField(Box.cube(2, d), seed, ModelSpec("half_orthant", d, 0.5))
    u = tuple(int(v) for v in rng.integers(-5, 0, d))
    v = tuple(int(c + rng.integers(0, 6)) for c in u)
    j = int(rng.integers(d))
    path = line_hit(e, u, v, j)
    assert path.ok
    end = path.points[-1]
    assert all(end[i] == v[i] for i in range(d) if i != j)
    assert end[j] - v[j] <= 0
    assert path_consistent(e, path)


def test_write_path_csv(tmp_path):
    e = env(0.3, seed=1)
    _, path = connects_to_down_set(e, e.box, (0, 0), (0, 0))
    dest = write_path_csv(path, tmp_path / "p.csv", e)
    lines = dest.read_text().splitlines()
    assert lines[0].startswith("# model=half_orthant")
    assert lines[1] == "x1,x2" and lines[2] == "0,0"


@pytest.mark.parametrize("seed", range(40))
def test_terrace_blocks_cluster(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    e = EnvironmentField(Box.cube(3, d), seed, ModelSpec("half_orthant", d, float(rng.choice([0.6, 0.9]))))
    Q = e.box
    x = (0,) * d
    t = extract_terrace(e, Q, x)
    if t is None:
        return
    cl = forward_cluster(e, Q, x)
    # every site below the terrace is unreachable from any site above it
    assert not np.any(cl & ~t.up)
    for z in Q.members(t.up)[:5]:
        assert not np.any(forward_cluster(e, Q, z) & ~t.up)


@pytest.mark.parametrize("seed", range(30))
def test_blocking_is_increasing(seed):
    rng = np.random.default_rng(seed)
    e = EnvironmentField(Box.cube(4, 2), seed, ModelSpec("half_orthant", 2, 0.5))
    Q = e.box
    y = (-2, -2)
    base = forward_cluster(e, Q, (0, 0))
    for z in Q.members(~e.omega_mask())[:8]:
        flipped = force_config(e, {z: True})
        cl = forward_cluster(flipped, Q, (0, 0))
        assert not np.any(cl & ~base)
        ok_before, _ = connects_to_down_set(e, Q, (0, 0), y)
        ok_after, _ = connects_to_down_set(flipped, Q, (0, 0), y)
        assert ok_after <= ok_before
