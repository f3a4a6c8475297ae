import json

import numpy as np
import pytest

from conftest import connects_oracle, mask_to_set
from dreterrace.enhancement import f_disturbance, trial_seeds
from dreterrace.environment import EnvironmentField, ModelSpec
from dreterrace.experiments import (
    ExperimentGeometry,
    blocked_indicators,
    blocking_curve,
    bootstrap_ci,
    content_hash,
    crossing_from_curve,
    disturbed_curve,
    estimate_beta,
    estimate_theta_proxy,
    export_surface,
    make_grid,
    ordered_within_ci,
    scan_critical,
    scan_summary,
    slab_scan,
    strictly_below,
    threshold_counts,
    write_csv,
    write_manifest,
)
from dreterrace.lattice import Box
from dreterrace.terrace import read_ply

HALF = ModelSpec("half_orthant", 2, 0.5)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ExperimentGeometry(2, 3, 3)
    with pytest.raises(ValueError):
        ExperimentGeometry(2, 3, 0)
    with pytest.raises(ValueError):
        ExperimentGeometry(2, 5, 2, trials=0)
    with pytest.raises(ValueError):
        ExperimentGeometry(2, 20, 10, n=7)  # n must exceed rho + 4
    ExperimentGeometry(2, 20, 10, n=8)


def test_beta_extremes():
    g = ExperimentGeometry(2, 5, 2, trials=50)
    assert estimate_beta(HALF, g, 1.0).value == 1.0
    assert estimate_beta(HALF, g, 0.0).value == 0.0
    assert estimate_theta_proxy(HALF, g, 0.0).value == 1.0
    assert estimate_theta_proxy(HALF, g, 1.0).value == 0.0


@pytest.mark.parametrize("kind,p", [("half_orthant", 0.5), ("half_orthant", 0.62), ("disturbed", 0.55)])
def test_beta_matches_oracle(kind, p):
    spec = ModelSpec(kind, 2, p, p - 0.1 if kind == "disturbed" else None)
    g = ExperimentGeometry(2, 3, 1, trials=80, seed=4)
    got = blocked_indicators(spec, g, [spec.p], [spec.q if spec.q is not None else p])[:, 0]
    for t, s in enumerate(trial_seeds(4, 80)):
        env = EnvironmentField(Box.cube(3, 2), int(s), spec)
        E = mask_to_set(env.omega_mask(), env.box.lo)
        assert bool(got[t]) == (not connects_oracle(E, 3, 1, 2))


def test_beta_monotone_in_box():
    # larger target offset blocks more, larger box blocks less (same seeds)
    a = blocked_indicators(HALF, ExperimentGeometry(2, 8, 2, trials=300), [0.55])
    b = blocked_indicators(HALF, ExperimentGeometry(2, 8, 4, trials=300), [0.55])
    c = blocked_indicators(HALF, ExperimentGeometry(2, 10, 4, trials=300), [0.55])
    assert np.all(a <= b)
    assert np.all(c <= b)


def test_blocked_indicators_monotone_in_p():
    g = ExperimentGeometry(2, 6, 2, trials=200)
    ps = np.linspace(0, 1, 11)
    ind = blocked_indicators(HALF, g, ps)
    assert np.all(np.diff(ind.astype(int), axis=1) >= 0)


def test_threshold_counts_agree_with_indicators():
    g = ExperimentGeometry(2, 6, 2, trials=200, seed=3)
    grid = np.linspace(0.3, 0.8, 11)
    counts = threshold_counts("half_orthant", g, grid)
    ind = blocked_indicators(HALF, g, grid)
    assert np.array_equal(blocking_curve(counts, len(grid)), ind.mean(axis=0))
    with pytest.raises(ValueError):
        threshold_counts("half_orthant", g, grid[::-1])


def test_crossing_examples():
    grid = np.array([0.0, 1.0])
    assert crossing_from_curve(grid, np.array([0.0, 1.0])) == (0.5, (0.0, 1.0))
    est, br = crossing_from_curve(np.array([0.1, 0.2, 0.3]), np.array([0.2, 0.4, 0.9]))
    assert est == pytest.approx(0.22) and br == (0.2, 0.3)
    with pytest.raises(ValueError):
        crossing_from_curve(grid, np.array([0.6, 0.9]))


def test_make_grid():
    g = make_grid((0.2, 0.3), 0.01)
    assert len(g) == 11 and g[0] == 0.2 and g[-1] == 0.3
    with pytest.raises(ValueError):
        make_grid((0.5, 0.5), 0.1)
    with pytest.raises(ValueError):
        make_grid((0.1, 0.5), 0)


def test_scan_and_bootstrap():
    g = ExperimentGeometry(2, 8, 3, trials=400, seed=1)
    res = scan_critical("half_orthant", g, tol=0.02, reps=300)
    assert res.bracket[0] <= res.crossing <= res.bracket[1]
    assert res.ci[0] <= res.crossing <= res.ci[1]
    assert res.bracket[1] - res.bracket[0] <= 0.02 + 1e-12
    assert ordered_within_ci(res, res) and not strictly_below(res, res)
    summary = scan_summary(res)
    assert summary["label"] == "finite-box half-crossing" and summary["trials"] == 400
    again = bootstrap_ci(res.counts, res.grid, reps=300, seed=1)
    assert again == res.ci


def test_scan_rejects_bad_rules():
    g = ExperimentGeometry(2, 5, 2, trials=20)
    with pytest.raises(ValueError):
        scan_critical("half_orthant", g, tol=0.1, q_rule="f")
    with pytest.raises(ValueError):
        scan_critical("disturbed", g, tol=0.1, q_rule="other")
    with pytest.raises(ValueError):
        scan_critical("orthant", g, tol=0.1)


def test_disturbed_curve_below_undisturbed():
    g = ExperimentGeometry(2, 8, 3, trials=300, seed=2)
    base, pert = disturbed_curve(g, tol=0.05, reps=100)
    assert np.allclose(pert.qgrid, [f_disturbance(p, 2) for p in base.grid])
    # fewer E sites on V_d: pointwise less blocking on shared seeds
    assert np.all(pert.beta_curve <= base.beta_curve)
    assert np.all(pert.counts >= base.counts)
    assert pert.crossing >= base.crossing


def test_slab_scan_extremes():
    g = ExperimentGeometry(2, 6, 2, trials=50)
    res = slab_scan(g, grid=np.array([0.0, 1.0]), reps=50)
    assert list(res.beta_curve) == [0.0, 1.0]


def test_csv_and_manifest_deterministic(tmp_path):
    g = ExperimentGeometry(2, 6, 2, trials=100, seed=9)
    res = scan_critical("half_orthant", g, tol=0.1, reps=50)
    a = write_csv(res.records, tmp_path / "a.csv").read_bytes()
    res2 = scan_critical("half_orthant", g, tol=0.1, reps=50)
    b = write_csv(res2.records, tmp_path / "b.csv").read_bytes()
    assert a == b
    assert a.decode().splitlines()[0] == "p,q,N,M,trials,beta_hat,se"
    cfg = {"d": 2, "N": 6}
    m = json.loads(write_manifest(cfg, tmp_path / "m.json", ["a.csv"]).read_text())
    assert m["config_sha256"] == content_hash({"N": 6, "d": 2})
    assert m["outputs"] == ["a.csv"]


def test_export_surface(tmp_path):
    Q = Box.cube(3, 3)
    env = EnvironmentField(Q, 0, ModelSpec("half_orthant", 3, 1.0))
    out = export_surface(env, Q, (0, 0, 0), tmp_path / "s.ply")
    assert out.status == "ok" and out.all_type_e and out.all_terrace
    assert read_ply(out.path) == out.points
    env = EnvironmentField(Q, 0, ModelSpec("half_orthant", 3, 0.0))
    out = export_surface(env, Q, (0, 0, 0), tmp_path / "f.ply")
    assert out.status == "fills" and out.points == [] and read_ply(out.path) == []
    out = export_surface(env, Q, (0, 0, 0), tmp_path / "f.csv", fmt="csv")
    assert out.path.read_text() == "x1,x2,x3\n"
    with pytest.raises(ValueError):
        export_surface(EnvironmentField(Box.cube(3, 2), 0, HALF), Box.cube(3, 2), (0, 0), tmp_path / "x.ply")


def test_export_surface_random(tmp_path):
    Q = Box.cube(6, 3)
    for seed in range(5):
        env = EnvironmentField(Q, seed, ModelSpec("half_orthant", 3, 0.9))
        out = export_surface(env, Q, (0, 0, 0), tmp_path / f"r{seed}.ply")
        assert out.all_type_e and out.all_terrace
