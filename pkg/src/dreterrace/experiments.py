"""Monte Carlo drivers: blocking probabilities, threshold scans, the
disturbed and slab comparisons, and surface export.

All estimates are finite-box quantities for ``R = Q_N`` and the target
``(-M 1)_- ∩ R``.  Trial ``t`` uses the seed derived from ``(base, t)``, and
every parameter value of a scan reuses the same trial seeds, so curves are
monotone per trial and runs are reproducible bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .enhancement import f_disturbance, target_mask, trial_seeds
from .environment import EnvironmentField, ModelSpec
from .lattice import Box, VdLattice, down_cone, origin
from .terrace import extract_terrace, lambda_mask, write_ply, write_terrace_csv

CSV_COLUMNS = ("p", "q", "N", "M", "trials", "beta_hat", "se")


@dataclass(frozen=True)
class ExperimentGeometry:
    """Box half-width ``N``, target offset ``M`` and optional window ``n``."""

    d: int
    N: int
    M: int
    trials: int = 1000
    seed: int = 0
    n: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not self.N > self.M >= 1:
            raise ValueError(f"need N > M >= 1, got N={self.N}, M={self.M}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.n is not None:
            rho = VdLattice.of(self.d).rho
            if not self.M > self.n > rho + 4:
                raise ValueError(f"need N > M > n > {rho + 4}")


@dataclass
class EstimateRecord:
    p: float
    q: float | None
    value: float
    se: float
    trials: int
    N: int
    M: int
    kind: str = "beta"

    def row(self) -> list:
        return [self.p, self.p if self.q is None else self.q, self.N, self.M, self.trials, self.value, self.se]


@dataclass
class ScanResult:
    """Per-trial connection counts over a parameter grid and the crossing."""

    kind: str
    d: int
    geometry: ExperimentGeometry
    grid: np.ndarray
    qgrid: np.ndarray
    counts: np.ndarray
    crossing: float
    bracket: tuple
    ci: tuple
    records: list = field(default_factory=list)

    @property
    def beta_curve(self) -> np.ndarray:
        return blocking_curve(self.counts, len(self.grid))


def _layout(kind: str, d: int, N: int, M: int) -> tuple:
    """Box, lower corner, shape, source, target and disturbed-site flags."""
    if kind in ("half_orthant", "disturbed"):
        R = Box.cube(N, d)
        src = origin(d)
        tgt = target_mask(R, M)
        vd = VdLattice.of(d).mask(R) if kind == "disturbed" else np.zeros(R.shape, dtype=bool)
    elif kind == "slab":
        R = Box((-N,) * d + (1,), (N,) * d + (2,))
        src = origin(d) + (1,)
        tgt = down_cone((-M,) * d + (2,), R)
        vd = np.zeros(R.shape, dtype=bool)
    else:
        raise ValueError(f"scans are defined for half_orthant, disturbed and slab, not {kind!r}")
    return (
        R,
        np.asarray(R.lo, dtype=np.int64),
        np.asarray(R.shape, dtype=np.int64),
        R.index(src),
        tgt.ravel(),
        vd.ravel(),
    )


def _se(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def blocked_indicators(spec: ModelSpec, geom: ExperimentGeometry, ps, qs=None, offset: int = 0) -> np.ndarray:
    """Blocking indicator per trial and parameter pair, shape ``(trials, len(ps))``."""
    ps = np.atleast_1d(np.asarray(ps, dtype=np.float64))
    qs = ps.copy() if qs is None else np.atleast_1d(np.asarray(qs, dtype=np.float64))
    if qs.shape != ps.shape:
        raise ValueError("p and q sequences differ in length")
    _, lo, shape, src, tgt, vd = _layout(spec.kind, geom.d, geom.N, geom.M)
    seeds = trial_seeds(geom.seed, geom.trials, offset)
    return _kernels.bfs_trials_blocked(seeds, lo, shape, src, tgt, vd, ps, qs)


def estimate_beta(spec: ModelSpec, geom: ExperimentGeometry, p: float | None = None,
                  q: float | None = None) -> EstimateRecord:
    """Probability that the origin fails to reach the target inside ``R``."""
    p = spec.p if p is None else p
    if q is None:
        q = spec.q if (spec.kind == "disturbed" and spec.q is not None) else p
    hits = blocked_indicators(spec, geom, [p], [q])[:, 0].astype(np.float64)
    return EstimateRecord(p, q if spec.kind == "disturbed" else None, float(hits.mean()), _se(hits),
                          geom.trials, geom.N, geom.M)


def estimate_theta_proxy(spec: ModelSpec, geom: ExperimentGeometry, p: float | None = None) -> EstimateRecord:
    """Probability that the cluster of the origin reaches the lowest corner of ``R``.

    In a box every site above a reached site is reached too, so this is
    the probability that the cluster fills ``R``.
    """
    p = spec.p if p is None else p
    q = spec.q if (spec.kind == "disturbed" and spec.q is not None) else p
    R, lo, shape, src, _, vd = _layout(spec.kind, geom.d, geom.N, geom.M)
    corner = np.zeros(R.size, dtype=bool)
    corner[0] = True
    seeds = trial_seeds(geom.seed, geom.trials)
    hits = 1.0 - _kernels.bfs_trials_blocked(seeds, lo, shape, src, corner, vd,
                                             np.array([p]), np.array([q]))[:, 0].astype(np.float64)
    return EstimateRecord(p, q if spec.kind == "disturbed" else None, float(hits.mean()), _se(hits),
                          geom.trials, geom.N, geom.M, kind="theta_proxy")


def threshold_counts(kind: str, geom: ExperimentGeometry, grid, qgrid=None) -> np.ndarray:
    """Per-trial number of leading grid points at which the connection exists."""
    grid = np.asarray(grid, dtype=np.float64)
    qgrid = grid.copy() if qgrid is None else np.asarray(qgrid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0 or qgrid.shape != grid.shape:
        raise ValueError("grids must be non-empty 1-D arrays of equal length")
    if np.any(np.diff(grid) < 0) or np.any(np.diff(qgrid) < 0):
        raise ValueError("grids must be non-decreasing")
    _, lo, shape, src, tgt, vd = _layout(kind, geom.d, geom.N, geom.M)
    seeds = trial_seeds(geom.seed, geom.trials)
    return _kernels.threshold_levels(seeds, lo, shape, src, tgt, vd, grid, qgrid)


def blocking_curve(counts: np.ndarray, m: int) -> np.ndarray:
    """Fraction of trials blocked at each grid index (blocked at k iff count <= k)."""
    hist = np.bincount(np.minimum(counts, m), minlength=m + 1)
    return np.cumsum(hist)[:m] / counts.size


def crossing_from_curve(grid: np.ndarray, beta: np.ndarray) -> tuple:
    """Half-crossing of a non-decreasing curve, linearly interpolated.

    Returns ``(estimate, (lower, upper))`` where the bracket holds the two
    grid points around the crossing.
    """
    if beta[0] > 0.5 or beta[-1] < 0.5:
        raise ValueError("the grid does not straddle the 1/2 level")
    k = int(np.searchsorted(beta, 0.5, side="left"))
    if k == 0 or beta[k] == 0.5:
        return float(grid[k]), (float(grid[max(k - 1, 0)]), float(grid[k]))
    b0, b1 = beta[k - 1], beta[k]
    est = grid[k - 1] + (0.5 - b0) / (b1 - b0) * (grid[k] - grid[k - 1])
    return float(est), (float(grid[k - 1]), float(grid[k]))


def bootstrap_ci(counts: np.ndarray, grid: np.ndarray, reps: int = 2000, level: float = 0.95,
                 seed: int = 0) -> tuple:
    """Percentile bootstrap interval for the crossing, resampling trials."""
    rng = np.random.default_rng(seed)
    m = len(grid)
    capped = np.minimum(counts, m)
    est = np.empty(reps)
    for b in range(reps):
        sample = capped[rng.integers(0, counts.size, counts.size)]
        beta = blocking_curve(sample, m)
        try:
            est[b] = crossing_from_curve(grid, beta)[0]
        except ValueError:
            est[b] = grid[0] if beta[0] > 0.5 else grid[-1]
    lo, hi = np.quantile(est, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def curve_records(grid, qgrid, beta, geom, q_shown: bool) -> list:
    se = np.sqrt(beta * (1 - beta) / max(geom.trials - 1, 1))
    return [
        EstimateRecord(float(p), float(q) if q_shown else None, float(b), float(s), geom.trials, geom.N, geom.M)
        for p, q, b, s in zip(grid, qgrid, beta, se)
    ]


def make_grid(bracket: tuple, tol: float) -> np.ndarray:
    a, b = bracket
    if not 0.0 <= a < b <= 1.0:
        raise ValueError("bracket must satisfy 0 <= a < b <= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = int(np.ceil((b - a) / tol - 1e-9))
    return np.linspace(a, b, m + 1)


def scan_critical(kind: str, geom: ExperimentGeometry, grid=None, bracket: tuple = (0.0, 1.0),
                  tol: float = 1e-3, q_rule: str = "equal", reps: int = 2000) -> ScanResult:
    """Half-crossing of the blocking probability along a parameter grid.

    ``q_rule="f"`` puts the V_d sites at ``q = f(p)``.  The crossing is a
    finite-box estimate for ``(N, M)``; its interval is a bootstrap over
    trials.
    """
    grid = make_grid(bracket, tol) if grid is None else np.asarray(grid, dtype=np.float64)
    if q_rule == "equal":
        qgrid = grid.copy()
    elif q_rule == "f":
        if kind != "disturbed":
            raise ValueError("q_rule='f' needs the disturbed model")
        qgrid = np.array([f_disturbance(float(p), geom.d) for p in grid])
    else:
        raise ValueError(f"unknown q_rule {q_rule!r}")
    counts = threshold_counts(kind, geom, grid, qgrid)
    beta = blocking_curve(counts, len(grid))
    est, bracket_out = crossing_from_curve(grid, beta)
    ci = bootstrap_ci(counts, grid, reps=reps, seed=geom.seed)
    return ScanResult(kind, geom.d, geom, grid, qgrid, counts, est, bracket_out, ci,
                      curve_records(grid, qgrid, beta, geom, kind == "disturbed"))


def disturbed_curve(geom: ExperimentGeometry, grid=None, tol: float = 1e-3, reps: int = 2000) -> tuple:
    """Undisturbed and ``q = f(p)`` scans on the same trial seeds."""
    base = scan_critical("disturbed", geom, grid, tol=tol, q_rule="equal", reps=reps)
    pert = scan_critical("disturbed", geom, base.grid, q_rule="f", reps=reps)
    return base, pert


def slab_scan(geom: ExperimentGeometry, grid=None, tol: float = 1e-3, reps: int = 2000) -> ScanResult:
    """Half-crossing for the two-layer slab over the base lattice."""
    return scan_critical("slab", geom, grid, tol=tol, reps=reps)


def ordered_within_ci(a: ScanResult, b: ScanResult) -> bool:
    """``a`` below ``b`` up to sampling error: ordered estimates or overlapping intervals."""
    return a.crossing <= b.crossing or a.ci[0] <= b.ci[1] and b.ci[0] <= a.ci[1]


def strictly_below(a: ScanResult, b: ScanResult) -> bool:
    """``a`` below ``b`` with disjoint intervals."""
    return a.ci[1] < b.ci[0]


# ---------------------------------------------------------------------------
# output


def write_csv(records: Sequence[EstimateRecord], dest) -> Path:
    dest = Path(dest)
    with dest.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r.row()])
    return dest


def content_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(config: dict, dest, outputs: Sequence = ()) -> Path:
    """JSON record of a run: its configuration, a hash of it and the outputs."""
    dest = Path(dest)
    body = {"config": config, "config_sha256": content_hash(config), "outputs": [str(o) for o in outputs]}
    dest.write_text(json.dumps(body, indent=2, sort_keys=True, default=str))
    return dest


def scan_summary(res: ScanResult) -> dict:
    return {
        "kind": res.kind,
        "d": res.d,
        "N": res.geometry.N,
        "M": res.geometry.M,
        "trials": res.geometry.trials,
        "crossing": res.crossing,
        "bracket": list(res.bracket),
        "ci95": list(res.ci),
        "label": "finite-box half-crossing",
    }


@dataclass
class SurfaceExport:
    status: str
    points: list
    path: Path | None
    all_type_e: bool
    all_terrace: bool


def export_surface(env: EnvironmentField, Q: Box, x: Sequence[int], dest=None, fmt: str = "ply") -> SurfaceExport:
    """Write the terrace of the cluster of ``x`` in ``Q`` as PLY or CSV.

    An empty vertex list with status ``"fills"`` is written when the cluster
    fills ``Q``.  Every exported vertex is re-checked to be of type E and to
    satisfy the terrace membership rule of the cluster.
    """
    if fmt not in ("ply", "csv"):
        raise ValueError("format must be 'ply' or 'csv'")
    if fmt == "ply" and Q.d != 3:
        raise ValueError("PLY export needs d = 3")
    t = extract_terrace(env, Q, x)
    if t is None:
        pts, status, ok_e, ok_t = [], "fills", True, True
    else:
        pts = t.points()
        status = "ok"
        om = env.omega_mask(Q)
        lam = lambda_mask(t.up)
        ok_e = all(om[Q.local(p)] for p in pts)
        ok_t = all(lam[Q.local(p)] for p in pts)
    path = None
    if dest is not None:
        if fmt == "ply":
            path = write_ply(pts, dest, comment=f"status={status} p={env.spec.p} seed={env.seed}")
        elif t is not None:
            path = write_terrace_csv(t, dest)
        else:
            path = Path(dest)
            path.write_text(",".join(f"x{k + 1}" for k in range(Q.d)) + "\n")
    return SurfaceExport(status, pts, path, ok_e, ok_t)


def geometry_dict(geom: ExperimentGeometry) -> dict:
    return asdict(geom)
