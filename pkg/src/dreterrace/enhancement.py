"""Pivotal sites, the local modification that moves pivotality onto V_d,
pivotal-count derivative estimates and the two-layer slab terraces.

Configurations here are half-orthant configurations given as boolean masks
over a box ``R`` (True = type E, only the positive steps).  The source is
the origin and the target is the lower corner region ``(-M 1)_- ∩ R``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .environment import EnvironmentField, ModelSpec, trial_seed
from .lattice import (
    Box,
    VdLattice,
    as_point,
    down_cone,
    embed,
    leq,
    origin,
    relative_boundary,
    shifted,
    step,
    up_cone,
    up_set_closure,
)
from .reachability import cluster_from_mask
from .terrace import (
    QTerrace,
    TerraceError,
    delete_h_corners_trace,
    h_mask,
    lambda_mask,
    lambda_q,
    stabilize_trace,
)


def f_disturbance(p: float, d: int) -> float:
    """``p (1 - (1 - p)^(d + 1))``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return p * (1.0 - (1.0 - p) ** (d + 1))


def f_inverse(y: float, d: int, tol: float = 1e-15) -> float:
    """Inverse of :func:`f_disturbance` on [0, 1] by bisection."""
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"value {y} outside [0, 1]")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f_disturbance(mid, d) < y:
            lo = mid
        else:
            hi = mid
    return hi


def target_mask(R: Box, M: int) -> np.ndarray:
    """``(-M 1)_- ∩ R``."""
    mask = down_cone((-M,) * R.d, R)
    if not mask.any():
        raise ValueError("target region misses the box")
    return mask


def _omega(omega, R: Box | None) -> tuple:
    if isinstance(omega, EnvironmentField):
        if omega.spec.kind not in ("half_orthant", "disturbed"):
            raise ValueError("pivotal sites are defined for half-orthant type models")
        return omega.omega_mask(), omega.box
    if R is None:
        raise ValueError("a box is needed with a plain mask")
    om = np.asarray(omega, dtype=bool)
    if om.shape != R.shape:
        raise ValueError("mask does not match box")
    return om, R


def _shape(R: Box) -> np.ndarray:
    return np.asarray(R.shape, dtype=np.int64)


def connects(omega1: np.ndarray, R: Box, M: int) -> bool:
    """Whether the origin reaches the target inside ``R``."""
    return bool(
        _kernels.reaches(
            ~np.ascontiguousarray(omega1).ravel(),
            _shape(R),
            R.index(origin(R.d)),
            target_mask(R, M).ravel(),
            -1,
        )
    )


@dataclass
class PivotalReport:
    box: Box
    M: int
    mask: np.ndarray
    on_vd: list
    off_vd: list
    connected: bool

    @property
    def sites(self) -> list:
        return self.box.members(self.mask)


def find_pivotal(omega, M: int, R: Box | None = None, mode: str = "fast") -> PivotalReport:
    """Sites whose type decides whether the origin reaches the target.

    ``mode="naive"`` tests every site with two searches; ``mode="fast"``
    uses one forward and one backward search plus re-tests only when the
    configuration is connected.
    """
    om, R = _omega(omega, R)
    if not R.contains(origin(R.d)):
        raise ValueError("box must contain the origin")
    tgt = target_mask(R, M).ravel()
    flat = np.ascontiguousarray(om).ravel()
    src = R.index(origin(R.d))
    if mode == "fast":
        piv, connected = _kernels.pivotal_fast(flat, _shape(R), src, tgt)
    elif mode == "naive":
        piv = _kernels.pivotal_naive(flat, _shape(R), src, tgt)
        connected = bool(_kernels.reaches(~flat, _shape(R), src, tgt, -1))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    mask = piv.reshape(R.shape)
    vd = VdLattice.of(R.d).mask(R)
    return PivotalReport(R, M, mask, R.members(mask & vd), R.members(mask & ~vd), bool(connected))


def is_pivotal(omega1: np.ndarray, R: Box, M: int, u: Sequence[int]) -> bool:
    """Two-sided check of a single site by direct recomputation."""
    w = np.array(omega1, dtype=bool, copy=True)
    k = R.local(u)
    w[k] = True
    if connects(w, R, M):
        return False
    w[k] = False
    return connects(w, R, M)


def corner_conditions(omega1: np.ndarray, R: Box, M: int, u: Sequence[int]) -> bool:
    """Necessary conditions on a pivotal site outside the origin's up-cone.

    With the terrace of the origin's cluster under ``omega1`` with ``u``
    set to E: ``u`` is a terrace site, some ``u + e_i`` is in ``R`` but
    off the terrace, and some ``u - e_j`` is in ``R`` below the up-set.
    """
    w = np.array(omega1, dtype=bool, copy=True)
    w[R.local(u)] = True
    cl = cluster_from_mask(w, R.index(origin(R.d)))
    if cl.flat[0]:
        return False
    t = lambda_q(cl, R)
    if u not in t:
        return False
    up_ok = any(R.contains(step(u, i, 1)) and step(u, i, 1) not in t for i in range(R.d))
    down_ok = any(R.contains(step(u, j, -1)) and not t.in_up(step(u, j, -1)) for j in range(R.d))
    return up_ok and down_ok


# ---------------------------------------------------------------------------
# local modification


@dataclass
class ModificationCertificate:
    u: tuple
    u_bar: tuple | None
    case: str
    n: int
    window: tuple
    inner_window: tuple
    diff: list
    checks: dict = field(default_factory=dict)
    route: str = ""
    omega_bar: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    @property
    def first_failure(self) -> str | None:
        return next((k for k, v in self.checks.items() if not v), None)

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("omega_bar")
        out["diff"] = [[list(p), a, b] for p, a, b in self.diff]
        out["u"] = list(self.u)
        out["u_bar"] = None if self.u_bar is None else list(self.u_bar)
        out["window"] = [list(c) for c in self.window]
        out["inner_window"] = [list(c) for c in self.inner_window]
        out["ok"] = self.ok
        return out

    def write(self, dest) -> Path:
        dest = Path(dest)
        dest.write_text(json.dumps(self.to_json(), indent=2))
        return dest


def _box_window(R: Box, center: tuple, n: int) -> Box:
    return Box.cube(n, R.d, center).intersect(R)


def _terrace_checks(bar: QTerrace, base: QTerrace, R: Box, Q: Box, M: int, u_bar) -> dict:
    """The seven terrace requirements, recomputed from the masks."""
    o = origin(R.d)
    outside = ~embed(relative_boundary(Q, R)[1], Q, R)
    bar_up = up_set_closure(bar.sites, R)
    base_up = up_set_closure(base.sites, R)
    vd = VdLattice.of(R.d)
    checks = {
        "canonical": np.array_equal(bar.sites, lambda_mask(bar_up)),
        "same_sites_off_window": np.array_equal(bar.sites & outside, base.sites & outside),
        "same_up_off_window": np.array_equal(bar_up & outside, base_up & outside),
        "up_shrinks": not np.any(bar_up & ~base_up),
        "origin_above": bool(bar_up[R.local(o)]),
        "target_below": not np.any(bar_up & target_mask(R, M)),
    }
    if u_bar is None:
        checks["u_bar_found"] = False
        return checks
    H = h_mask(bar.sites)
    checks["u_bar_on_terrace"] = u_bar in bar
    checks["u_bar_in_vd"] = vd.contains(u_bar)
    checks["u_bar_usable"] = (not H[R.local(u_bar)]) or leq(o, u_bar)
    return checks


def local_modify(omega, u: Sequence[int], n: int, M: int, R: Box | None = None) -> ModificationCertificate:
    """Move pivotality from ``u`` onto a V_d site near ``u``.

    ``omega`` is a configuration on ``R = Q_N`` (mask or environment) and
    ``u`` a pivotal site outside V_d.  The configuration is rewritten on
    the window ``(u + Q_n) ∩ R`` so that some site ``u_bar`` of V_d within
    distance ``n - 2`` of ``u`` becomes pivotal.  The certificate records
    the case taken, the site changes and independent re-checks.
    """
    om, R = _omega(omega, R)
    d = R.d
    u = R.check(u)
    N = R.hi[0]
    if R != Box.cube(N, d):
        raise ValueError("the box must be a centred cube")
    vd = VdLattice.of(d)
    if not n > vd.rho + 4:
        raise ValueError(f"n={n} must exceed rho+4={vd.rho + 4}")
    if not N > M > n:
        raise ValueError("need N > M > n")
    if vd.contains(u):
        raise ValueError("u already lies in V_d")
    if not is_pivotal(om, R, M, u):
        raise ValueError(f"{u} is not pivotal")

    o = origin(d)
    Q = _box_window(R, u, n)
    barQ = _box_window(R, u, n - 2)
    w1 = om.copy()
    w1[R.local(u)] = True
    cl = cluster_from_mask(w1, R.index(o))
    if cl.flat[0]:
        raise TerraceError("cluster fills the box although u is pivotal")
    base = lambda_q(cl, R)

    o_in_bar = barQ.contains(o)
    u_above_o = leq(o, u)
    route = ""
    if o_in_bar and u_above_o:
        case, bar, u_bar, route = "III", base, o, "origin"
    elif u_above_o:
        case, bar = "I", base
        u_bar, route = _case_one(base, u, n, vd)
    else:
        bar, A, a_axis, halted = _reshape(base, R, Q, barQ, u, o if o_in_bar else None)
        if halted:
            case, u_bar, route = "III", o, "origin-stop"
        else:
            u_bar, special, route = _find_u_bar(bar, R, barQ, u, n, a_axis, A, vd)
            case = "III" if o_in_bar else ("II-special" if special else "II")

    omega_bar = om.copy()
    sl = Q.slices_in(R)
    omega_bar[sl] = bar.sites[sl]
    diff = [
        (p, "E" if om[R.local(p)] else "F", "E" if omega_bar[R.local(p)] else "F")
        for p in R.members(om != omega_bar)
    ]
    cert = ModificationCertificate(
        u=u,
        u_bar=u_bar,
        case=case,
        n=n,
        window=(Q.lo, Q.hi),
        inner_window=(barQ.lo, barQ.hi),
        diff=diff,
        route=route,
        omega_bar=omega_bar,
    )
    checks = _terrace_checks(bar, base, R, Q, M, u_bar)
    if u_bar is not None:
        checks["u_bar_in_inner_window"] = barQ.contains(u_bar)
    checks.update(verify_certificate(om, R, M, cert))
    cert.checks = {k: bool(v) for k, v in checks.items()}
    return cert


def verify_certificate(omega1: np.ndarray, R: Box, M: int, cert: ModificationCertificate) -> dict:
    """Re-check a certificate from the original configuration alone.

    The modified configuration is rebuilt from the recorded diff, then the
    window confinement, the V_d membership of ``u_bar`` and its two-sided
    pivotality are recomputed.
    """
    om = np.asarray(omega1, dtype=bool)
    rebuilt = om.copy()
    consistent = True
    for p, old, new in cert.diff:
        k = R.local(p)
        consistent &= (old == "E") == bool(om[k])
        rebuilt[k] = new == "E"
    Q = Box(*cert.window)
    barQ = Box(*cert.inner_window)
    inside = embed(np.ones(Q.shape, dtype=bool), Q, R)
    out = {
        "diff_consistent": bool(consistent),
        "diff_in_window": not np.any((rebuilt != om) & ~inside),
        "window_matches_u": Q == _box_window(R, cert.u, cert.n)
        and barQ == _box_window(R, cert.u, cert.n - 2),
    }
    if cert.u_bar is None:
        out["u_bar_pivotal"] = False
        return out
    out["u_bar_in_vd_recheck"] = VdLattice.of(R.d).contains(cert.u_bar)
    out["u_bar_in_window_recheck"] = barQ.contains(cert.u_bar) and Q.contains(cert.u_bar)
    out["u_bar_pivotal"] = _naive_pivotal(rebuilt, R, M, cert.u_bar)
    return out


def _flood(omega1: np.ndarray, R: Box, M: int) -> bool:
    """Whether the origin reaches the target, by whole-array flood fill."""
    reach = np.zeros(R.shape, dtype=bool)
    reach[R.local(origin(R.d))] = True
    tgt = target_mask(R, M)
    while True:
        grow = reach.copy()
        down = reach & ~omega1
        for i in range(R.d):
            grow |= shifted(reach, i, 1)
            grow |= shifted(down, i, -1)
        if np.any(grow & tgt):
            return True
        if np.array_equal(grow, reach):
            return False
        reach = grow


def _naive_pivotal(omega1: np.ndarray, R: Box, M: int, u: Sequence[int]) -> bool:
    """Two-sided pivotality recomputed by flood fill."""
    w = np.array(omega1, dtype=bool, copy=True)
    w[R.local(u)] = True
    if _flood(w, R, M):
        return False
    w[R.local(u)] = False
    return _flood(w, R, M)


def _case_one(base: QTerrace, u: tuple, n: int, vd: VdLattice) -> tuple:
    """Sub-lattice site on the straight segment from ``u`` towards the origin."""
    d = len(u)
    for j in range(d):
        if u[j] >= n - 1:
            seg = [step(u, j, -k) for k in range(n - 1)]
            cands = [p for p in seg if vd.contains(p) and p in base]
            if cands:
                return min(cands), f"segment-axis{j}"
    return None, "none"


def _reshape(base: QTerrace, R: Box, Q: Box, barQ: Box, u: tuple, stop) -> tuple:
    """Alternate stabilization and H-corner deletion until nothing changes."""
    d = R.d
    a_axis = next(
        (i for i in range(d) if R.contains(step(u, i, 1)) and step(u, i, 1) not in base), None
    )
    if a_axis is None:
        raise TerraceError("no upper neighbour of u leaves the terrace")
    ua = step(u, a_axis, 1)
    A = [step(ua, i, -1) for i in range(d) if R.contains(step(ua, i, -1))]
    if not all(base.in_up(p) for p in A):
        raise TerraceError("protected set not inside the up-set")
    o = origin(d)
    t = base
    while True:
        before = t.up
        tr = stabilize_trace(t, barQ, A, stop=stop)
        t = tr.terrace
        if tr.halted:
            return t, A, a_axis, True
        tr = delete_h_corners_trace(t, o, window=Q, stop=stop)
        t = tr.terrace
        if tr.halted:
            return t, A, a_axis, True
        if np.array_equal(before, t.up):
            break
    # the protected set, u and u + e_a must sit as required
    if not all(t.in_up(p) for p in A) or u not in t or ua in t:
        raise TerraceError("protected-set properties fail after reshaping")
    return t, A, a_axis, False


def _segment_candidates(t: QTerrace, R: Box, barQ: Box, start: tuple, i: int, j: int,
                        length: int, vd: VdLattice) -> list:
    """V_d candidates from the straight-run / rectangle argument from ``start``."""
    d = R.d
    far = step(start, i, length)
    if far in t:
        seg = [step(start, i, k) for k in range(length + 1)]
        if all(p in t for p in seg):
            return [p for p in seg if vd.contains(p) and barQ.contains(p)]
        return []
    q = next((k for k in range(1, length + 1) if step(start, i, k) not in t), None)
    if q is None or step(start, i, q - 1) not in t:
        return []
    y1 = step(step(start, i, q), j, -1)
    y0 = step(step(start, i, q - 1), j, -1)
    if y1 in t:
        y = y1
    elif y0 in t:
        y = y0
    else:
        return []
    if not barQ.contains(y):
        return []
    boundary, _ = relative_boundary(barQ, R)
    lows = [
        z for z in barQ.members(boundary)
        if leq(z, y) and t.in_up(z)
    ]
    out = []
    for z in sorted(lows):
        for k in range(d):
            span = y[k] - z[k]
            if span >= length:
                seg = [step(y, k, -l) for l in range(length + 1)]
                if all(p in t for p in seg):
                    out.extend(p for p in seg if vd.contains(p) and barQ.contains(p))
        if out:
            break
    return out


def _find_u_bar(t: QTerrace, R: Box, barQ: Box, u: tuple, n: int, a_axis: int, A: list,
                vd: VdLattice) -> tuple:
    d = R.d
    plus = [i for i in range(d) if R.contains(step(u, i, n))]
    minus = [j for j in range(d) if R.contains(step(u, j, -n))]
    found = []
    paired = any(i != j for i in plus for j in minus)
    # whether some pair meets the premise of the straight-run argument; for
    # the special axis that premise is v on the terrace, not just above it
    argued = False
    for i in plus:
        for j in minus:
            if i == j:
                continue
            if i != a_axis:
                argued = True
                c = _segment_candidates(t, R, barQ, u, i, j, n - 3, vd)
                found.extend((p, False) for p in c)
            else:
                v = step(step(u, a_axis, 1), j, -1)
                argued |= v in t
                if t.in_up(v):
                    c = _segment_candidates(t, R, barQ, v, i, j, n - 4, vd)
                    found.extend((p, True) for p in c)
    if found:
        p, special = min(found)
        return p, special, "segment"
    # any V_d terrace site of the inner window is usable once H lies above o
    cands = [p for p in barQ.members(np.ones(barQ.shape, dtype=bool)) if p in t and vd.contains(p)]
    if cands:
        route = "scan" if argued else ("scan-gap" if paired else "scan-nopair")
        return min(cands), False, route
    return None, False, "none"


# ---------------------------------------------------------------------------
# derivative estimates


@dataclass
class RussoEstimate:
    d_dp: float
    d_dq: float
    se_p: float
    se_q: float
    trials: int


def pivot_setup(d: int, N: int, M: int) -> tuple:
    R = Box.cube(N, d)
    return (
        R,
        np.asarray(R.lo, dtype=np.int64),
        _shape(R),
        R.index(origin(d)),
        target_mask(R, M).ravel(),
        VdLattice.of(d).mask(R).ravel(),
    )


def trial_seeds(base: int, trials: int, offset: int = 0) -> np.ndarray:
    return np.array([trial_seed(base, offset + t) for t in range(trials)], dtype=np.uint64)


def russo_estimates(spec: ModelSpec, N: int, M: int, trials: int, seed: int) -> RussoEstimate:
    """Mean pivotal counts off and on V_d, with standard errors.

    These estimate the derivatives of the blocking probability in ``p`` and
    in ``q`` respectively.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    q = spec.q if spec.q is not None else spec.p
    R, lo, shape, src, tgt, vd = pivot_setup(spec.d, N, M)
    counts = _kernels.pivotal_count_trials(trial_seeds(seed, trials), lo, shape, src, tgt, vd, spec.p, q)
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(2)
    return RussoEstimate(float(mean[0]), float(mean[1]), float(se[0]), float(se[1]), trials)


# ---------------------------------------------------------------------------
# slab terraces


@dataclass
class SlabReport:
    lower: np.ndarray
    upper: np.ndarray
    clauses: dict
    degenerate: bool

    @property
    def ok(self) -> bool:
        return all(self.clauses.values())


def slab_terraces(env: EnvironmentField, x: Sequence[int]) -> SlabReport:
    """Layer terraces of the slab cluster of ``x`` and their relations.

    The cluster is computed in the slab box; each layer slice is a closed
    up-set of the base box whose terrace is taken.  The report checks:
    (i) terraces inside the cluster, (ii) terraces of type E, (iii) each
    terrace generates its slice, (iv) the lower slice sits inside the upper
    one, (v) upper-slice sites above no lower-slice site are of type E,
    (vi) every lower terrace site has a type-E site among the site above it
    and that site's lower neighbours.
    """
    if env.spec.kind != "slab":
        raise ValueError("slab_terraces needs a slab environment")
    box = env.box
    if box.lo[-1] != 1 or box.hi[-1] != 2:
        raise ValueError("slab box must contain both layers")
    base = Box(box.lo[:-1], box.hi[:-1])
    if min(base.shape) < 2:
        raise ValueError("window too small")
    x = box.check(x)
    plus, minus = env.arrows()
    seen, _ = _kernels.forward_reach(plus, minus, _shape(box), box.index(x))
    C = seen.reshape(box.shape)
    om = env.omega_mask()
    slices = [C[..., 0], C[..., 1]]
    lams = [lambda_mask(s) for s in slices]
    degenerate = any(s.all() or not s.any() for s in slices)
    d = base.d
    c = {}
    c["i_in_cluster"] = all(not np.any(l & ~s) for l, s in zip(lams, slices))
    c["ii_type_e"] = all(not np.any(l & ~om[..., k]) for k, l in enumerate(lams))
    c["iii_generates"] = all(
        s.all() or np.array_equal(up_set_closure(l, base), s) for l, s in zip(lams, slices)
    )
    c["iv_nested"] = not np.any(up_set_closure(lams[0], base) & ~up_set_closure(lams[1], base)) if not degenerate else not np.any(slices[0] & ~slices[1])
    gap = slices[1] & ~slices[0]
    c["v_gap_type_e"] = not np.any(gap & ~om[..., 1])
    upper = om[..., 1]
    near = upper.copy()
    for j in range(d):
        near |= shifted(upper, j, 1, fill=False)
    c["vi_neighbourhood"] = not np.any(lams[0] & ~near)
    return SlabReport(lams[0], lams[1], c, degenerate)


def critical_instance(d: int, N: int, M: int, seed: int) -> tuple:
    """A configuration at its own blocking threshold, with a pivotal site.

    Sites are ranked by their uniforms; with ``c`` the number of leading
    ranks at which the origin still reaches the target, the configuration
    "rank <= c is E" is blocked, while turning the rank-``c`` site to F
    reconnects it.  Returns ``(omega1, u)``, or ``(omega1, None)`` when no
    rank blocks the connection.
    """
    R, lo, shape, src, tgt, _ = pivot_setup(d, N, M)
    U = _kernels.uniform_box(np.uint64(seed), lo, shape)
    order = np.argsort(U, kind="stable")
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    c = int(_kernels.bottleneck_level(rank, order.size - 1, shape, src, tgt))
    omega1 = (rank <= c).reshape(R.shape)
    if c >= order.size:
        return omega1, None
    return omega1, R.point(int(order[c]))
