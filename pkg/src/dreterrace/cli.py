"""Command line entry point: ``dreterrace <command> [options]``.

Every command accepts ``--seed`` and ``--out DIR``; outputs land in
``DIR`` together with a JSON manifest of the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .enhancement import (
    critical_instance,
    f_disturbance,
    find_pivotal,
    is_pivotal,
    local_modify,
    verify_certificate,
)
from .environment import MODELS, EnvironmentField, ModelSpec, SlabBox, write_snapshot
from .experiments import (
    ExperimentGeometry,
    blocking_curve,
    curve_records,
    export_surface,
    scan_critical,
    scan_summary,
    slab_scan,
    threshold_counts,
    write_csv,
    write_manifest,
)
from .lattice import Box, origin
from .reachability import connects_to_down_set
from .validation import SUITES, run_suite


def _grid(text: str) -> np.ndarray:
    try:
        a, b, h = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like p0:p1:step") from None
    if h <= 0 or b < a:
        raise argparse.ArgumentTypeError("grid needs p0 <= p1 and a positive step")
    m = int(round((b - a) / h))
    return np.round(np.linspace(a, a + m * h, m + 1), 12)


def _bracket(text: str) -> tuple:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("bracket must look like a,b") from None
    return a, b


def _model(text: str) -> str:
    return {"half": "half_orthant"}.get(text, text)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, out: Path, name: str, summary: dict, files: list) -> int:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    config["command"] = name
    config["version"] = __version__
    write_manifest(config | {"summary": summary}, out / f"{name}_manifest.json", files)
    print(json.dumps(summary, indent=2, default=str))
    return 0


def cmd_simulate(args) -> int:
    out = _out(args)
    model = _model(args.model)
    spec = ModelSpec(model, args.d, args.p, args.q if model == "disturbed" else None)
    box = SlabBox.cube(args.box, args.d).box if model == "slab" else Box.cube(args.box, args.d)
    env = EnvironmentField(box, args.seed, spec)
    snap = write_snapshot(env, out / "environment.bin")
    om = env.omega_mask()
    summary = {"model": model, "d": args.d, "sites": int(om.size), "type_e_fraction": float(om.mean())}
    if model in ("half_orthant", "disturbed"):
        linked, _ = connects_to_down_set(env, box, origin(args.d), (-args.M,) * args.d)
        summary["origin_reaches_target"] = bool(linked)
    return _finish(args, out, "simulate", summary, [snap])


def cmd_terrace(args) -> int:
    out = _out(args)
    model = _model(args.model)
    Q = Box.cube(args.box, args.d)
    env = EnvironmentField(Q, args.seed, ModelSpec(model, args.d, args.p))
    x = tuple(args.x) if args.x else origin(args.d)
    dest = out / f"terrace.{args.export}"
    res = export_surface(env, Q, x, dest, fmt=args.export)
    summary = {
        "status": res.status,
        "vertices": len(res.points),
        "all_type_e": res.all_type_e,
        "all_terrace_sites": res.all_terrace,
    }
    return _finish(args, out, "terrace", summary, [dest])


def _half_env(args, box: Box) -> EnvironmentField:
    model = _model(args.model)
    if model not in ("half_orthant", "disturbed"):
        raise SystemExit("pivotal sites need --model half or disturbed")
    q = args.q if args.q is not None else args.p
    return EnvironmentField(box, args.seed, ModelSpec(model, args.d, args.p, q if model == "disturbed" else None))


def cmd_pivotal(args) -> int:
    out = _out(args)
    R = Box.cube(args.N, args.d)
    env = _half_env(args, R)
    rep = find_pivotal(env, args.M, mode=args.mode)
    summary = {
        "connected": rep.connected,
        "pivotal": len(rep.sites),
        "on_vd": [list(p) for p in rep.on_vd],
        "off_vd": [list(p) for p in rep.off_vd],
    }
    files = []
    if args.report:
        dest = out / args.report
        dest.write_text(json.dumps(summary, indent=2))
        files.append(dest)
    return _finish(args, out, "pivotal", {k: summary[k] for k in ("connected", "pivotal")}, files)


def cmd_modify(args) -> int:
    out = _out(args)
    R = Box.cube(args.N, args.d)
    if args.critical:
        om, _ = critical_instance(args.d, args.N, args.M, args.seed)
    else:
        om = _half_env(args, R).omega_mask()
    if args.u:
        u = tuple(args.u)
    else:
        off = find_pivotal(om, args.M, R).off_vd
        if not off:
            print("no pivotal site outside V_d in this configuration", file=sys.stderr)
            return 2
        u = off[0]
    if not is_pivotal(om, R, args.M, u):
        print(f"{u} is not pivotal", file=sys.stderr)
        return 2
    cert = local_modify(om, u, args.n, args.M, R)
    dest = cert.write(out / "certificate.json")
    summary = {"u": list(u), "u_bar": cert.u_bar and list(cert.u_bar), "case": cert.case,
               "route": cert.route, "sites_changed": len(cert.diff), "ok": cert.ok}
    if args.verify:
        again = verify_certificate(om, R, args.M, cert)
        summary["reverified"] = all(again.values())
    return _finish(args, out, "modify", summary, [dest])


def cmd_beta(args) -> int:
    out = _out(args)
    model = "disturbed" if args.q_rule == "f" else _model(args.model)
    geom = ExperimentGeometry(args.d, args.N, args.M, args.trials, args.seed)
    grid = args.grid
    qgrid = np.array([f_disturbance(float(p), args.d) for p in grid]) if args.q_rule == "f" else grid
    counts = threshold_counts(model, geom, grid, qgrid)
    beta = blocking_curve(counts, len(grid))
    recs = curve_records(grid, qgrid, beta, geom, True)
    dest = write_csv(recs, out / "beta.csv")
    return _finish(args, out, "beta", {"points": len(recs), "csv": str(dest)}, [dest])


def cmd_scan_pc(args) -> int:
    out = _out(args)
    geom = ExperimentGeometry(args.d, args.N, args.M, args.trials, args.seed)
    res = scan_critical(_model(args.model), geom, bracket=args.bracket, tol=args.tol, reps=args.reps)
    dest = write_csv(res.records, out / "scan_pc.csv")
    return _finish(args, out, "scan-pc", scan_summary(res), [dest])


def cmd_slab_scan(args) -> int:
    out = _out(args)
    geom = ExperimentGeometry(args.d, args.N, args.M, args.trials, args.seed)
    res = slab_scan(geom, tol=args.tol, reps=args.reps)
    dest = write_csv(res.records, out / "slab_scan.csv")
    return _finish(args, out, "slab-scan", scan_summary(res), [dest])


def cmd_validate(args) -> int:
    out = _out(args)
    res = run_suite(args.suite, args.cases, args.seed)
    print(res.line())
    summary = {"suite": args.suite, "cases": res.cases, "failures": [list(map(str, f)) for f in res.failures]}
    _finish(args, out, "validate", summary, [])
    return 0 if res.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dreterrace", description="Degenerate random environment experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out")
        p.set_defaults(func=func)
        return p

    models = list(MODELS) + ["half"]

    p = add("simulate", cmd_simulate, "sample an environment and write a snapshot")
    p.add_argument("--model", choices=models, default="half")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--box", type=int, default=16, help="half-width N of the box Q_N")
    p.add_argument("--M", type=int, default=4)

    p = add("terrace", cmd_terrace, "export the terrace of a cluster")
    p.add_argument("--export", choices=["csv", "ply"], default="ply")
    p.add_argument("--x", type=int, nargs="+")
    p.add_argument("--model", choices=["half", "half_orthant", "disturbed"], default="half")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--p", type=float, default=0.95)
    p.add_argument("--box", type=int, default=30)

    p = add("pivotal", cmd_pivotal, "list pivotal sites")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--report")
    p.add_argument("--model", choices=["half", "half_orthant", "disturbed"], default="half")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=float, default=0.55)
    p.add_argument("--q", type=float)
    p.add_argument("--mode", choices=["fast", "naive"], default="fast")

    p = add("modify", cmd_modify, "move pivotality onto V_d and write a certificate")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--u", type=int, nargs="+")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--N", type=int, default=12)
    p.add_argument("--M", type=int, default=10)
    p.add_argument("--p", type=float, default=0.55)
    p.add_argument("--q", type=float)
    p.add_argument("--model", choices=["half", "half_orthant", "disturbed"], default="half")
    p.add_argument("--critical", action="store_true", help="sample at the configuration's own threshold")

    p = add("beta", cmd_beta, "blocking probability along a grid of p")
    p.add_argument("--grid", type=_grid, required=True)
    p.add_argument("--q-rule", choices=["equal", "f"], default="equal")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--M", type=int, default=6)
    p.add_argument("--model", choices=["half", "half_orthant", "disturbed", "slab"], default="half")

    p = add("scan-pc", cmd_scan_pc, "half-crossing of the blocking probability")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--bracket", type=_bracket, default=(0.0, 1.0))
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--N", type=int, default=48)
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--model", choices=["half", "half_orthant", "disturbed", "slab"], default="half")

    p = add("slab-scan", cmd_slab_scan, "half-crossing for the two-layer slab")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--N", type=int, default=48)
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--reps", type=int, default=2000)

    p = add("validate", cmd_validate, "randomized self-checks")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--cases", type=int, default=100)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
