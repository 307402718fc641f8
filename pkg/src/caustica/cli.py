"""Command-line interface: exploration subcommands plus the verification harness.

Subcommands mirror the package surface (orbit dumps, caustic solves, chart and
mode tables, polygon searches, defect scans, operator reports, projections and
ellipse fits) and `verify <id>` / `verify-all` run the verification experiments
with pass/fail exit codes.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dynamics, modes, report_io, variational
from .action_angle import caustic_from_rotation_number, first_integral, get_chart
from .dynamics import PhasePoint
from .experiments import (
    ALL_EXPERIMENTS,
    ExperimentConfig,
    coverage,
    run_experiment,
)
from .geometry import BoundarySpec, EllipsePose, PerturbationSeries, as_boundary


def _load_boundary(path: str) -> BoundarySpec:
    return BoundarySpec.from_dict(json.loads(Path(path).read_text()))


def _pose(args) -> EllipsePose:
    return EllipsePose(args.e, (args.cx, args.cy), args.tilt, args.scale)


def _write(args, name: str, text: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    print(path)
    return path


def _add_pose_args(p):
    p.add_argument("--e", type=float, default=0.2, help="eccentricity")
    p.add_argument("--cx", type=float, default=0.0)
    p.add_argument("--cy", type=float, default=0.0)
    p.add_argument("--tilt", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)


def cmd_orbit(args):
    if args.input:
        bnd = as_boundary(_load_boundary(args.input))
    else:
        bnd = as_boundary(_pose(args))
    fi = None
    if args.integral:
        if not bnd.is_ellipse:
            raise SystemExit("--integral needs an exact ellipse boundary")
        pose = bnd.spec.base
        fi = lambda s, phi: float(first_integral(pose, float(bnd.tau_of_s(s)), phi))
    rows = dynamics.orbit_rows(bnd, PhasePoint(args.s0, args.phi), args.steps,
                               first_integral=fi)
    data = [{"step": k, "s": s, "phi": p, "x": x, "y": y, "I": i}
            for k, s, p, x, y, i in rows]
    _write(args, "orbit.csv", report_io.data_to_csv(data))
    return 0


def cmd_caustic(args):
    pose = _pose(args)
    caustic = caustic_from_rotation_number(pose, 1.0 / args.q)
    out = {"e": args.e, "q": args.q, "Z": caustic.Z,
           "semi_major": caustic.semi_major, "semi_minor": caustic.semi_minor}
    _write(args, "caustic.json", json.dumps(out, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_chart(args):
    chart = get_chart(_pose(args), args.q)
    data = [{"theta": th, "S": s, "Phi": p, "Xq": xq, "Yq": yq, "dXq": dxq}
            for th, s, p, xq, yq, dxq in chart.export_rows()]
    _write(args, f"chart_q{args.q}.csv", report_io.data_to_csv(data))
    return 0


def cmd_qgon(args):
    poly = variational.max_perimeter_polygon(_pose(args), args.q, args.s0)
    data = [{"k": k, "s": float(poly.vertices[k]),
             "residual": float(poly.reflection_residuals[k])}
            for k in range(args.q)]
    _write(args, f"qgon_q{args.q}.csv", report_io.data_to_csv(data))
    print(f"perimeter {poly.perimeter!r}")
    return 0


def cmd_defect(args):
    pose = _pose(args)
    v = PerturbationSeries.single_cos(args.mode, 1.0)
    thetas = np.arange(args.theta_grid) / args.theta_grid
    reports, slope = variational.perimeter_defect(pose, v, args.q,
                                                  args.eps, thetas)
    out = {"e": args.e, "q": args.q,
           "epsilon": [r.epsilon for r in reports],
           "defect": [r.defect for r in reports], "slope": slope}
    _write(args, "defect.json", json.dumps(out, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_modes(args):
    pose = _pose(args)
    cq, sq = modes.deformed_mode(pose, args.q)
    data = [{"x": float(x), "c_q": float(c), "s_q": float(s)}
            for x, c, s in zip(cq.x, cq.samples, sq.samples)]
    _write(args, f"modes_q{args.q}.csv", report_io.data_to_csv(data))
    return 0


def cmd_gram(args):
    rep = modes.operator_report(_pose(args), args.N)
    _write(args, "gram.json",
           json.dumps(rep.to_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def cmd_project(args):
    spec = _load_boundary(args.input)
    from .geometry import reexpress
    pose = spec.base if args.about is None else _load_boundary(args.about).base
    n = spec.perturbation if spec.perturbation is not None else \
        reexpress(spec, pose)
    coeffs, _, nperp, ortho = modes.five_mode_projection(n, pose)
    out = {"coefficients": {"a0": coeffs[0], "a1": coeffs[1], "b1": coeffs[2],
                            "a2": coeffs[3], "b2": coeffs[4]},
           "perp_sup": float(np.max(np.abs(nperp))),
           "orthogonality_check": ortho}
    _write(args, "projection.json",
           json.dumps(out, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_fit(args):
    spec = _load_boundary(args.input)
    pose0 = spec.base if args.e0 is None else EllipsePose(args.e0)
    res = modes.fit_ellipse(spec, pose0, polish=args.polish)
    out = {
        "coefficients": list(map(float, res.coefficients)),
        "pose": {"e": res.pose.eccentricity, "center": list(res.pose.center),
                 "tilt": res.pose.tilt, "scale": res.pose.scale},
        "c0_norm": res.c0_norm, "c1_norm": res.c1_norm,
        "iterations": res.iterations, "converged": res.converged,
        "diverged": res.diverged, "trace": res.trace,
    }
    _write(args, "fit.json", json.dumps(out, sort_keys=True, indent=2) + "\n")
    return 0


def _config_for(exp_id: str, args) -> ExperimentConfig:
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        overrides.pop("experiment", None)
    overrides.setdefault("seed", args.seed)
    overrides.setdefault("out_dir", args.out)
    return ExperimentConfig.for_experiment(exp_id, **overrides)


def _run_and_emit(exp_id: str, args):
    cfg = _config_for(exp_id, args)
    rep = run_experiment(cfg)
    report_io.emit(rep, formats=tuple(args.format.split(",")), out_dir=args.out)
    status = "PASS" if rep.passed else "FAIL"
    for name, flag in sorted(rep.passes.items()):
        print(f"{exp_id} {name}: {'PASS' if flag else 'FAIL'}")
    print(f"{exp_id}: {status} ({rep.wall_time_s:.2f} s)")
    return rep


def cmd_verify(args):
    rep = _run_and_emit(args.id, args)
    return 0 if rep.passed else 1


def cmd_verify_all(args):
    ids = list(ALL_EXPERIMENTS)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = {exp_id: pool.submit(_run_and_emit, exp_id, args)
                       for exp_id in ids}
            reports = {exp_id: fut.result() for exp_id, fut in futures.items()}
    else:
        reports = {exp_id: _run_and_emit(exp_id, args) for exp_id in ids}
    cov = coverage(reports)
    print(f"operation coverage: {'complete' if cov['complete'] else 'MISSING'}")
    if not cov["complete"]:
        for op in cov["missing"]:
            print(f"  missing: {op}")
    ok = all(r.passed for r in reports.values()) and cov["complete"]
    print("verify-all:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="caustica",
        description="numerical laboratory for convex planar billiards")
    ap.add_argument("--config", default=None, help="JSON experiment config")
    ap.add_argument("--out", default="reports", help="output directory")
    ap.add_argument("--format", default="json,csv,svg",
                    help="comma-separated report formats")
    ap.add_argument("--seed", type=int, default=20260810)
    ap.add_argument("--threads", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("orbit", help="iterate the billiard map and dump CSV")
    _add_pose_args(p)
    p.add_argument("--input", default=None,
                   help="boundary spec JSON (overrides the pose flags)")
    p.add_argument("--s0", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--integral", action="store_true",
                   help="include the elliptic first integral column")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("caustic", help="confocal caustic of rotation number 1/q")
    _add_pose_args(p)
    p.add_argument("--q", type=int, default=5)
    p.set_defaults(func=cmd_caustic)

    p = sub.add_parser("chart", help="action-angle chart table")
    _add_pose_args(p)
    p.add_argument("--q", type=int, default=5)
    p.set_defaults(func=cmd_chart)

    p = sub.add_parser("qgon", help="maximal-perimeter inscribed polygon")
    _add_pose_args(p)
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--s0", type=float, default=0.0)
    p.set_defaults(func=cmd_qgon)

    p = sub.add_parser("defect", help="perimeter-defect scan over epsilon")
    _add_pose_args(p)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--mode", type=int, default=5,
                   help="cosine frequency of the perturbation direction")
    p.add_argument("--eps", type=float, nargs="+",
                   default=[3e-5, 1e-4, 3e-4, 1e-3])
    p.add_argument("--theta-grid", type=int, default=64)
    p.set_defaults(func=cmd_defect)

    p = sub.add_parser("modes", help="deformed Fourier mode tables")
    _add_pose_args(p)
    p.add_argument("--q", type=int, default=5)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("gram", help="operator identity-gap report")
    _add_pose_args(p)
    p.add_argument("--N", type=int, default=64)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("project", help="five-mode projection of a boundary")
    p.add_argument("--input", required=True, help="boundary spec JSON")
    p.add_argument("--about", default=None,
                   help="boundary spec JSON whose base ellipse to project about")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fit", help="iterated best-ellipse fit")
    p.add_argument("--input", required=True, help="boundary spec JSON")
    p.add_argument("--e0", type=float, default=None,
                   help="eccentricity of the starting ellipse")
    p.add_argument("--polish", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="run one experiment")
    p.add_argument("id", choices=ALL_EXPERIMENTS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("verify-all", help="run every experiment")
    p.set_defaults(func=cmd_verify_all)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
