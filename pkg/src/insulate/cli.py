"""Command line entry point: ``insulate {radial,shape-opt,phase-field,analyze,defaults}``.

Exit status is 0 on success, 2 for bad input (configuration, preconditions)
and 3 when a solver fails.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import config as config_mod
from .errors import PreconditionError, SolverError

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


def build_problem(cfg: dict):
    from .model import Disk, ProblemConfig, StarDomain, Union2

    o = cfg["omega"]
    if len(o["center"]) != 2:
        raise config_mod.ConfigError("omega.center needs two numbers")
    if o["kind"] == "disk":
        omega = Disk(o["center"], o["radius"])
    elif o["kind"] == "star":
        omega = StarDomain(o["center"], o["a0"], o["a"], o["b"])
    else:
        if len(o["second_center"]) != 2:
            raise config_mod.ConfigError("omega.second_center needs two numbers")
        omega = Union2(Disk(o["center"], o["radius"]), Disk(o["second_center"], o["second_radius"]))
    p = cfg["problem"]
    return ProblemConfig(p["dim"], p["robin_h"], p["volume_cost"], omega, p["allow_degenerate"])


def _body_radius(omega) -> float:
    from .model import Disk, Union2

    if isinstance(omega, Union2):
        omega = omega.first
    if isinstance(omega, Disk):
        return omega.radius
    return math.sqrt(omega.area / math.pi)


# ---------------------------------------------------------------- subcommands

def cmd_radial(cfg: dict, out: Path, seed: int) -> list[Path]:
    from .io import write_table
    from .radial import optimize_radius, radial_profile

    p = cfg["problem"]
    rho0 = _body_radius(build_problem(cfg).omega)
    hs = p["sweep_h"] or (p["robin_h"],)
    cs = p["sweep_volume_cost"] or (p["volume_cost"],)
    rows = []
    for h in hs:
        for c0 in cs:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                R, F, e = optimize_radius(p["dim"], h, c0, rho0)
            u_out = radial_profile(p["dim"], h, rho0, R, c0).u_outer
            rows.append((float(h), float(c0), float(rho0), float(R), float(F), e.dirichlet,
                         e.surface, e.volume, float(u_out), int(R == rho0)))
    path = write_table(out / "radial.csv", ("h", "volume_cost", "rho0", "R_star", "F_star",
                                             "dirichlet", "surface", "volume", "u_outer",
                                             "detached"), rows)
    for r in rows:
        print(f"h={r[0]:g} C0={r[1]:g}  R*={r[3]:.10g}  F*={r[4]:.10g}")
    return [path]


def cmd_shape_opt(cfg: dict, out: Path, seed: int) -> list[Path]:
    from .io import write_json, write_table, write_trace
    from .model import Disk
    from .radial import optimize_radius
    from .robin import StarShape
    from .shape_opt import ShapeOptOptions, circle_with_mode, optimize_shape

    prob = build_problem(cfg)
    s, sv = cfg["shape"], cfg["solver"]
    center = prob.omega.center if hasattr(prob.omega, "center") else (0.0, 0.0)
    if s["init_mode"] > 0:
        init = circle_with_mode(s["init_radius"], s["init_mode"], s["init_amplitude"],
                                center, s["modes"])
    else:
        init = StarShape.circle(s["init_radius"], center, s["modes"])
    opts = ShapeOptOptions(n_s=sv["n_s"], n_theta=sv["n_theta"], modes=s["modes"],
                           max_iter=s["max_iter"], tol=s["tol"], gradient=s["gradient"],
                           fd_fallback=s["fd_fallback"], gap_min=sv["gap_min"] or None)
    res = optimize_shape(prob, init, opts)
    paths = [write_trace(out / "trace.csv", [(i, e, g) for i, (e, g) in enumerate(res.trace)])]
    theta = np.linspace(0.0, 2 * np.pi, s["boundary_samples"], endpoint=False)
    r = res.shape.radius(theta)[0]
    cx, cy = res.shape.center
    paths.append(write_table(out / "boundary.csv", ("theta", "r", "x", "y"),
                             [(float(t), float(a), float(cx + a * np.cos(t)), float(cy + a * np.sin(t)))
                              for t, a in zip(theta, r)]))
    summary = {"energy": res.energy.as_dict(), "converged": res.converged,
               "detached": res.detached, "tie": res.tie, "message": res.message,
               "iterations": len(res.trace) - 1,
               "stationarity_residual": res.stationarity_residual,
               "coefficients": res.shape.vector().tolist()}
    if isinstance(prob.omega, Disk) and prob.omega.center == center:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            R, F, _ = optimize_radius(2, prob.robin_h, prob.volume_cost, prob.omega.radius)
        summary["oracle"] = {"R_star": R, "F_star": F,
                             "relative_energy_gap": (res.energy.total - F) / F if F else 0.0}
    paths.append(write_json(out / "result.json", summary))
    print(f"final energy {res.energy.total:.10g} ({res.message})")
    return paths


def cmd_phase_field(cfg: dict, out: Path, seed: int) -> list[Path]:
    from .analysis import check_lower_bound
    from .io import write_grid, write_json, write_table, write_trace
    from .phase_field import GridSpec, PFParams, at_minimize, extract_sets

    prob = build_problem(cfg)
    f = cfg["phase_field"]
    p = PFParams(n_stages=f["n_stages"], k_eps=f["k_eps"], delta_cut=f["delta_cut"],
                 z_cut=f["z_cut"], jump_threshold=f["jump_threshold"],
                 max_alternations=f["max_alternations"], tol=f["tol"],
                 relaxation=f["relaxation"], init_noise=f["init_noise"])
    center = tuple(cfg["omega"]["center"])
    res = at_minimize(prob, GridSpec(f["n"], f["half_width"], center), p, seed=seed)
    ext = extract_sets(res, p)
    paths = [write_grid(out / "u.grid", res.u), write_grid(out / "z.grid", res.z),
             write_grid(out / "u_sharp.grid", ext.u),
             write_grid(out / "A.grid", res.u.with_values(ext.A.astype(float))),
             write_grid(out / "K.grid", res.u.with_values(ext.K.astype(float))),
             write_grid(out / "labels.grid", res.u.with_values(ext.labels.astype(float)))]
    rows, k = [], 0
    for st in res.stages:
        prev = None
        for e in st.energies:
            change = 0.0 if prev is None else (prev - e.total) / max(prev, 1e-300)
            rows.append((k, e, change))
            prev, k = e.total, k + 1
    paths.append(write_trace(out / "trace.csv", rows))
    paths.append(write_table(out / "stages.csv",
                             ("eps", "alternations", "converged", "F_eps", "sbv_total"),
                             [(st.eps, st.alternations, int(st.converged),
                               st.energies[-1].total, st.sbv.total) for st in res.stages]))
    lb = check_lower_bound(ext.u, p.delta_cut)
    paths.append(write_json(out / "summary.json", {
        "F_eps": res.energy.as_dict(), "sbv": ext.energy.as_dict(),
        "positive_components": ext.n_positive, "zero_components": ext.n_zero,
        "two_sided_length": ext.two_sided.length, "jump_length": ext.jumps.length,
        "delta_obs": lb.delta_obs, "converged": res.converged}))
    print(f"F_eps {res.energy.total:.8g}  sharp {ext.energy.total:.8g}  "
          f"components {ext.n_positive}")
    return paths


def cmd_analyze(cfg: dict, out: Path, seed: int) -> list[Path]:
    from . import analysis
    from .io import read_grid, write_json
    from .model import jump_faces

    a = cfg["analysis"]
    if not a["field"]:
        raise config_mod.ConfigError("analyze needs a field (--field or analysis.field)")
    u = read_grid(a["field"])
    op = a["op"]
    if op == "lower-bound":
        rep = analysis.check_lower_bound(u, a["delta_cut"])
        report = {"delta_obs": rep.delta_obs, "gap_mass": rep.gap_mass,
                  "halo_budget": rep.halo_budget, "delta_p05": rep.delta_p05,
                  "gap_mass_p05": rep.gap_mass_p05, "violation": rep.violation}
    elif op == "density":
        K = jump_faces(u, a["tau"])
        pts = _points(a, K)
        radii = a["radii"] or tuple(float(r) for r in np.geomspace(8, 32, 5) * u.dx)
        rep = analysis.density_profile(K, pts, radii)
        report = {"entries": rep.entries, "skipped": rep.skipped,
                  "min_ratio": rep.min_ratio, "max_ratio": rep.max_ratio}
    elif op == "blowup":
        K = jump_faces(u, a["tau"])
        pts = _points(a, K)
        radii = a["radii"] or tuple(float(r) for r in np.geomspace(32, 4, 6) * u.dx)
        reps = [analysis.blowup_scan(u, pt, radii, eps_flat=a["eps_flat"], tau=a["tau"])
                for pt in pts]
        report = {"scans": [{"point": r.point, "radii": r.radii, "e_r": r.e_r,
                             "flatness": r.flatness, "classification": r.classification,
                             "energy_floor": r.energy_floor, "note": r.note} for r in reps]}
    else:
        from scipy import ndimage

        zero = u.values <= a["delta_cut"]
        labels, n = ndimage.label(zero)
        holes = [labels == k for k in range(1, n + 1)]
        K = jump_faces(u, a["tau"])
        reps = analysis.hole_geometry(holes, u.dx, K)
        report = {"holes": [r.__dict__ for r in reps]}
    report["op"] = op
    path = write_json(out / "report.json", report)
    if op == "lower-bound":
        print(f"delta_obs = {report['delta_obs']:.10g}")
    return [path]


def _points(a: dict, K) -> list:
    if a["points"]:
        v = np.asarray(a["points"], dtype=float)
        if v.size % 2:
            raise config_mod.ConfigError("analysis.points needs x, y pairs")
        return [tuple(p) for p in v.reshape(-1, 2)]
    x, y, _ = K.midpoints()
    if x.size == 0:
        raise PreconditionError("the field has no jump faces to sample")
    idx = np.linspace(0, x.size - 1, min(4, x.size)).astype(int)
    return [(float(x[i]), float(y[i])) for i in idx]


COMMANDS = {"radial": cmd_radial, "shape-opt": cmd_shape_opt,
            "phase-field": cmd_phase_field, "analyze": cmd_analyze}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="insulate", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"insulate {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "defaults"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="configuration file")
        sp.add_argument("--out", type=Path, help="output directory (fallback: $INSULATE_OUT)")
        sp.add_argument("--seed", type=int, default=0, help="seed (u64) for noisy starts")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        dest="overrides", help="override one configuration value")
        sp.add_argument("--strict", action="store_true", help="reject unknown configuration keys")
        if name == "analyze":
            sp.add_argument("--field", type=Path, help="grid field to analyse")
            sp.add_argument("--op", choices=("lower-bound", "density", "blowup", "holes"))
    return ap


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if not 0 <= args.seed < 2**64:
            raise config_mod.ConfigError("--seed must be an unsigned 64-bit integer")
        overrides = list(args.overrides)
        if args.command == "analyze":
            if args.field is not None:
                overrides.append(f"analysis.field={args.field}")
            if args.op is not None:
                overrides.append(f"analysis.op={args.op}")
        cfg = config_mod.load(args.config, overrides, strict=args.strict)
        if args.command == "defaults":
            sys.stdout.write(config_mod.dump(cfg, with_comments=True))
            return EXIT_OK
        out = Path(args.out or cfg["output"]["dir"] or os.environ.get("INSULATE_OUT") or "out")
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        artifacts = COMMANDS[args.command](cfg, out, args.seed)
        echo = out / "config.ini"
        echo.write_text(config_mod.dump(cfg))
        from .io import write_manifest

        write_manifest(out, config={s: {k: config_mod.format_value(v) for k, v in keys.items()}
                                    for s, keys in cfg.items()},
                       version=__version__, seed=args.seed,
                       wall_time=time.perf_counter() - t0, artifacts=[*artifacts, echo])
        return EXIT_OK
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
