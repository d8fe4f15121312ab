"""Command-line front end: mesh/solve/sweep/ratefit/nodal/almgren/beta/blowup/matrixcheck.

Every subcommand reads its parameters from flags and/or a JSON config file
(flags win), writes delimited/JSON outputs plus rendered figures into the
output directory, and drops a manifest.json recording the resolved
parameters, their hash, the seed, and library versions.  Identical config
and seed reproduce byte-identical delimited outputs.

Exit codes: 0 success, 2 argument errors (argparse), 3 malformed config,
4 missing input file, 5 runtime failure; nonzero exits print a JSON error
record to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, almgren, experiments, figures, limit_profile, spectral
from .abfem import Weight, assemble, solve_eigs
from .geometry import DomainSpec, PoleConfig, build_mesh, insert_cut, save_mesh

EXIT_BAD_CONFIG = 3
EXIT_MISSING_INPUT = 4
EXIT_RUNTIME = 5


class ConfigError(ValueError):
    pass


class MissingInputError(FileNotFoundError):
    pass


# ----------------------------------------------------------------------------
# shared plumbing
# ----------------------------------------------------------------------------

def _parse_domain(text: str) -> DomainSpec:
    parts = text.split(":")
    kind = parts[0]
    args = [float(p) for p in parts[1:]]
    try:
        if kind == "disk":
            return DomainSpec.disk(*(args or [1.0]))
        if kind == "sector":
            if not args:
                return DomainSpec.sector(math.pi / 4, 1.0)
            return DomainSpec.sector(*args)
        if kind == "half_disk":
            return DomainSpec.half_disk(*(args or [1.0]))
        if kind == "rectangle":
            if len(args) != 2:
                raise ConfigError("rectangle needs width:height")
            return DomainSpec.rectangle(*args)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown domain {kind!r}")


def _parse_point(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return (float(text[0]), float(text[1]))
    xs = text.split(",")
    if len(xs) != 2:
        raise ConfigError(f"point must be 'x,y': {text!r}")
    return (float(xs[0]), float(xs[1]))


def _parse_weight(text) -> Weight:
    if text in (None, "1", 1, 1.0):
        return Weight.one()

    def func(pts):
        pts = np.atleast_2d(pts)
        ns = {"x": pts[:, 0], "y": pts[:, 1], "np": np, "pi": math.pi}
        return np.broadcast_to(np.asarray(eval(text, {"__builtins__": {}}, ns),
                                          dtype=float), (len(pts),)).copy()

    return Weight(func=func, name=str(text))


def _load_config(path) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise MissingInputError(path)
    try:
        with open(path) as f:
            cfg = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _resolve(args, cfg: dict, key: str, default=None):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def _write_manifest(outdir, command, params, seed, outputs):
    canon = json.dumps(params, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "params": params,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "seed": seed,
        "versions": {
            "abspectra": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
        "outputs": sorted(outputs),
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _outdir(args, command):
    out = args.out or os.path.join("runs", command)
    os.makedirs(out, exist_ok=True)
    return out


def _dump_json(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def _cmd_mesh(args):
    cfg = _load_config(args.config)
    domain = _parse_domain(_resolve(args, cfg, "domain", "disk"))
    h = float(_resolve(args, cfg, "h", 0.1))
    grading = float(_resolve(args, cfg, "grading", 2.0))
    mesh = build_mesh(domain, h, grading)
    pole_txt = _resolve(args, cfg, "pole")
    if pole_txt is not None:
        cut_txt = _resolve(args, cfg, "cut_to")
        pole = PoleConfig(a=_parse_point(pole_txt),
                          cut_to=None if cut_txt is None else _parse_point(cut_txt))
        mesh = insert_cut(mesh, pole)
    out = _outdir(args, "mesh")
    outputs = []
    mesh_path = os.path.join(out, "mesh.abmesh")
    save_mesh(mesh, mesh_path)
    outputs.append("mesh.abmesh")
    stats = {
        "n_vertices": mesh.num_vertices,
        "n_triangles": mesh.num_triangles,
        "min_angle_deg": mesh.min_angle_deg(),
        "area": float(mesh.triangle_areas().sum()),
        "n_cut_pairs": int(len(mesh.cut_pairs)),
    }
    _dump_json(stats, os.path.join(out, "mesh_stats.json"))
    outputs.append("mesh_stats.json")
    if not args.no_figures:
        figures.plot_mesh(mesh, os.path.join(out, "mesh.png"))
        outputs.append("mesh.png")
    params = {"domain": domain.to_dict(), "h": h, "grading": grading,
              "pole": pole_txt and list(_parse_point(pole_txt))}
    _write_manifest(out, "mesh", params, None, outputs)
    print(json.dumps(stats))
    return 0


def _cmd_solve(args):
    cfg = _load_config(args.config)
    domain = _parse_domain(_resolve(args, cfg, "domain", "disk"))
    h = float(_resolve(args, cfg, "h", 0.06))
    grading = float(_resolve(args, cfg, "grading", 2.0))
    order = int(_resolve(args, cfg, "order", 2))
    k = int(_resolve(args, cfg, "k", 1))
    seed = int(_resolve(args, cfg, "seed", 1234))
    weight = _parse_weight(_resolve(args, cfg, "weight"))
    mesh = build_mesh(domain, h, grading)
    pole_txt = _resolve(args, cfg, "pole")
    if pole_txt is not None:
        cut_txt = _resolve(args, cfg, "cut_to")
        pole = PoleConfig(a=_parse_point(pole_txt),
                          cut_to=None if cut_txt is None else _parse_point(cut_txt))
        mesh = insert_cut(mesh, pole)
    result = solve_eigs(assemble(mesh, weight, order), k, seed=seed)
    out = _outdir(args, "solve")
    outputs = []
    rec = result.to_record()
    _dump_json(rec, os.path.join(out, "eigs.json"))
    outputs.append("eigs.json")
    if args.dump_vectors:
        for i in range(len(result.lambdas)):
            name = f"vector_{i + 1}.txt"
            result.dump_vector(i + 1, os.path.join(out, name))
            outputs.append(name)
        save_mesh(mesh, os.path.join(out, "mesh.abmesh"))
        outputs.append("mesh.abmesh")
    if not args.no_figures:
        figures.plot_field(mesh, result.vectors[:, 0],
                           os.path.join(out, "eigenfunction_1.png"),
                           title=f"lambda_1 = {result.lambdas[0]:.6f}")
        outputs.append("eigenfunction_1.png")
    params = {"domain": domain.to_dict(), "h": h, "grading": grading,
              "order": order, "k": k, "weight": weight.name,
              "pole": pole_txt and list(_parse_point(pole_txt))}
    _write_manifest(out, "solve", params, seed, outputs)
    print(json.dumps({"lambdas": rec["lambdas"]}))
    return 0


def _build_sweep_spec(args, cfg) -> experiments.SweepSpec:
    domain = _parse_domain(_resolve(args, cfg, "domain", "half_disk"))
    k_list = _resolve(args, cfg, "k_list", [1])
    if isinstance(k_list, str):
        k_list = [int(v) for v in k_list.split(",")]
    b = _parse_point(_resolve(args, cfg, "b", "0,0"))
    direction = _parse_point(_resolve(args, cfg, "direction", "1,0"))
    nrm = math.hypot(*direction)
    direction = (direction[0] / nrm, direction[1] / nrm)
    distances = _resolve(args, cfg, "distances")
    if distances is None:
        t0 = float(_resolve(args, cfg, "t_max", 0.1))
        t1 = float(_resolve(args, cfg, "t_min", 0.02))
        n = int(_resolve(args, cfg, "n_poles", 8))
        distances = list(np.geomspace(t0, t1, n))
    elif isinstance(distances, str):
        distances = [float(v) for v in distances.split(",")]
    return experiments.SweepSpec(
        domain=domain,
        k_list=tuple(int(k) for k in k_list),
        b=b,
        direction=direction,
        distances=tuple(float(t) for t in distances),
        h_max=float(_resolve(args, cfg, "h", 0.06)),
        grading=float(_resolve(args, cfg, "grading", 2.0)),
        order=int(_resolve(args, cfg, "order", 2)),
        seed=int(_resolve(args, cfg, "seed", 1234)),
        weight=_parse_weight(_resolve(args, cfg, "weight")),
        gauge_check=not bool(_resolve(args, cfg, "no_gauge_check", False)),
    )


def _cmd_sweep(args):
    cfg = _load_config(args.config)
    spec = _build_sweep_spec(args, cfg)
    records = experiments.run_sweep(spec)
    out = _outdir(args, "sweep")
    outputs = []
    csv_path = os.path.join(out, "sweep.csv")
    experiments.sweep_to_csv(records, spec.k_list, csv_path)
    outputs.append("sweep.csv")
    diag = [{"t": r.t, "failed": r.failed, "gauge_rel": r.gauge_rel,
             "n_vertices": r.n_vertices, "error": r.error} for r in records]
    _dump_json(diag, os.path.join(out, "sweep_diagnostics.json"))
    outputs.append("sweep_diagnostics.json")
    if not args.no_figures:
        figures.plot_sweep(records, spec.k_list, os.path.join(out, "sweep.png"))
        outputs.append("sweep.png")
    _write_manifest(out, "sweep", spec.to_dict(), spec.seed, outputs)
    ok = [r for r in records if not r.failed]
    print(json.dumps({"n_poles": len(records), "n_failed": len(records) - len(ok)}))
    return 0


def _cmd_ratefit(args):
    cfg = _load_config(args.config)
    csv_path = _resolve(args, cfg, "csv")
    if csv_path is None:
        raise ConfigError("ratefit needs --csv")
    if not os.path.exists(csv_path):
        raise MissingInputError(csv_path)
    records, ks = experiments.records_from_csv(csv_path)
    k = int(_resolve(args, cfg, "k", ks[0]))
    window = _resolve(args, cfg, "window")
    if window is None:
        ts = [r.t for r in records]
        window = (min(ts), max(ts))
    elif isinstance(window, str):
        window = tuple(float(v) for v in window.split(","))
    fit = experiments.fit_rate(records, k, tuple(window))
    out = _outdir(args, "ratefit")
    outputs = []
    _dump_json(fit.to_dict(), os.path.join(out, "ratefit.json"))
    outputs.append("ratefit.json")
    if not args.no_figures:
        figures.plot_sweep(records, [k], os.path.join(out, "ratefit.png"),
                           fits={k: fit})
        outputs.append("ratefit.png")
    _write_manifest(out, "ratefit", {"csv": csv_path, "k": k,
                                     "window": list(window)}, None, outputs)
    print(json.dumps(fit.to_dict()))
    return 0


def _cmd_nodal(args):
    cfg = _load_config(args.config)
    domain = _parse_domain(_resolve(args, cfg, "domain", "half_disk"))
    h = float(_resolve(args, cfg, "h", 0.05))
    grading = float(_resolve(args, cfg, "grading", 2.0))
    k = int(_resolve(args, cfg, "k", 2))
    seed = int(_resolve(args, cfg, "seed", 1234))
    mesh = build_mesh(domain, h, grading)
    pole_txt = _resolve(args, cfg, "pole")
    if pole_txt is not None:
        mesh = insert_cut(mesh, PoleConfig(a=_parse_point(pole_txt)))
    result = solve_eigs(assemble(mesh), k, seed=seed)
    nodal = spectral.extract_nodal_set(result, k)
    out = _outdir(args, "nodal")
    outputs = []
    nodal.save_csv(os.path.join(out, "nodal.csv"))
    outputs.append("nodal.csv")
    _dump_json({"n_curves": len(nodal.polylines),
                "endpoint_tags": [list(t) for t in nodal.endpoint_tags]},
               os.path.join(out, "nodal_summary.json"))
    outputs.append("nodal_summary.json")
    if not args.no_figures:
        figures.plot_field(mesh, result.vectors[:, k - 1],
                           os.path.join(out, "field.png"),
                           title=f"eigenfunction {k}", nodal=nodal)
        outputs.append("field.png")
    _write_manifest(out, "nodal", {"domain": domain.to_dict(), "h": h, "k": k},
                    seed, outputs)
    print(json.dumps({"n_curves": len(nodal.polylines)}))
    return 0


def _cmd_almgren(args):
    cfg = _load_config(args.config)
    domain = _parse_domain(_resolve(args, cfg, "domain", "half_disk"))
    h = float(_resolve(args, cfg, "h", 0.05))
    grading = float(_resolve(args, cfg, "grading", 2.0))
    k = int(_resolve(args, cfg, "k", 1))
    seed = int(_resolve(args, cfg, "seed", 1234))
    pole = _parse_point(_resolve(args, cfg, "pole", "0.02,0"))
    radii_txt = _resolve(args, cfg, "radii", "0.05,0.45,20")
    if isinstance(radii_txt, str):
        lo, hi, n = radii_txt.split(",")
        radii = np.geomspace(float(lo), float(hi), int(n))
    else:
        radii = np.asarray(radii_txt, float)
    mesh = insert_cut(build_mesh(domain, h, grading), PoleConfig(a=pole))
    result = solve_eigs(assemble(mesh), k, seed=seed)
    fld = result.field(k)
    lam = float(result.lambdas[k - 1])
    trace = almgren.frequency_trace(fld, lam, pole, radii)
    dh = almgren.check_dH_identity(trace)
    out = _outdir(args, "almgren")
    outputs = []
    trace.save_csv(os.path.join(out, "trace.csv"))
    outputs.append("trace.csv")
    _dump_json({"lambda": lam, "dH_max_residual": dh.max_residual,
                "r0": trace.r0},
               os.path.join(out, "almgren_summary.json"))
    outputs.append("almgren_summary.json")
    if not args.no_figures:
        figures.plot_trace(trace, os.path.join(out, "trace.png"))
        outputs.append("trace.png")
    _write_manifest(out, "almgren", {"domain": domain.to_dict(), "h": h,
                                     "k": k, "pole": list(pole)}, seed, outputs)
    print(json.dumps({"dH_max_residual": dh.max_residual}))
    return 0


def _cmd_beta(args):
    cfg = _load_config(args.config)
    R = float(_resolve(args, cfg, "R", 8.0))
    h = float(_resolve(args, cfg, "h", 0.1))
    grading = float(_resolve(args, cfg, "grading", 2.0))
    profile = limit_profile.build_profile(R=R, h=h, grading=grading)
    out = _outdir(args, "beta")
    outputs = []
    profile.save(os.path.join(out, "profile.json"))
    outputs.append("profile.json")
    if not args.no_figures:
        figures.plot_profile(profile, os.path.join(out, "profile.png"))
        outputs.append("profile.png")
    _write_manifest(out, "beta", {"R": R, "h": h, "grading": grading},
                    None, outputs)
    print(json.dumps({"beta": profile.beta, "beta_flux": profile.beta_flux,
                      "b1": profile.b[1]}))
    return 0


def _cmd_blowup(args):
    cfg = _load_config(args.config)
    domain = _parse_domain(_resolve(args, cfg, "domain", "half_disk"))
    h = float(_resolve(args, cfg, "h", 0.05))
    grading = float(_resolve(args, cfg, "grading", 2.0))
    k = int(_resolve(args, cfg, "k", 1))
    seed = int(_resolve(args, cfg, "seed", 1234))
    K = float(_resolve(args, cfg, "K", 4.0))
    a1s = _resolve(args, cfg, "a1", "0.08,0.04,0.02")
    if isinstance(a1s, str):
        a1s = [float(v) for v in a1s.split(",")]
    prof_path = _resolve(args, cfg, "profile")
    if prof_path is not None and not os.path.exists(prof_path):
        raise MissingInputError(prof_path)
    min_radius = 0.0
    if prof_path is not None:
        profile = limit_profile.LimitProfile.load(prof_path)
        # a reloaded profile has no interior field: compare on the series
        # region 1 < |y| < K only
        min_radius = 1.0
    else:
        profile = limit_profile.build_profile(
            R=float(_resolve(args, cfg, "R", 8.0)),
            h=float(_resolve(args, cfg, "profile_h", 0.1)))
    reports = []
    for a1 in a1s:
        mesh = insert_cut(build_mesh(domain, h, grading),
                          PoleConfig(a=(a1, 0.0), cut_to=(0.0, 0.0)))
        result = solve_eigs(assemble(mesh), k, seed=seed)
        reports.append(experiments.blowup_compare(result, k, profile, K,
                                                  min_radius=min_radius))
    out = _outdir(args, "blowup")
    outputs = []
    _dump_json([r.to_dict() for r in reports], os.path.join(out, "blowup.json"))
    outputs.append("blowup.json")
    if not args.no_figures:
        figures.plot_blowup(reports, os.path.join(out, "blowup.png"))
        outputs.append("blowup.png")
    _write_manifest(out, "blowup", {"domain": domain.to_dict(), "h": h,
                                    "k": k, "K": K, "a1": list(a1s)},
                    seed, outputs)
    print(json.dumps({"l2": [r.l2_distance for r in reports]}))
    return 0


def _cmd_matrixcheck(args):
    cfg = _load_config(args.config)
    k = int(_resolve(args, cfg, "k", 2))
    lambdas = _resolve(args, cfg, "lambdas", "1,2")
    if isinstance(lambdas, str):
        lambdas = [float(v) for v in lambdas.split(",")]
    n = int(_resolve(args, cfg, "n", 1))
    C_k = float(_resolve(args, cfg, "Ck", 1.0))
    trials = int(_resolve(args, cfg, "trials", 32))
    seed = int(_resolve(args, cfg, "seed", 1234))
    eps = _resolve(args, cfg, "eps", "0.04,0.02,0.01,0.005")
    if isinstance(eps, str):
        eps = [float(v) for v in eps.split(",")]
    report = experiments.matrix_lemma_check(k, lambdas, n, C_k, trials=trials,
                                            eps_list=tuple(eps), seed=seed)
    out = _outdir(args, "matrixcheck")
    outputs = []
    _dump_json(report.to_dict(), os.path.join(out, "matrixcheck.json"))
    outputs.append("matrixcheck.json")
    if not args.no_figures:
        figures.plot_matrixcheck(report, os.path.join(out, "matrixcheck.png"))
        outputs.append("matrixcheck.png")
    _write_manifest(out, "matrixcheck",
                    {"k": k, "lambdas": list(lambdas), "n": n, "Ck": C_k,
                     "trials": trials, "eps": list(eps)}, seed, outputs)
    print(json.dumps({"C_fit": report.C_fit, "rel_error": report.rel_error}))
    return 0


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="abspectra",
        description="Aharonov-Bohm eigenvalue laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a (optionally cut) mesh")
    p.add_argument("--domain")
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    p.add_argument("--pole")
    p.add_argument("--cut-to", dest="cut_to")
    _add_common(p)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("solve", help="eigenvalues of one configuration")
    p.add_argument("--domain")
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--pole")
    p.add_argument("--cut-to", dest="cut_to")
    p.add_argument("--weight")
    p.add_argument("--dump-vectors", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="pole sweep toward a boundary point")
    for flag in ("--domain", "--b", "--direction", "--distances", "--k-list",
                 "--weight"):
        p.add_argument(flag, dest=flag[2:].replace("-", "_"))
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--n-poles", dest="n_poles", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ratefit", help="log-log rate fit of a sweep CSV")
    p.add_argument("--csv")
    p.add_argument("--k", type=int)
    p.add_argument("--window")
    _add_common(p)
    p.set_defaults(func=_cmd_ratefit)

    p = sub.add_parser("nodal", help="nodal set of an eigenfunction")
    p.add_argument("--domain")
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--pole")
    _add_common(p)
    p.set_defaults(func=_cmd_nodal)

    p = sub.add_parser("almgren", help="frequency trace of an eigenfunction")
    p.add_argument("--domain")
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--pole")
    p.add_argument("--radii", help="lo,hi,n geometric")
    _add_common(p)
    p.set_defaults(func=_cmd_almgren)

    p = sub.add_parser("beta", help="quarter-plane profile constant")
    p.add_argument("--R", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_beta)

    p = sub.add_parser("blowup", help="blow-up comparison against the profile")
    p.add_argument("--domain")
    p.add_argument("--h", type=float)
    p.add_argument("--grading", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--K", type=float)
    p.add_argument("--a1")
    p.add_argument("--profile")
    p.add_argument("--R", type=float)
    p.add_argument("--profile-h", dest="profile_h", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_blowup)

    p = sub.add_parser("matrixcheck", help="eigenvalue-drift matrix oracle")
    p.add_argument("--k", type=int)
    p.add_argument("--lambdas")
    p.add_argument("--n", type=int)
    p.add_argument("--Ck", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--eps")
    _add_common(p)
    p.set_defaults(func=_cmd_matrixcheck)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except MissingInputError as exc:
        json.dump({"error": {"type": "missing_input", "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return EXIT_MISSING_INPUT
    except ConfigError as exc:
        json.dump({"error": {"type": "config", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_BAD_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
