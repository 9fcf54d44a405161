"""Command-line surface for the optimization and certification pipeline.

Subcommands: ``optimize``, ``evaluate``, ``simulate``, ``cutplane``,
``fixture``.  Exit codes: 0 success/certified, 1 usage or config error,
2 input-mesh validation error, 3 completed without certification,
4 numerical failure.  All randomness flows from one seed (default 0) and
every report embeds the effective config, so runs are reproducible from
their artifacts.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, parse_platform
from .evaluate import (
    EvalReport,
    battery_sweep,
    certify,
    cut_plane,
    perturbation_battery,
    platform_test,
    trd,
)
from .fixtures import FIXTURE_NAMES, make_fixture
from .gradsim import AdjointError
from .losses import stable_equilibrium_loss
from .mass import compute_mass_properties
from .mesh import MeshError, ground_and_center, load_obj, save_obj
from .optimize import optimize
from .simulation import SimulationError, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_UNCERTIFIED = 3
EXIT_NUMERICAL = 4


def _load_canonical(path, density):
    mesh = load_obj(path)
    report = mesh.validate()
    if not report.ok:
        raise MeshError(f"{path}: " + "; ".join(report.errors))
    props = compute_mass_properties(mesh, density)
    canon, _ = ground_and_center(mesh, props.com)
    return canon


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(path, config, payload):
    doc = {"config": config.echo(), **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    return doc


def _gather_config(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "platform", None) is not None:
        parse_platform(args.platform)  # fail fast with a good message
        overrides["platform"] = args.platform
    if getattr(args, "t_end", None) is not None:
        overrides["sim.end_time"] = args.t_end
    if getattr(args, "trials", None) is not None:
        overrides["eval.trials"] = args.trials
    if getattr(args, "angles", None) is not None:
        try:
            angles = [float(a) for a in args.angles.split(",") if a]
        except ValueError:
            raise ConfigError(f"bad --angles list {args.angles!r}")
        overrides["eval.angles"] = angles
    return load_config(getattr(args, "config", None), overrides)


def cmd_optimize(args):
    cfg = _gather_config(args)
    mesh = _load_canonical(args.input, cfg.sim.density)
    out = _out_dir(args)
    result, history = optimize(mesh, cfg.optimizer, cfg.platform)
    save_obj(out / "optimized.obj", result)
    history.to_jsonl(out / "history.jsonl")
    cert = history.final_certification
    report = EvalReport(
        trd=cert.get("trd", float("nan")),
        success_rates={},
        platform_verdicts={"optimization": cert.get("certified", False)},
        stable_equilibrium_loss=cert.get("stable_equilibrium_loss",
                                         float("nan")),
        certified=bool(cert.get("certified", False)),
        seed=cfg.seed,
        params=cfg.sim.__dict__.copy(),
        extras={
            "early_stop": history.early_stop,
            "iterations": len(history.records),
            "mean_displacement": history.mean_displacement,
            "distorted": history.distorted,
        },
    )
    _write_report(out / "report.json", cfg, {"report": report.to_json()})
    if history.early_stop.startswith("aborted"):
        print(f"optimize: {history.early_stop}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"optimize: {history.early_stop or 'finished'}; "
          f"TRD={report.trd:.4f} certified={report.certified}")
    return EXIT_OK if report.certified else EXIT_UNCERTIFIED


def cmd_evaluate(args):
    cfg = _gather_config(args)
    mesh = _load_canonical(args.input, cfg.sim.density)
    out = _out_dir(args)
    cert = certify(mesh, cfg.sim, cfg.platform, cfg.optimizer.probe,
                   cfg.optimizer.trd_threshold)
    rates = battery_sweep(
        mesh, cfg.eval_angles, cfg.eval_trials, cfg.seed, cfg.sim,
        cfg.platform, threads=cfg.threads,
    )
    verdicts = {}
    for name, plat in (
        ("ground", parse_platform("ground")),
        ("incline10", parse_platform("incline:10")),
        ("sphere", parse_platform(
            f"sphere:0,0,{-mesh.bbox_height():g},{mesh.bbox_height():g}"
        )),
    ):
        ok, score, details = platform_test(mesh, plat, cfg.sim)
        verdicts[name] = {"verdict": ok, **details}
    report = EvalReport(
        trd=cert["trd"],
        success_rates={f"{a:g}": r for a, r in rates},
        platform_verdicts=verdicts,
        stable_equilibrium_loss=cert["stable_equilibrium_loss"],
        certified=cert["certified"],
        seed=cfg.seed,
        params=cfg.sim.__dict__.copy(),
    )
    _write_report(out / "report.json", cfg, {"report": report.to_json()})
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("phi_max,success_rate\n")
        for a, r in rates:
            fh.write(f"{a:g},{r:g}\n")
    print(f"evaluate: TRD={report.trd:.4f} certified={report.certified}")
    return EXIT_OK if report.certified else EXIT_UNCERTIFIED


def cmd_simulate(args):
    cfg = _gather_config(args)
    mesh = _load_canonical(args.input, cfg.sim.density)
    out = _out_dir(args)
    traj = simulate(mesh, params=cfg.sim, platform=cfg.platform,
                    record_stride=args.stride)
    traj.save(out / "trajectory.json")
    score = trd(traj, t_end=cfg.sim.end_time, quad_dt=cfg.quadrature_dt)
    props = compute_mass_properties(mesh, cfg.sim.density)
    stable = stable_equilibrium_loss(mesh.vertices, props.com,
                                     cfg.optimizer.probe)
    _write_report(out / "report.json", cfg, {
        "report": {"trd": score, "stable_equilibrium_loss": stable,
                   "steps": cfg.sim.n_steps},
    })
    print(f"simulate: {cfg.sim.n_steps} steps at dt={cfg.sim.dt:g}; "
          f"TRD={score:.4f}")
    return EXIT_OK


def cmd_cutplane(args):
    cfg = _gather_config(args)
    mesh = _load_canonical(args.input, cfg.sim.density)
    if args.height is None:
        raise ConfigError("cutplane requires --height")
    if not 0.0 < args.height < mesh.bbox_height():
        raise ConfigError(
            f"--height must lie in (0, {mesh.bbox_height():g})"
        )
    out = _out_dir(args)
    result = cut_plane(mesh, args.height)
    report = result.validate()
    if not report.ok:
        print("cutplane: result failed validation: "
              + "; ".join(report.errors), file=sys.stderr)
        return EXIT_NUMERICAL
    save_obj(out / "cut.obj", result)
    print(f"cutplane: wrote {out / 'cut.obj'} "
          f"({result.n_vertices} vertices, watertight="
          f"{report.is_watertight})")
    return EXIT_OK


def cmd_fixture(args):
    out = _out_dir(args)
    mesh = make_fixture(args.name)
    path = out / f"{args.name}.obj"
    save_obj(path, mesh)
    print(f"fixture: wrote {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="standable",
        description="Make meshes self-supporting: simulate, optimize, "
                    "certify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="input OBJ mesh")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--threads", type=int, help="parallel trial cap")
        p.add_argument("--platform",
                       help="ground | incline:<deg> | sphere:<cx,cy,cz,r>")
        p.add_argument("--t-end", dest="t_end", type=float,
                       help="simulation end time (s)")

    p_opt = sub.add_parser("optimize", help="refine a mesh until it stands")
    common(p_opt)
    p_opt.set_defaults(fn=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="TRD, battery and platforms")
    common(p_eval)
    p_eval.add_argument("--angles", help="comma list of phi_max values")
    p_eval.add_argument("--trials", type=int, help="battery trials per angle")
    p_eval.set_defaults(fn=cmd_evaluate)

    p_sim = sub.add_parser("simulate", help="forward simulation only")
    common(p_sim)
    p_sim.add_argument("--stride", type=int, default=1,
                       help="trajectory recording stride")
    p_sim.set_defaults(fn=cmd_simulate)

    p_cut = sub.add_parser("cutplane", help="flat-cut baseline")
    common(p_cut)
    p_cut.add_argument("--height", type=float, help="cut height (m)")
    p_cut.set_defaults(fn=cmd_cutplane)

    p_fix = sub.add_parser("fixture", help="write a synthetic fixture")
    p_fix.add_argument("name", help=f"one of: {', '.join(FIXTURE_NAMES)}")
    common(p_fix, needs_input=False)
    p_fix.set_defaults(fn=cmd_fixture)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, AdjointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
