"""Command-line front end: generate, plan, simulate, export, benchmark.

Exit codes: 0 success, 2 bad input, 3 infeasible plan, 4 simulation diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import Config, load_config
from .dmg.graph import DMG, audit, node_lookup
from .errors import (DMGError, NoAngularComponent, NoNode, NoOpposition, ParseError,
                     PlanInfeasible, SimDivergence)
from .fixtures import FIXTURES
from .geometry.mesh import SurfaceModel, load_surface, palette, write_colored_ply
from .inhand.search import grasp_at
from .inhand.types import CostOptions, GraspConfig

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SIM = 0, 2, 3, 4

log = logging.getLogger("dmgplan")


class InputError(Exception):
    pass


def load_mesh(source: str, units_scale: float = 1.0) -> SurfaceModel:
    """A mesh file, or ``fixture:NAME`` for a built-in test shape."""
    if source is None:
        raise InputError("no mesh given (use --mesh)")
    if source.startswith("fixture:"):
        name = source.split(":", 1)[1]
        if name not in FIXTURES:
            raise InputError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
        return FIXTURES[name]()
    try:
        return load_surface(source, units_scale=units_scale)
    except FileNotFoundError as exc:
        raise InputError(f"mesh not found: {source}") from exc
    except (ParseError, OSError, ValueError) as exc:
        raise InputError(f"cannot read mesh {source}: {exc}") from exc


def _read_json_arg(text: str):
    if text.startswith("@"):
        return json.loads(Path(text[1:]).read_text())
    p = Path(text)
    if not text.lstrip().startswith("{") and p.exists():
        return json.loads(p.read_text())
    return json.loads(text)


def parse_grasp(dmg: DMG, model: SurfaceModel, text: str, gripper_id: int = 1) -> GraspConfig:
    """Grasp from JSON: a saved grasp, ``p1``/``p2`` points with an angle, or fingertip poses.

    Accepted forms (points in meters, angles in degrees of the principal
    component's frame)::

        {"p1": [x, y, z], "angle_deg": a, "p2": [x, y, z]}   # p2 optional
        {"pose1": 4x4, "pose2": 4x4}      # world fingertip poses; finger along local y
        {"principal": {...}, "secondary": {...}}               # as written in plan.json
    """
    from .regrasp.planner import canonical, opposing_grasp

    try:
        d = _read_json_arg(text)
    except (json.JSONDecodeError, OSError) as exc:
        raise InputError(f"cannot parse grasp {text!r}: {exc}") from exc
    if not isinstance(d, dict):
        raise InputError("grasp must be a JSON object")
    try:
        if "principal" in d:
            return canonical(dmg, GraspConfig.from_dict(d), gripper_id)
        if "pose1" in d:
            T1 = np.asarray(d["pose1"], dtype=float).reshape(4, 4)
            p1, orient = T1[:3, 3], T1[:3, 1]
            p2 = np.asarray(d["pose2"], dtype=float).reshape(4, 4)[:3, 3] if "pose2" in d else None
        else:
            p1 = np.asarray(d["p1"], dtype=float)
            orient = math.radians(float(d.get("angle_deg", 0.0)))
            p2 = np.asarray(d["p2"], dtype=float) if "p2" in d else None
        m1 = node_lookup(dmg, p1, orient, d.get("component"))
        if p2 is None:
            return opposing_grasp(dmg, model, m1.node.node_id, m1.step, gripper_id)
        world = dmg.frame_of(m1.node.node_id).direction(m1.angle)
        m2 = node_lookup(dmg, p2, world)
        return grasp_at(dmg, m1.node.node_id, m1.step, m2.node.node_id, gripper_id)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed grasp {text!r}: {exc}") from exc
    except (NoNode, NoAngularComponent, NoOpposition) as exc:
        raise InputError(f"grasp does not map into the DMG: {exc}") from exc


def _config(args) -> Config:
    cfg = load_config(args.config)
    return cfg.replace(
        r_area=args.r_area, r_angle=args.r_angle, delta_n=args.delta_n, delta_c=args.delta_c,
        finger_length=args.finger_length, max_opening=args.max_opening, zeta=args.zeta,
        alpha=args.alpha, policy=args.policy, seed_order=args.seed_order,
        units_scale=args.units_scale, dt=getattr(args, "dt", None),
        inhand_only=True if getattr(args, "inhand_only", False) else None,
        gripper_agnostic=True if getattr(args, "gripper_agnostic", False) else None)


def _out(obj):
    print(json.dumps(obj, indent=1, default=float))


def cmd_generate(args, cfg: Config) -> int:
    from .dmg.build import generate_dmg

    model = load_mesh(args.mesh, cfg.units_scale)
    dmg = generate_dmg(model, r_area=cfg.r_area, r_angle=cfg.r_angle, l_f=cfg.finger_length,
                       delta_n=cfg.delta_n, seed_order=cfg.seed_order,
                       finger_width=cfg.finger_width, source={"mesh": args.mesh})
    dmg.save(args.output)
    summary = dmg.summary()
    if args.audit:
        summary["audit_violations"] = len(audit(dmg))
    _out(summary)
    return EXIT_OK


def _load_dmg(path) -> DMG:
    try:
        return DMG.load(path)
    except FileNotFoundError as exc:
        raise InputError(f"DMG file not found: {path}") from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read DMG {path}: {exc}") from exc


def cmd_plan(args, cfg: Config) -> int:
    from .regrasp.planner import RegraspOptions, dmg_search

    dmg = _load_dmg(args.dmg)
    model = load_mesh(args.mesh or dmg.source.get("mesh"), cfg.units_scale)
    start = parse_grasp(dmg, model, args.start)
    goal = parse_grasp(dmg, model, args.goal)
    cost = CostOptions(w_rot=cfg.w_rot, w_pull=cfg.w_pull, max_primitives=cfg.max_primitives,
                       policy=cfg.policy)
    opts = RegraspOptions(d_max=cfg.max_opening, delta_c=cfg.delta_c, zeta=cfg.zeta,
                          eps_sep=cfg.eps_sep, cost=cost, inhand_only=cfg.inhand_only,
                          gripper_agnostic=cfg.gripper_agnostic)
    plan = dmg_search(dmg, model, start, goal, opts)
    plan.info["mesh"] = args.mesh or dmg.source.get("mesh")
    plan.save(args.output)
    _out({"mode": plan.mode, "phases": plan.names,
          "primitives": [len(p.sequence) if p.sequence is not None else 0 for p in plan.phases]})
    return EXIT_OK


def cmd_simulate(args, cfg: Config) -> int:
    from .execution.sim import SimConfig, config_error, simulate_plan
    from .regrasp.plan import ManipulationPlan

    try:
        plan = ManipulationPlan.load(args.plan)
    except FileNotFoundError as exc:
        raise InputError(f"plan file not found: {args.plan}") from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read plan {args.plan}: {exc}") from exc
    model = load_mesh(args.mesh or plan.info.get("mesh"), cfg.units_scale)
    sim_cfg = SimConfig(dt=cfg.dt, v_max=cfg.v_max, k_p=cfg.k_p, eps_sep=cfg.eps_sep)
    traj = simulate_plan(plan, model, sim_cfg, cfg.alpha)
    traj.export_jsonl(args.output)
    if args.ply_dir:
        traj.export_ply(args.ply_dir, model, args.ply_every)
    holder = plan.info.get("final_gripper", 1)
    dist, dang = config_error(traj, plan.goal, gripper=holder)
    _out({"states": len(traj.states), "duration_s": traj.final.t,
          "final_position_error_m": dist, "final_angle_error_deg": math.degrees(dang),
          "events": traj.events})
    return EXIT_OK


def cmd_export(args, cfg: Config) -> int:
    from .regrasp.plan import ManipulationPlan

    try:
        data = json.loads(Path(args.input).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"input not found: {args.input}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"cannot parse {args.input}: {exc}") from exc
    kind = data.get("kind")
    if kind == "dmg":
        dmg = DMG.from_dict(data)
        model = load_mesh(args.mesh or dmg.source.get("mesh"), cfg.units_scale)
        colors = _component_colors(dmg, model)
    elif kind == "plan":
        plan = ManipulationPlan.from_dict(data)
        if not args.dmg:
            raise InputError("plan export needs --dmg to map nodes to the surface")
        dmg = _load_dmg(args.dmg)
        model = load_mesh(args.mesh or dmg.source.get("mesh"), cfg.units_scale)
        colors = _plan_colors(dmg, model, plan)
    else:
        raise InputError(f"{args.input}: not a DMG or plan file")
    if len(dmg.triangle_patch) != len(model.triangles):
        raise InputError("mesh does not match the DMG (triangle count differs)")
    write_colored_ply(args.output, model, colors)
    _out({"written": str(args.output), "triangles": len(model.triangles)})
    return EXIT_OK


def _component_colors(dmg: DMG, model) -> np.ndarray:
    pal = palette(max(1, len(dmg.components)))
    colors = np.full((len(model.triangles), 3), 60, dtype=np.uint8)
    for tri, patch in enumerate(dmg.triangle_patch):
        nodes = dmg.nodes_of_patch(int(patch))
        if nodes:
            colors[tri] = pal[dmg.nodes[nodes[0]].component_id % len(pal)]
    return colors


def _plan_colors(dmg: DMG, model, plan) -> np.ndarray:
    colors = np.full((len(model.triangles), 3), 170, dtype=np.uint8)
    path_patches, grasp_patches = set(), set()
    for ph in plan.phases:
        if ph.sequence is not None:
            path_patches.update(dmg.nodes[n].patch_id for n in ph.sequence.nodes)
        for holds in (ph.before, ph.after):
            for g in holds.values():
                if g is not None:
                    for f in (g.principal, g.secondary):
                        if f.node_id is not None:
                            grasp_patches.add(dmg.nodes[f.node_id].patch_id)
    tp = np.asarray(dmg.triangle_patch)
    colors[np.isin(tp, list(path_patches))] = (220, 40, 40)
    colors[np.isin(tp, list(grasp_patches))] = (40, 90, 220)
    return colors


def cmd_benchmark(args, cfg: Config) -> int:
    from .dmg.build import generate_dmg

    model = load_mesh(args.mesh, cfg.units_scale)
    rows = []
    for ra in args.r_areas:
        for rg in args.r_angles:
            best = None
            for _ in range(args.repeat):
                dmg = generate_dmg(model, r_area=ra, r_angle=rg, l_f=cfg.finger_length,
                                   delta_n=cfg.delta_n, seed_order=cfg.seed_order,
                                   finger_width=cfg.finger_width)
                if best is None or dmg.timings["total"] < best.timings["total"]:
                    best = dmg
            rows.append({"r_area": ra, "r_angle": rg, "nodes": len(best.nodes),
                         "edges": best.num_edges, **best.timings})
    _out(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON settings file (default: $DMG_PLAN_CONFIG)")
    common.add_argument("--r-area", type=float, help="segmentation resolution (m)")
    common.add_argument("--r-angle", type=float, help="angular resolution (deg)")
    common.add_argument("--delta-n", type=float, help="max normal change along an edge")
    common.add_argument("--delta-c", type=float, help="antipodal normal tolerance")
    common.add_argument("--finger-length", type=float, help="finger length (m)")
    common.add_argument("--max-opening", type=float, help="max gripper opening (m)")
    common.add_argument("--zeta", type=float, help="support-grasp distance weighting")
    common.add_argument("--alpha", type=float,
                        help="weight of arm 1 in the absolute motion, in [0, 1]")
    common.add_argument("--policy", choices=("min_rotations", "stay_near_goal"))
    common.add_argument("--seed-order", choices=("scan", "index"))
    common.add_argument("--units-scale", type=float, help="mesh units to meters")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dmgplan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="build a DMG from a mesh")
    g.add_argument("mesh", help="OBJ/PLY file or fixture:NAME")
    g.add_argument("-o", "--output", default="dmg.json")
    g.add_argument("--audit", action="store_true", help="also run the invariant audit")

    pl = sub.add_parser("plan", parents=[common], help="plan from a start to a goal grasp")
    pl.add_argument("dmg")
    pl.add_argument("--mesh")
    pl.add_argument("--start", required=True, help="grasp JSON, a file, or @file")
    pl.add_argument("--goal", required=True)
    pl.add_argument("-o", "--output", default="plan.json")
    pl.add_argument("--inhand-only", action="store_true", help="fail instead of regrasping")
    pl.add_argument("--gripper-agnostic", action="store_true",
                    help="the goal may be held by either gripper")

    s = sub.add_parser("simulate", parents=[common], help="kinematic playback of a plan")
    s.add_argument("plan")
    s.add_argument("--mesh")
    s.add_argument("--dt", type=float)
    s.add_argument("-o", "--output", default="trajectory.jsonl")
    s.add_argument("--ply-dir", help="write PLY snapshots here")
    s.add_argument("--ply-every", type=int, default=50)

    e = sub.add_parser("export", parents=[common], help="colored PLY of a DMG or plan")
    e.add_argument("input", help="dmg.json or plan.json")
    e.add_argument("--mesh")
    e.add_argument("--dmg", help="DMG file (needed for plans)")
    e.add_argument("-o", "--output", default="export.ply")

    b = sub.add_parser("benchmark", parents=[common], help="generation time over resolutions")
    b.add_argument("--mesh", default="fixture:box")
    b.add_argument("--r-areas", type=float, nargs="+", default=[0.02, 0.015, 0.01])
    b.add_argument("--r-angles", type=float, nargs="+", default=[20.0, 10.0, 5.0])
    b.add_argument("--repeat", type=int, default=1)
    return p


COMMANDS = {"generate": cmd_generate, "plan": cmd_plan, "simulate": cmd_simulate,
            "export": cmd_export, "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except PlanInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimDivergence as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_SIM
    except (InputError, ValueError, OSError, DMGError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
