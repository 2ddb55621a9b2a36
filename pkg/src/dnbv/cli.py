"""Command-line entry point: ``dnbv <command> [options]``.

Exit codes: 0 success, 1 validation error (bad input files or flags),
2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .dome import (
    DEFAULT_RADIUS,
    DEFAULT_SUBDIVISION,
    DEFAULT_THETA_LIM,
    POLE_ORIENTATIONS,
    build_dome,
    write_face_csv,
    write_obj,
)
from .evaluation import evaluate, export_dome_occlusion, occlusion_csv
from .joints import synth_joint_table, write_joint_table
from .objective import DEFAULT_WEIGHTS, ObjectiveWeights, PlannerState, p_total
from .occupancy import observe
from .planner import PlannerConfig, next_state, replay
from .ply import read_ply
from .scenario import load_poses, load_scenario
from .synthetic import OccluderScript, desk_script, generate_synthetic
from .training import (
    DEFAULT_ALPHAS,
    ScoringWeights,
    TrainingSet,
    behavior_table_csv,
    cross_validate,
    explore_alphas,
    fit_weights,
    select_alphas,
)

log = logging.getLogger("dnbv")


class UsageError(ValueError):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _weights(args) -> ObjectiveWeights:
    if getattr(args, "weights", None):
        return ObjectiveWeights.load(args.weights)
    return DEFAULT_WEIGHTS


def _scenario_paths(args) -> List[Path]:
    paths = [Path(p) for p in (args.config or [])]
    if getattr(args, "set", None):
        base = Path(args.set).parent
        for line in Path(args.set).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                p = Path(line)
                paths.append(p if p.is_absolute() else base / p)
    if not paths:
        raise UsageError("no scenarios given (use --config or --set)")
    return paths


def cmd_dome_build(args) -> int:
    if args.config:
        dome = load_scenario(args.config).dome
    else:
        dome = build_dome(args.subdiv, args.radius, args.theta_lim, pole=args.pole)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_face_csv(dome, out / "faces.csv")
    write_obj(dome, out / "dome.obj")
    print(f"{len(dome)} allowed viewpoints -> {out}")
    return 0


def cmd_project(args) -> int:
    scn = load_scenario(args.config)
    m = scn.occlusion(args.frame)
    if args.obj:
        export_dome_occlusion(m, scn.dome, args.obj, scn.m0)
    _emit(occlusion_csv(m, scn.m0), args.out)
    return 0


def cmd_score(args) -> int:
    scn = load_scenario(args.config)
    m = scn.occlusion(args.frame)
    state = PlannerState.at(scn.dome, scn.joint_map, args.current, m)
    bd = p_total(state, scn.dome, scn.joint_map, _weights(args), scn.m0)
    _emit(bd.to_csv(), args.out)
    return 0


def cmd_plan_step(args) -> int:
    scn = load_scenario(args.config)
    if args.ply:
        poses = load_poses(args.poses) if args.poses else scn.poses
        if len(args.ply) != len(poses):
            raise UsageError(f"{len(args.ply)} clouds for {len(poses)} sensor poses")
        clouds = [read_ply(p) for p in args.ply]
        _, m = observe(clouds, poses, scn.grid_spec, scn.dome)
    else:
        m = scn.occlusion(args.frame)
    state = PlannerState.at(scn.dome, scn.joint_map, args.current)
    decision = next_state(state, m, scn.dome, scn.joint_map, PlannerConfig(_weights(args), scn.m0))
    _emit(decision.to_record(), args.out)
    if args.breakdown:
        Path(args.breakdown).write_text(decision.breakdown.to_csv())
    return 0


def cmd_replay(args) -> int:
    scn = load_scenario(args.config)
    traj = replay(scn, args.start, PlannerConfig(_weights(args), scn.m0))
    _emit(traj.to_csv(), args.out)
    return 0


def cmd_train(args) -> int:
    data = TrainingSet(load_scenario(p) for p in _scenario_paths(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.alphas:
        alphas = ScoringWeights(*args.alphas)
    elif args.explore:
        alphas = None
    else:
        alphas = DEFAULT_ALPHAS
    if args.explore:
        rows = explore_alphas(data, free_gain=args.free_gain)
        (out / "behavior.csv").write_text(behavior_table_csv(rows))
        if alphas is None:
            alphas = select_alphas(rows).alphas
    fit = fit_weights(data.design(alphas), free_gain=args.free_gain)
    fit.weights.save(out / "weights.txt")
    print(f"alphas: {alphas.s:g} {alphas.d:g} {alphas.theta:g}")
    print(fit.weights.to_text(), end="")
    if len(data) >= 2:
        cv = cross_validate(data, alphas, args.split, free_gain=args.free_gain)
        (out / "cv.csv").write_text(cv.to_csv())
        s = cv.summary()
        print(f"cross-validation: {s['splits']} splits, test residual mean {s['test_mean']:.6g}")
    return 0


def cmd_eval(args) -> int:
    scenarios = [load_scenario(p) for p in _scenario_paths(args)]
    report = evaluate(scenarios, PlannerConfig(_weights(args), scenarios[0].m0), args.frame)
    _emit(report.to_text(), None)
    if args.out:
        Path(args.out).write_text(report.mismatches_csv())
    return 0


def cmd_synth(args) -> int:
    if args.script != "desk":
        raise UsageError(f"unknown script {args.script!r}")
    script: OccluderScript = desk_script()
    if args.empty:
        script = OccluderScript([[] for _ in script.frames], name="unoccluded")
    gt = _weights(args) if args.gt else None
    manifest = generate_synthetic(
        script, args.out, args.subdiv, args.radius, args.theta_lim, args.pole,
        gt_weights=gt, seed=args.seed,
    )
    print(manifest)
    return 0


def cmd_jointtable_synth(args) -> int:
    if args.config:
        dome = load_scenario(args.config).dome
    else:
        dome = build_dome(args.subdiv, args.radius, args.theta_lim, pole=args.pole)
    jm = synth_joint_table(dome, args.unreachable)
    write_joint_table(jm, args.out, dome.indices)
    print(f"{len(jm.configs)} reachable of {len(dome)} -> {args.out}")
    return 0


def _dome_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--subdiv", type=int, default=DEFAULT_SUBDIVISION)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    p.add_argument("--theta-lim", type=float, default=DEFAULT_THETA_LIM)
    p.add_argument("--pole", choices=POLE_ORIENTATIONS, default="vertex")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="dnbv", description="Dynamic next-best-view planning on a dome.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    dome = sub.add_parser("dome", help="dome meshes")
    dsub = dome.add_subparsers(dest="action", required=True, parser_class=Parser)
    p = dsub.add_parser("build", help="write faces.csv and dome.obj")
    p.add_argument("--config", help="take dome settings from a scenario manifest")
    _dome_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_dome_build)

    p = sub.add_parser("project", help="occlusion vector of one frame as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--obj", help="also export the dome OBJ with a sidecar CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("score", help="objective breakdown for one frame and state")
    p.add_argument("--config", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--current", type=int, required=True)
    p.add_argument("--weights", help="weights file (default: default weights)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    plan = sub.add_parser("plan", help="single planning decisions")
    psub = plan.add_subparsers(dest="action", required=True, parser_class=Parser)
    p = psub.add_parser("step", help="choose the next viewpoint")
    p.add_argument("--config", required=True, help="manifest supplying grid, dome and joints")
    p.add_argument("--ply", nargs="+", help="one cloud per sensor (default: a manifest frame)")
    p.add_argument("--poses", help="sensor pose file (default: the manifest's)")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--current", type=int, required=True)
    p.add_argument("--weights")
    p.add_argument("--breakdown", help="write the breakdown CSV here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan_step)

    p = sub.add_parser("replay", help="trajectory over all frames of a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--weights")
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("train", help="fit objective weights")
    p.add_argument("--config", action="append", help="scenario manifest (repeatable)")
    p.add_argument("--set", help="file listing scenario manifests, one per line")
    p.add_argument("--alphas", type=float, nargs=3, metavar=("S", "D", "THETA"))
    p.add_argument("--explore", action="store_true", help="run the 64-row alpha exploration")
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--free-gain", action="store_true", help="fit a positive gain with the weights")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compare single decisions with ground truth")
    p.add_argument("--config", action="append")
    p.add_argument("--set")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--weights")
    p.add_argument("--out", help="write the mismatch CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--config", help="unused; accepted for uniformity")
    p.add_argument("--script", default="desk")
    p.add_argument("--empty", action="store_true", help="same frames without occluders")
    _dome_flags(p)
    p.add_argument("--gt", action="store_true", help="write planner ground truth for frame 0")
    p.add_argument("--weights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    jt = sub.add_parser("jointtable", help="joint tables")
    jsub = jt.add_subparsers(dest="action", required=True, parser_class=Parser)
    p = jsub.add_parser("synth", help="write a synthetic joint table")
    p.add_argument("--config")
    _dome_flags(p)
    p.add_argument("--unreachable", type=int, nargs="*", default=[6, 7, 8])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_jointtable_synth)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"dnbv: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"dnbv: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"dnbv: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
