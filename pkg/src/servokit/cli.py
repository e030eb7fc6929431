"""Single command-line entry point wiring all modules.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 runtime stage
failure. Every run writes a manifest with a hash of its input files so two
runs with the same inputs and seed are reproducible byte for byte
(manifest timestamp aside).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .budget import budget_report, compute_power_check, DEFAULT_RATE_SWEEP_HZ
from .config import load_config, load_latency_profiles, load_topology
from .errors import ParseError, ServokitError, StageError, TargetNotFoundError, ValidationError
from .fuse import synthesize_fuses
from .ik import IkTask, solve_trajectory
from .model import register_to_torque
from .perception import Intrinsics, detect_and_locate, load_frame_png
from .powersim import (
    BusCommand,
    Scenario,
    check_budget,
    load_scenario,
    simulate,
    validate_scenario,
)
from .stiffness import REFERENCE_PROFILES, characterize
from .synthetic import load_scene, render
from .transforms import Transform, quat_matrix


def _hash_files(paths: list[Path]) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(args, inputs: list[Path], outputs: list[Path]) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": args.command,
        "config_hash": _hash_files(inputs),
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "outputs": sorted(str(Path(p).name) for p in outputs),
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


def _info(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _out_path(args, flag_value: str | None, default_name: str) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return Path(flag_value) if flag_value else out_dir / default_name


def cmd_validate(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    checks = [
        f"actuators: {len(cfg.topology.actuators)}",
        f"ports: {len(cfg.topology.ports)}",
        f"buses: {len(cfg.topology.buses)}",
        f"inrush entries: {len(cfg.load_model.inrush)}",
        f"chains: {sorted(cfg.chains)}",
        f"hsv labels: {sorted(cfg.hsv_labels)}",
    ]
    for line in checks:
        _info(args, "ok: " + line)
    print("valid")
    return []


def cmd_fuse(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    fuses = synthesize_fuses(cfg.topology, cfg.load_model, margin_registers=args.margin)
    out = _out_path(args, args.out, "fuses.json")
    payload = {
        "margin_registers": args.margin,
        "inrush": {str(a): d for a, d in sorted(cfg.load_model.inrush.items())},
        "fuses": [
            {
                "bus_id": f.bus_id,
                "torque_cap": f.torque_cap,
                "predicted_load_a": f.predicted_load,
                "port_limit_a": f.port_limit,
                "headroom_a": f.headroom,
            }
            for f in fuses
        ],
    }
    _write_json(out, payload)
    _info(args, f"wrote {out}")
    return [out]


def cmd_simulate(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    scenario = load_scenario(args.scenario)
    validate_scenario(scenario, cfg.topology, cfg.load_model)
    fuses = (
        synthesize_fuses(cfg.topology, cfg.load_model, margin_registers=args.margin)
        if args.apply_fuses
        else None
    )
    trace = simulate(cfg.topology, cfg.load_model, scenario, fuses=fuses, seed=args.seed)
    trace_path = _out_path(args, args.trace, "trace.csv")
    events_path = _out_path(args, args.events, "events.json")
    trace.write_csv(trace_path)
    trace.write_events_json(events_path)
    trips = trace.trip_events()
    _info(
        args,
        f"simulated {scenario.duration}s at dt={scenario.dt}s: "
        f"{len(trips)} trip(s), {trace.total_energy_wh:.4f} Wh",
    )
    return [trace_path, events_path]


def cmd_budget_check(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    fuses = synthesize_fuses(cfg.topology, cfg.load_model)
    report = check_budget(cfg.topology, cfg.load_model, fuses)
    out = _out_path(args, args.out, "power_budget.json")
    _write_json(out, report.to_dict())
    for violation in report.violations:
        _info(args, "violation: " + violation)
    _info(args, f"wrote {out}")
    return [out]


def cmd_ik(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    if args.chain not in cfg.chains:
        raise ValidationError(f"unknown chain {args.chain!r}; have {sorted(cfg.chains)}")
    chain = cfg.chains[args.chain]
    values = [float(v) for v in args.target.split(",")]
    if len(values) != 7:
        raise ValidationError("target must be 'x,y,z,qw,qx,qy,qz'")
    target = Transform(rotation=quat_matrix(*values[3:]), translation=np.array(values[:3]))
    rot_weight = np.full(3, args.rot_weight)
    task = IkTask(
        target_pose=target,
        frame_weight_pos=np.full(3, args.pos_weight),
        frame_weight_rot=rot_weight,
        frozen_joints=chain.frozen_by_default(),
        max_steps=args.max_steps,
    )
    q0 = chain.home_q()
    trajectory = solve_trajectory(chain, q0, task)
    out = _out_path(args, args.out, "trajectory.csv")
    trajectory.write_csv(out)
    _info(
        args,
        f"{trajectory.termination}: pos err {trajectory.final_pos_err * 1000:.2f} mm, "
        f"rot err {trajectory.final_rot_err:.4f} rad, {len(trajectory.qs) - 1} steps",
    )
    if args.freeze:
        _info(args, f"frozen chain(s) {args.freeze} held at their current posture")
    return [out]


def cmd_perceive(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    if cfg.camera is None or cfg.mount is None:
        raise ValidationError("config has no camera/mount section")
    if args.scene:
        scene = load_scene(args.scene)
        frame = render(scene, cfg.camera, cfg.mount)
        inputs = [Path(args.config), Path(args.scene)]
    else:
        if not (args.frame and args.depth):
            raise ValidationError("need --scene, or both --frame and --depth")
        intr = cfg.camera.intrinsics
        frame = load_frame_png(args.frame, args.depth, Intrinsics(intr.fx, intr.fy, intr.cx, intr.cy))
        inputs = [Path(args.config), Path(args.frame), Path(args.depth)]
    detection = detect_and_locate(frame, cfg.hsv_labels, cfg.mount, args.label)
    out = _out_path(args, args.out, "detection.json")
    _write_json(out, detection.to_dict())
    _info(args, f"{args.label} at base {np.round(detection.point_base, 4).tolist()}")
    args.inputs = lambda a, paths=inputs: paths
    return [out]


def cmd_budget(args) -> list[Path]:
    profiles = load_latency_profiles(args.profiles, lenient=args.lenient)
    rates = list(DEFAULT_RATE_SWEEP_HZ)
    if args.action_rate is not None and args.action_rate not in rates:
        rates.append(args.action_rate)
    report = budget_report(profiles, tuple(sorted(rates)), jitter_sigmas=args.sigmas)
    out = _out_path(args, args.out, "budget.json")
    _write_json(out, report)
    for row in report["profiles"]:
        _info(args, f"{row['model_name']}: {row['f_replan_reported_hz']} Hz max replanning")
    return [out]


def cmd_stiffness(args) -> list[Path]:
    stall_torque = None
    if args.config:
        cfg = load_config(args.config, lenient=args.lenient)
        profiles = cfg.link_profiles or REFERENCE_PROFILES
        if cfg.topology.actuators:
            spec = cfg.topology.actuators[0]
            stall_torque = register_to_torque(spec, spec.torque_register_max)
    else:
        profiles = REFERENCE_PROFILES
    rows = characterize(tuple(profiles), stall_torque=stall_torque)
    out = _out_path(args, args.out, "stiffness.json")
    _write_json(out, {"profiles": rows})
    for row in rows:
        _info(args, f"{row['name']}: k={row['stiffness_n_per_m']:.1f} N/m, k/m={row['stiffness_per_mass']:.1f}")
    return [out]


def cmd_scenario(args) -> list[Path]:
    cfg = load_config(args.config, lenient=args.lenient)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []

    # Stage 1: perception on the rendered scene.
    try:
        if cfg.camera is None or cfg.mount is None:
            raise ValidationError("config has no camera/mount section")
        scene = load_scene(args.scene)
        frame = render(scene, cfg.camera, cfg.mount)
        detection = detect_and_locate(frame, cfg.hsv_labels, cfg.mount, args.label)
    except TargetNotFoundError as exc:
        raise StageError("perception", exc) from exc
    detection_path = out_dir / "detection.json"
    _write_json(detection_path, detection.to_dict())
    outputs.append(detection_path)
    _info(args, f"perception: {args.label} at {np.round(detection.point_base, 4).tolist()}")

    # Stage 2: differential IK to the detected point.
    if cfg.grasp is None:
        raise StageError("ik", "config has no grasp section naming the grasp chain")
    chain = cfg.chains[cfg.grasp.chain]
    if cfg.grasp.orientation is not None:
        target = Transform(rotation=cfg.grasp.orientation, translation=detection.point_base)
        rot_weight = np.full(3, 0.5)
    else:
        target = Transform(translation=detection.point_base)
        rot_weight = np.zeros(3)
    task = IkTask(
        target_pose=target,
        frame_weight_rot=rot_weight,
        frozen_joints=chain.frozen_by_default(),
        max_steps=args.max_steps,
    )
    trajectory = solve_trajectory(chain, chain.home_q(), task)
    trajectory_path = out_dir / "trajectory.csv"
    trajectory.write_csv(trajectory_path)
    outputs.append(trajectory_path)
    _info(
        args,
        f"ik: {trajectory.termination} with pos err {trajectory.final_pos_err * 1000:.2f} mm "
        f"in {len(trajectory.qs) - 1} steps",
    )
    if trajectory.termination != "reached":
        _write_manifest(args, [Path(args.config), Path(args.scene)], outputs)
        raise StageError("ik", f"trajectory ended {trajectory.termination!r} before reaching the target")

    # Stage 3: conservative power commands (all buses at their configured
    # operating point for the whole motion) simulated with fuses applied.
    motion_s = max(len(trajectory.qs) * task.dt, 1.0)
    duration = float(np.ceil(motion_s + 1.0))
    commands = tuple(
        BusCommand(
            t_start=0.0,
            t_end=motion_s,
            bus_id=bus.id,
            n_active=bus.active_count,
            tau=bus.torque_cap,
            alpha=bus.accel_setting,
        )
        for bus in cfg.topology.buses
    )
    power_scenario = Scenario(duration=duration, dt=0.001, commands=commands)
    fuses = None if args.no_fuses else synthesize_fuses(cfg.topology, cfg.load_model)
    trace = simulate(cfg.topology, cfg.load_model, power_scenario, fuses=fuses, seed=args.seed)
    trace_path = out_dir / "trace.csv"
    events_path = out_dir / "events.json"
    trace.write_csv(trace_path)
    trace.write_events_json(events_path)
    outputs += [trace_path, events_path]

    trips = trace.trip_events()
    _info(args, f"power: {len(trips)} trip(s) over {duration:.1f}s")
    _write_manifest(args, [Path(args.config), Path(args.scene)], outputs)
    if trips:
        raise StageError("power", f"{len(trips)} trip event(s); first at t={trips[0].t:.3f}s")
    return outputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="servokit",
        description="Current budgeting, fuse synthesis, power simulation, IK, and perception models",
    )
    parser.add_argument("--version", action="version", version=f"servokit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="system config JSON")
        p.add_argument("--out-dir", default=".", help="directory for outputs and manifest")
        p.add_argument("--seed", type=int, default=None, help="jitter seed where applicable")
        p.add_argument("--lenient", action="store_true", help="allow unknown config keys")
        p.add_argument("--quiet", action="store_true", help="suppress informational output")

    p = sub.add_parser("validate", help="full invariant check of a config file")
    common(p)
    p.set_defaults(func=cmd_validate, inputs=lambda a: [Path(a.config)])

    p = sub.add_parser("fuse", help="synthesize firmware torque caps")
    common(p)
    p.add_argument("--margin", type=int, default=0, help="extra registers of safety margin")
    p.add_argument("--out", default=None, help="output JSON path")
    p.set_defaults(func=cmd_fuse, inputs=lambda a: [Path(a.config)])

    p = sub.add_parser("simulate", help="fixed-timestep power simulation")
    common(p)
    p.add_argument("--scenario", required=True, help="scenario JSON")
    p.add_argument("--apply-fuses", action="store_true", help="cap command torque at synthesized fuses")
    p.add_argument("--margin", type=int, default=0)
    p.add_argument("--trace", default=None, help="trace CSV path")
    p.add_argument("--events", default=None, help="events JSON path")
    p.set_defaults(func=cmd_simulate, inputs=lambda a: [Path(a.config), Path(a.scenario)])

    p = sub.add_parser("budget-check", help="static worst-case power report")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_budget_check, inputs=lambda a: [Path(a.config)])

    p = sub.add_parser("ik", help="solve a joint trajectory to a target pose")
    common(p)
    p.add_argument("--chain", required=True)
    p.add_argument("--target", required=True, help="x,y,z,qw,qx,qy,qz in the base frame")
    p.add_argument("--freeze", action="append", default=[], help="chain name to hold still")
    p.add_argument("--pos-weight", type=float, default=1.0)
    p.add_argument("--rot-weight", type=float, default=0.0)
    p.add_argument("--max-steps", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ik, inputs=lambda a: [Path(a.config)])

    p = sub.add_parser("perceive", help="detect a label in a frame or synthetic scene")
    common(p)
    p.add_argument("--frame", default=None, help="RGB PNG")
    p.add_argument("--depth", default=None, help="16-bit depth PNG, millimeters")
    p.add_argument("--scene", default=None, help="synthetic scene JSON")
    p.add_argument("--label", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_perceive, inputs=lambda a: [Path(a.config)])

    p = sub.add_parser("budget", help="inference latency and replanning report")
    common(p, needs_config=False)
    p.add_argument("--profiles", required=True, help="latency profiles JSON")
    p.add_argument("--action-rate", type=float, default=None, help="extra rate to evaluate, Hz")
    p.add_argument("--sigmas", type=float, default=0.0, help="jitter sigmas added to the mean")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_budget, inputs=lambda a: [Path(a.profiles)])

    p = sub.add_parser("stiffness", help="link stiffness and payload report")
    common(p, needs_config=False)
    p.add_argument("--config", default=None, help="config with link_profiles (builtin data otherwise)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stiffness, inputs=lambda a: [Path(a.config)] if a.config else [])

    p = sub.add_parser("scenario", help="perception -> IK -> power simulation, end to end")
    common(p)
    p.add_argument("--scene", required=True, help="synthetic scene JSON")
    p.add_argument("--label", default="red")
    p.add_argument("--no-fuses", action="store_true", help="simulate without fuse caps")
    p.add_argument("--max-steps", type=int, default=300)
    p.set_defaults(func=cmd_scenario, inputs=lambda a: [Path(a.config), Path(a.scene)])

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        outputs = args.func(args)
        if args.command != "scenario":  # scenario writes its own manifest mid-run
            inputs = [p for p in args.inputs(args) if p is not None]
            existing = [p for p in inputs if Path(p).exists()]
            _write_manifest(args, existing, outputs)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ServokitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
