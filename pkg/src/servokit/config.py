"""JSON config loading with strict key checking.

One file reproduces a whole scenario: electrical topology, load model,
kinematic chains, camera mount, and HSV label table. Top-level keys:

    actuators, ports, buses, compute_loads, battery_wh, pdu_rating_w,
    load_model, chains, camera, hsv_labels, link_profiles, grasp

Unknown keys raise ValidationError unless ``lenient=True``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .budget import LatencyProfile
from .errors import ParseError, ValidationError
from .fuse import LoadModel, calibrate_inrush
from .model import (
    ActuatorSpec,
    BusConfig,
    ComputeLoad,
    Joint,
    KinematicChain,
    PduPort,
    PowerTopology,
    validate_mount_rotation,
)
from .perception import CameraModel, CameraMount, HsvRange, Intrinsics
from .stiffness import LinkProfile
from .transforms import Transform, quat_matrix, rpy_matrix

_TOP_KEYS = {
    "actuators",
    "ports",
    "buses",
    "compute_loads",
    "battery_wh",
    "pdu_rating_w",
    "load_model",
    "chains",
    "camera",
    "hsv_labels",
    "link_profiles",
    "grasp",
}


@dataclass
class GraspConfig:
    chain: str
    orientation: np.ndarray | None = None  # rotation matrix, or None for position-only


@dataclass
class SystemConfig:
    """Everything a run needs, parsed and cross-validated."""

    topology: PowerTopology
    load_model: LoadModel
    chains: dict[str, KinematicChain] = field(default_factory=dict)
    camera: CameraModel | None = None
    mount: CameraMount | None = None
    hsv_labels: dict[str, HsvRange] = field(default_factory=dict)
    link_profiles: tuple[LinkProfile, ...] = ()
    grasp: GraspConfig | None = None


def _check_keys(obj: dict, allowed: set[str], required: set[str], where: str, lenient: bool) -> None:
    missing = required - obj.keys()
    if missing:
        raise ValidationError(f"{where}: missing required key(s) {sorted(missing)}")
    unknown = obj.keys() - allowed
    if unknown and not lenient:
        raise ValidationError(f"{where}: unknown key(s) {sorted(unknown)}")


def _num(obj: dict, key: str, where: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _int(obj: dict, key: str, where: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def load_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return doc


def _parse_transform(obj: dict, where: str, lenient: bool) -> Transform:
    _check_keys(obj, {"rotation", "rpy", "quat_wxyz", "translation"}, set(), where, lenient)
    given = [k for k in ("rotation", "rpy", "quat_wxyz") if k in obj]
    if len(given) > 1:
        raise ValidationError(f"{where}: give at most one of rotation/rpy/quat_wxyz")
    if "rotation" in obj:
        rotation = validate_mount_rotation(np.array(obj["rotation"], dtype=float), where)
    elif "rpy" in obj:
        r, p, y = (float(v) for v in obj["rpy"])
        rotation = rpy_matrix(r, p, y)
    elif "quat_wxyz" in obj:
        rotation = quat_matrix(*(float(v) for v in obj["quat_wxyz"]))
    else:
        rotation = np.eye(3)
    translation = np.array(obj.get("translation", [0.0, 0.0, 0.0]), dtype=float)
    if translation.shape != (3,):
        raise ValidationError(f"{where}.translation: expected 3 numbers")
    return Transform(rotation=rotation, translation=translation)


def _parse_chain(obj: dict, where: str, lenient: bool) -> KinematicChain:
    _check_keys(obj, {"joints", "end_effector_offset", "home"}, {"joints"}, where, lenient)
    joints = []
    for i, jobj in enumerate(obj["joints"]):
        jwhere = f"{where}.joints[{i}]"
        _check_keys(
            jobj,
            {"axis", "origin", "limit_lo", "limit_hi", "vel_limit", "name"},
            {"axis", "limit_lo", "limit_hi", "vel_limit"},
            jwhere,
            lenient,
        )
        joints.append(
            Joint(
                axis=np.array(jobj["axis"], dtype=float),
                origin=_parse_transform(jobj.get("origin", {}), f"{jwhere}.origin", lenient),
                limit_lo=_num(jobj, "limit_lo", jwhere),
                limit_hi=_num(jobj, "limit_hi", jwhere),
                vel_limit=_num(jobj, "vel_limit", jwhere),
                name=jobj.get("name", ""),
            )
        )
    offset = _parse_transform(obj.get("end_effector_offset", {}), f"{where}.end_effector_offset", lenient)
    home = np.array(obj["home"], dtype=float) if "home" in obj else None
    return KinematicChain(joints=tuple(joints), end_effector_offset=offset, home=home)


def parse_topology(doc: dict, lenient: bool = False) -> PowerTopology:
    actuators = []
    for i, aobj in enumerate(doc.get("actuators", [])):
        where = f"actuators[{i}]"
        _check_keys(
            aobj,
            {
                "id",
                "stall_current",
                "no_load_current",
                "current_slope",
                "torque_register_max",
                "torque_per_register",
                "supply_voltage",
            },
            {"id", "stall_current", "no_load_current", "current_slope"},
            where,
            lenient,
        )
        kwargs = {
            "id": aobj["id"],
            "stall_current": _num(aobj, "stall_current", where),
            "no_load_current": _num(aobj, "no_load_current", where),
            "current_slope": _num(aobj, "current_slope", where),
        }
        if "torque_register_max" in aobj:
            kwargs["torque_register_max"] = _int(aobj, "torque_register_max", where)
        if "torque_per_register" in aobj:
            kwargs["torque_per_register"] = _num(aobj, "torque_per_register", where)
        if "supply_voltage" in aobj:
            kwargs["supply_voltage"] = _num(aobj, "supply_voltage", where)
        actuators.append(ActuatorSpec(**kwargs))

    ports = []
    for i, pobj in enumerate(doc.get("ports", [])):
        where = f"ports[{i}]"
        _check_keys(
            pobj,
            {"id", "rated_current", "rated_power", "nominal_voltage", "trip_delay", "internal_resistance"},
            {"id", "rated_current", "rated_power", "nominal_voltage"},
            where,
            lenient,
        )
        kwargs = {
            "id": pobj["id"],
            "rated_current": _num(pobj, "rated_current", where),
            "rated_power": _num(pobj, "rated_power", where),
            "nominal_voltage": _num(pobj, "nominal_voltage", where),
        }
        if "trip_delay" in pobj:
            kwargs["trip_delay"] = _num(pobj, "trip_delay", where)
        if "internal_resistance" in pobj:
            kwargs["internal_resistance"] = _num(pobj, "internal_resistance", where)
        ports.append(PduPort(**kwargs))

    buses = []
    for i, bobj in enumerate(doc.get("buses", [])):
        where = f"buses[{i}]"
        _check_keys(
            bobj,
            {"id", "port_id", "actuator_ids", "active_count", "torque_cap", "accel_setting"},
            {"id", "port_id", "actuator_ids", "active_count", "torque_cap", "accel_setting"},
            where,
            lenient,
        )
        buses.append(
            BusConfig(
                id=bobj["id"],
                port_id=bobj["port_id"],
                actuator_ids=tuple(bobj["actuator_ids"]),
                active_count=_int(bobj, "active_count", where),
                torque_cap=_int(bobj, "torque_cap", where),
                accel_setting=_int(bobj, "accel_setting", where),
            )
        )

    compute_loads = []
    for i, cobj in enumerate(doc.get("compute_loads", [])):
        where = f"compute_loads[{i}]"
        _check_keys(cobj, {"name", "steady_current", "port_id"}, {"name", "steady_current", "port_id"}, where, lenient)
        compute_loads.append(
            ComputeLoad(name=cobj["name"], steady_current=_num(cobj, "steady_current", where), port_id=cobj["port_id"])
        )

    if "battery_wh" not in doc:
        raise ValidationError("config: missing required key 'battery_wh'")
    return PowerTopology(
        actuators=tuple(actuators),
        ports=tuple(ports),
        buses=tuple(buses),
        compute_loads=tuple(compute_loads),
        battery_wh=_num(doc, "battery_wh", "config"),
        pdu_rating_w=_num(doc, "pdu_rating_w", "config") if "pdu_rating_w" in doc else 300.0,
    )


def parse_load_model(doc: dict, lenient: bool = False) -> LoadModel:
    obj = doc.get("load_model")
    if obj is None:
        raise ValidationError("config: missing required key 'load_model'")
    where = "load_model"
    _check_keys(
        obj,
        {"no_load_current", "current_slope", "inrush", "calibration_rows", "interpolate"},
        {"no_load_current", "current_slope"},
        where,
        lenient,
    )
    no_load = _num(obj, "no_load_current", where)
    slope = _num(obj, "current_slope", where)
    inrush: dict[int, float] = {}
    for key, value in obj.get("inrush", {}).items():
        try:
            alpha = int(key)
        except ValueError:
            raise ValidationError(f"{where}.inrush: key {key!r} is not an integer register")
        inrush[alpha] = float(value)
    rows = []
    for i, robj in enumerate(obj.get("calibration_rows", [])):
        rwhere = f"{where}.calibration_rows[{i}]"
        _check_keys(
            robj,
            {"n_active", "tau", "alpha", "observed_load"},
            {"n_active", "tau", "alpha", "observed_load"},
            rwhere,
            lenient,
        )
        rows.append(
            (
                _int(robj, "n_active", rwhere),
                _num(robj, "tau", rwhere),
                _int(robj, "alpha", rwhere),
                _num(robj, "observed_load", rwhere),
            )
        )
    if rows:
        calibrated = calibrate_inrush(no_load, slope, rows)
        overlap = calibrated.keys() & inrush.keys()
        if overlap:
            raise ValidationError(f"{where}: alpha(s) {sorted(overlap)} given both as inrush and calibration_rows")
        inrush.update(calibrated)
    return LoadModel(
        no_load_current=no_load,
        current_slope=slope,
        inrush=inrush,
        interpolate=bool(obj.get("interpolate", False)),
    )


def _parse_camera(doc: dict, chains: dict[str, KinematicChain], lenient: bool):
    obj = doc.get("camera")
    if obj is None:
        return None, None
    where = "camera"
    _check_keys(obj, {"width", "height", "fx", "fy", "cx", "cy", "mount"}, {"width", "height", "fx", "fy", "cx", "cy"}, where, lenient)
    camera = CameraModel(
        width=_int(obj, "width", where),
        height=_int(obj, "height", where),
        intrinsics=Intrinsics(
            fx=_num(obj, "fx", where),
            fy=_num(obj, "fy", where),
            cx=_num(obj, "cx", where),
            cy=_num(obj, "cy", where),
        ),
    )
    mount = None
    if "mount" in obj:
        mobj = obj["mount"]
        mwhere = f"{where}.mount"
        _check_keys(
            mobj,
            {"neck_chain", "head_pan", "head_tilt", "optical_alignment", "calibration_offset"},
            {"neck_chain"},
            mwhere,
            lenient,
        )
        chain_name = mobj["neck_chain"]
        if chain_name not in chains:
            raise ValidationError(f"{mwhere}.neck_chain: unknown chain {chain_name!r}")
        alignment = np.array(
            mobj.get("optical_alignment", [[0, 0, 1], [-1, 0, 0], [0, -1, 0]]), dtype=float
        )
        mount = CameraMount(
            neck_chain=chains[chain_name],
            head_pan=float(mobj.get("head_pan", 0.0)),
            head_tilt=float(mobj.get("head_tilt", 0.0)),
            optical_alignment=alignment,
            calibration_offset=np.array(mobj.get("calibration_offset", [0.0, 0.0, 0.0]), dtype=float),
        )
    return camera, mount


def _parse_hsv(doc: dict, lenient: bool) -> dict[str, HsvRange]:
    labels: dict[str, HsvRange] = {}
    for i, obj in enumerate(doc.get("hsv_labels", [])):
        where = f"hsv_labels[{i}]"
        _check_keys(
            obj,
            {"label", "h_lo", "h_hi", "s_lo", "s_hi", "v_lo", "v_hi", "min_area"},
            {"label", "h_lo", "h_hi", "s_lo", "s_hi", "v_lo", "v_hi"},
            where,
            lenient,
        )
        rng = HsvRange(
            label=obj["label"],
            h_lo=_num(obj, "h_lo", where),
            h_hi=_num(obj, "h_hi", where),
            s_lo=_num(obj, "s_lo", where),
            s_hi=_num(obj, "s_hi", where),
            v_lo=_num(obj, "v_lo", where),
            v_hi=_num(obj, "v_hi", where),
            min_area=_int(obj, "min_area", where) if "min_area" in obj else 1,
        )
        if rng.label in labels:
            raise ValidationError(f"{where}: duplicate label {rng.label!r}")
        labels[rng.label] = rng
    return labels


def _parse_link_profiles(doc: dict, lenient: bool) -> tuple[LinkProfile, ...]:
    profiles = []
    for i, obj in enumerate(doc.get("link_profiles", [])):
        where = f"link_profiles[{i}]"
        _check_keys(
            obj,
            {
                "name",
                "walls",
                "infill",
                "mass",
                "test_length",
                "test_load_mass",
                "measured_deflection",
                "yield_force_mean",
                "yield_force_std",
            },
            {"name", "walls", "infill", "mass", "test_length", "test_load_mass", "measured_deflection"},
            where,
            lenient,
        )
        profiles.append(
            LinkProfile(
                name=obj["name"],
                walls=_int(obj, "walls", where),
                infill=_num(obj, "infill", where),
                mass=_num(obj, "mass", where),
                test_length=_num(obj, "test_length", where),
                test_load_mass=_num(obj, "test_load_mass", where),
                measured_deflection=_num(obj, "measured_deflection", where),
                yield_force_mean=_num(obj, "yield_force_mean", where) if "yield_force_mean" in obj else 0.0,
                yield_force_std=_num(obj, "yield_force_std", where) if "yield_force_std" in obj else 0.0,
            )
        )
    return tuple(profiles)


def load_config(path: str | Path, lenient: bool = False) -> SystemConfig:
    """Load and fully validate a system config file."""
    doc = load_json(path)
    _check_keys(doc, _TOP_KEYS, set(), "config", lenient)

    topology = parse_topology(doc, lenient)
    load_model = parse_load_model(doc, lenient)

    chains: dict[str, KinematicChain] = {}
    for name, cobj in doc.get("chains", {}).items():
        chains[name] = _parse_chain(cobj, f"chains[{name}]", lenient)

    camera, mount = _parse_camera(doc, chains, lenient)
    hsv_labels = _parse_hsv(doc, lenient)
    link_profiles = _parse_link_profiles(doc, lenient)

    grasp = None
    if "grasp" in doc:
        gobj = doc["grasp"]
        _check_keys(gobj, {"chain", "orientation_wxyz"}, {"chain"}, "grasp", lenient)
        if gobj["chain"] not in chains:
            raise ValidationError(f"grasp.chain: unknown chain {gobj['chain']!r}")
        orientation = None
        if "orientation_wxyz" in gobj:
            orientation = quat_matrix(*(float(v) for v in gobj["orientation_wxyz"]))
        grasp = GraspConfig(chain=gobj["chain"], orientation=orientation)

    # Every bus alpha must be covered by the calibrated inrush table.
    for bus in topology.buses:
        if bus.accel_setting not in load_model.inrush and not load_model.interpolate:
            raise ValidationError(
                f"bus {bus.id!r}: accel_setting {bus.accel_setting} has no inrush entry"
            )

    return SystemConfig(
        topology=topology,
        load_model=load_model,
        chains=chains,
        camera=camera,
        mount=mount,
        hsv_labels=hsv_labels,
        link_profiles=link_profiles,
        grasp=grasp,
    )


def load_topology(path: str | Path, lenient: bool = False) -> PowerTopology:
    """Load just the electrical topology from a config file."""
    doc = load_json(path)
    _check_keys(doc, _TOP_KEYS, set(), "config", lenient)
    return parse_topology(doc, lenient)


def load_latency_profiles(path: str | Path, lenient: bool = False) -> list[LatencyProfile]:
    """Load inference latency profiles: JSON list of profile objects."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(doc, dict):
        doc = doc.get("profiles", doc)
    if not isinstance(doc, list):
        raise ValidationError(f"{path}: expected a list of profiles")
    profiles = []
    for i, obj in enumerate(doc):
        where = f"profiles[{i}]"
        _check_keys(
            obj,
            {"model_name", "horizon", "prefix", "sampling_steps", "mean_latency", "std_latency"},
            {"model_name", "horizon", "prefix", "mean_latency"},
            where,
            lenient,
        )
        profiles.append(
            LatencyProfile(
                model_name=obj["model_name"],
                horizon=_int(obj, "horizon", where),
                prefix=_int(obj, "prefix", where),
                sampling_steps=obj.get("sampling_steps"),
                mean_latency=_num(obj, "mean_latency", where),
                std_latency=_num(obj, "std_latency", where) if "std_latency" in obj else 0.0,
            )
        )
    return profiles
