"""Shared domain entities: actuator specs, power topology, kinematic chains.

Everything here is loaded from a single JSON config (see ``config.py``) and
treated as immutable after construction; instances are safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .transforms import Transform, is_rotation

# Two (register, newton-meter) anchor points for the firmware torque scale,
# fitted through the origin by least squares.
TORQUE_ANCHORS = ((450, 1.32), (650, 1.91))


def fit_torque_slope(anchors=TORQUE_ANCHORS) -> float:
    """Through-origin least-squares slope in N*m per register unit."""
    num = sum(reg * nm for reg, nm in anchors)
    den = sum(reg * reg for reg, _ in anchors)
    return num / den


TORQUE_PER_REGISTER = fit_torque_slope()


@dataclass(frozen=True)
class ActuatorSpec:
    """Electrical model of one serial-bus servo."""

    id: str
    stall_current: float
    no_load_current: float
    current_slope: float  # amperes added between tau=0 and tau=1000
    torque_register_max: int = 1000
    torque_per_register: float = TORQUE_PER_REGISTER
    supply_voltage: float = 12.0

    def __post_init__(self):
        if not self.id:
            raise ValidationError("actuator id must be non-empty")
        if not (self.stall_current > self.no_load_current > 0.0):
            raise ValidationError(
                f"actuator {self.id!r}: need stall_current > no_load_current > 0, "
                f"got {self.stall_current} / {self.no_load_current}"
            )
        if self.torque_per_register <= 0.0:
            raise ValidationError(f"actuator {self.id!r}: torque_per_register must be > 0")
        if self.torque_register_max != 1000:
            raise ValidationError(
                f"actuator {self.id!r}: torque_register_max must be 1000, got {self.torque_register_max}"
            )
        # The linear current model must hit the stall endpoint.
        endpoint = self.no_load_current + self.current_slope
        if abs(endpoint - self.stall_current) > 0.02 * self.stall_current:
            raise ValidationError(
                f"actuator {self.id!r}: no_load_current + current_slope = {endpoint:.4f} A "
                f"is not within 2% of stall_current {self.stall_current:.4f} A"
            )


def register_to_torque(spec: ActuatorSpec, tau: float) -> float:
    """Convert a firmware torque register value to newton-meters."""
    if not 0 <= tau <= spec.torque_register_max:
        raise ValidationError(
            f"torque register {tau} outside [0, {spec.torque_register_max}]"
        )
    return tau * spec.torque_per_register


@dataclass(frozen=True)
class PduPort:
    """One current/power-limited output of the power station."""

    id: str
    rated_current: float
    rated_power: float
    nominal_voltage: float
    trip_delay: float = 0.05
    internal_resistance: float = 0.008

    def __post_init__(self):
        if not self.id:
            raise ValidationError("port id must be non-empty")
        for name in ("rated_current", "rated_power", "nominal_voltage"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"port {self.id!r}: {name} must be > 0")
        if self.internal_resistance < 0.0:
            raise ValidationError(f"port {self.id!r}: internal_resistance must be >= 0")
        if self.trip_delay < 0.0:
            raise ValidationError(f"port {self.id!r}: trip_delay must be >= 0")

    @property
    def effective_limit(self) -> float:
        """Binding current limit: min of the current rating and power/voltage."""
        return min(self.rated_current, self.rated_power / self.nominal_voltage)


@dataclass(frozen=True)
class BusConfig:
    """A group of actuators sharing one port, with its firmware settings.

    ``active_count`` is the worst-case number of concurrently loaded
    actuators, a deliberate config input rather than len(actuator_ids):
    the arm bus carries 12 servos but is budgeted for 3 simultaneously
    loaded ones.
    """

    id: str
    port_id: str
    actuator_ids: tuple[str, ...]
    active_count: int
    torque_cap: int
    accel_setting: int

    def __post_init__(self):
        object.__setattr__(self, "actuator_ids", tuple(self.actuator_ids))
        if not self.id:
            raise ValidationError("bus id must be non-empty")
        if not 1 <= self.active_count <= len(self.actuator_ids):
            raise ValidationError(
                f"bus {self.id!r}: active_count {self.active_count} outside "
                f"[1, {len(self.actuator_ids)}]"
            )
        if not 0 <= self.torque_cap <= 1000:
            raise ValidationError(f"bus {self.id!r}: torque_cap {self.torque_cap} outside [0, 1000]")
        if self.accel_setting < 0:
            raise ValidationError(f"bus {self.id!r}: accel_setting must be >= 0")


@dataclass(frozen=True)
class ComputeLoad:
    """Steady-state compute draw assigned to a port."""

    name: str
    steady_current: float
    port_id: str

    def __post_init__(self):
        if self.steady_current < 0.0:
            raise ValidationError(f"compute load {self.name!r}: steady_current must be >= 0")


@dataclass(frozen=True)
class PowerTopology:
    """The full electrical wiring as data: ports, buses, compute, battery."""

    actuators: tuple[ActuatorSpec, ...]
    ports: tuple[PduPort, ...]
    buses: tuple[BusConfig, ...]
    compute_loads: tuple[ComputeLoad, ...]
    battery_wh: float
    pdu_rating_w: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "actuators", tuple(self.actuators))
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "compute_loads", tuple(self.compute_loads))
        if self.battery_wh <= 0.0:
            raise ValidationError("battery_wh must be > 0")
        if self.pdu_rating_w <= 0.0:
            raise ValidationError("pdu_rating_w must be > 0")

        port_ids = [p.id for p in self.ports]
        if len(set(port_ids)) != len(port_ids):
            raise ValidationError("duplicate port ids")
        actuator_ids = [a.id for a in self.actuators]
        if len(set(actuator_ids)) != len(actuator_ids):
            raise ValidationError("duplicate actuator ids")
        bus_ids = [b.id for b in self.buses]
        if len(set(bus_ids)) != len(bus_ids):
            raise ValidationError("duplicate bus ids")

        known_ports = set(port_ids)
        known_actuators = set(actuator_ids)
        seen_actuators: dict[str, str] = {}
        for bus in self.buses:
            if bus.port_id not in known_ports:
                raise ValidationError(f"bus {bus.id!r} references unknown port {bus.port_id!r}")
            for aid in bus.actuator_ids:
                if aid not in known_actuators:
                    raise ValidationError(f"bus {bus.id!r} references unknown actuator {aid!r}")
                if aid in seen_actuators:
                    raise ValidationError(
                        f"actuator {aid!r} appears on both bus {seen_actuators[aid]!r} and {bus.id!r}"
                    )
                seen_actuators[aid] = bus.id
        for load in self.compute_loads:
            if load.port_id not in known_ports:
                raise ValidationError(
                    f"compute load {load.name!r} references unknown port {load.port_id!r}"
                )

    def port(self, port_id: str) -> PduPort:
        for p in self.ports:
            if p.id == port_id:
                return p
        raise ValidationError(f"unknown port {port_id!r}")

    def bus(self, bus_id: str) -> BusConfig:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise ValidationError(f"unknown bus {bus_id!r}")

    def to_dict(self) -> dict:
        """JSON-ready dict; round-trips through the config loader."""
        return {
            "actuators": [
                {
                    "id": a.id,
                    "stall_current": a.stall_current,
                    "no_load_current": a.no_load_current,
                    "current_slope": a.current_slope,
                    "torque_register_max": a.torque_register_max,
                    "torque_per_register": a.torque_per_register,
                    "supply_voltage": a.supply_voltage,
                }
                for a in self.actuators
            ],
            "ports": [
                {
                    "id": p.id,
                    "rated_current": p.rated_current,
                    "rated_power": p.rated_power,
                    "nominal_voltage": p.nominal_voltage,
                    "trip_delay": p.trip_delay,
                    "internal_resistance": p.internal_resistance,
                }
                for p in self.ports
            ],
            "buses": [
                {
                    "id": b.id,
                    "port_id": b.port_id,
                    "actuator_ids": list(b.actuator_ids),
                    "active_count": b.active_count,
                    "torque_cap": b.torque_cap,
                    "accel_setting": b.accel_setting,
                }
                for b in self.buses
            ],
            "compute_loads": [
                {"name": c.name, "steady_current": c.steady_current, "port_id": c.port_id}
                for c in self.compute_loads
            ],
            "battery_wh": self.battery_wh,
            "pdu_rating_w": self.pdu_rating_w,
        }


@dataclass
class Joint:
    """Revolute joint: rotation about ``axis`` after the fixed origin offset."""

    axis: np.ndarray
    origin: Transform
    limit_lo: float
    limit_hi: float
    vel_limit: float
    name: str = ""

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        if self.axis.shape != (3,):
            raise ValidationError(f"joint {self.name!r}: axis must be a 3-vector")
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise ValidationError(f"joint {self.name!r}: axis must have unit norm")
        if not self.limit_lo < self.limit_hi:
            raise ValidationError(
                f"joint {self.name!r}: limit_lo {self.limit_lo} must be < limit_hi {self.limit_hi}"
            )
        if self.vel_limit <= 0.0:
            raise ValidationError(f"joint {self.name!r}: vel_limit must be > 0")


@dataclass
class KinematicChain:
    """Serial revolute chain with joint limits and an end-effector offset.

    ``home`` is the preferred start posture for solves; solvers fall back
    to all-zero joints when it is absent. Keep it away from singular
    fully-stretched configurations.
    """

    joints: tuple[Joint, ...]
    end_effector_offset: Transform = field(default_factory=Transform.identity)
    home: np.ndarray | None = None

    def __post_init__(self):
        self.joints = tuple(self.joints)
        if len(self.joints) < 1:
            raise ValidationError("chain must have at least one joint")
        if self.home is not None:
            self.home = np.asarray(self.home, dtype=float)
            self.check_limits(self.home)

    def home_q(self) -> np.ndarray:
        if self.home is not None:
            return self.home.copy()
        return np.zeros(len(self.joints))

    def __len__(self) -> int:
        return len(self.joints)

    @property
    def limits_lo(self) -> np.ndarray:
        return np.array([j.limit_lo for j in self.joints])

    @property
    def limits_hi(self) -> np.ndarray:
        return np.array([j.limit_hi for j in self.joints])

    @property
    def vel_limits(self) -> np.ndarray:
        return np.array([j.vel_limit for j in self.joints])

    def check_limits(self, q: np.ndarray, atol: float = 1e-9) -> None:
        q = np.asarray(q, dtype=float)
        if q.shape != (len(self.joints),):
            raise ValidationError(
                f"joint vector has length {q.shape}, chain has {len(self.joints)} joints"
            )
        lo, hi = self.limits_lo, self.limits_hi
        bad = np.where((q < lo - atol) | (q > hi + atol))[0]
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"joint {self.joints[i].name or i}: value {q[i]:.6f} outside "
                f"[{lo[i]:.6f}, {hi[i]:.6f}]"
            )

    def link_length_sum(self) -> float:
        """Sum of inter-joint translations after the first joint, plus the
        end-effector offset: an upper bound on reach from the first joint
        origin (tight when the geometry can align the links)."""
        total = 0.0
        for joint in self.joints[1:]:
            total += float(np.linalg.norm(joint.origin.translation))
        total += float(np.linalg.norm(self.end_effector_offset.translation))
        return total

    def frozen_by_default(self) -> frozenset[int]:
        """Indices of joints excluded from IK unless explicitly enabled
        (gripper jaws are position-scripted, not IK-driven)."""
        return frozenset(i for i, j in enumerate(self.joints) if j.name == "gripper")


def validate_mount_rotation(rotation: np.ndarray, what: str) -> np.ndarray:
    rotation = np.asarray(rotation, dtype=float)
    if not is_rotation(rotation):
        raise ValidationError(f"{what} must be a proper rotation matrix")
    return rotation


def default_arm() -> KinematicChain:
    """Six-joint arm (five arm DoF plus gripper) used by tests and as the
    reference config's manipulator. Zero pose points straight out along +x;
    reach from the shoulder is 0.42 m."""
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])

    def t(tx, ty, tz):
        return Transform(translation=np.array([tx, ty, tz]))

    joints = (
        Joint(axis=z, origin=t(0.0, 0.0, 0.0563), limit_lo=-2.2, limit_hi=2.2, vel_limit=4.0, name="shoulder_pan"),
        Joint(axis=y, origin=t(0.0, 0.0, 0.0), limit_lo=-1.75, limit_hi=1.75, vel_limit=4.0, name="shoulder_lift"),
        Joint(axis=y, origin=t(0.116, 0.0, 0.0), limit_lo=-2.53, limit_hi=2.53, vel_limit=4.0, name="elbow"),
        Joint(axis=y, origin=t(0.135, 0.0, 0.0), limit_lo=-1.75, limit_hi=1.75, vel_limit=5.0, name="wrist_flex"),
        Joint(axis=x, origin=t(0.060, 0.0, 0.0), limit_lo=-2.7, limit_hi=2.7, vel_limit=5.0, name="wrist_roll"),
        Joint(axis=y, origin=t(0.064, 0.0, 0.0), limit_lo=-0.2, limit_hi=1.2, vel_limit=6.0, name="gripper"),
    )
    return KinematicChain(joints=joints, end_effector_offset=t(0.045, 0.0, 0.0))
