"""Fixed-timestep power system simulation.

Per step and per port: current is the sum of active bus loads plus
compute watts over nominal voltage; voltage droops affinely with current
(V = V0 - R_int * I); current above the port's effective limit sustained
for at least trip_delay trips the port, zeroing it (residual voltage
0.3 V) until an explicit power cycle. Energy integrates the sampled
V*I sequence with the trapezoid rule.

Identical inputs (including the jitter seed) give bit-identical traces.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .fuse import FuseSetting, LoadModel, bus_load
from .model import PowerTopology

POST_TRIP_VOLTAGE = 0.3  # residual rail voltage after a port shuts down
JITTER_WINDOW_S = 0.1  # command start-time perturbation per jitter seed


@dataclass(frozen=True)
class BusCommand:
    """A uniform load on one bus over [t_start, t_end)."""

    t_start: float
    t_end: float
    bus_id: str
    n_active: int
    tau: int
    alpha: int


@dataclass(frozen=True)
class ComputePhase:
    """Extra compute draw (watts) over [t_start, t_end); port defaults to
    the one hosting the topology's first compute load."""

    t_start: float
    t_end: float
    watts: float
    port_id: str | None = None


@dataclass(frozen=True)
class PowerCycle:
    """Manual recovery of a tripped port at time t."""

    t: float
    port_id: str


@dataclass(frozen=True)
class Scenario:
    duration: float
    dt: float
    commands: tuple[BusCommand, ...] = ()
    compute_profile: tuple[ComputePhase, ...] = ()
    power_cycles: tuple[PowerCycle, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "commands", tuple(self.commands))
        object.__setattr__(self, "compute_profile", tuple(self.compute_profile))
        object.__setattr__(self, "power_cycles", tuple(self.power_cycles))
        if self.dt <= 0.0:
            raise ValidationError("scenario dt must be > 0")
        if self.duration < self.dt:
            raise ValidationError("scenario duration must be >= dt")


@dataclass(frozen=True)
class SimEvent:
    t: float
    kind: str  # "trip" | "brownout" | "recovery"
    port_id: str


@dataclass
class SimTrace:
    """Dense per-step arrays plus discrete events.

    ``currents``/``voltages``/``energy_wh`` have shape (steps+1, ports);
    energy is each port's cumulative trapezoidal integral of V*I in Wh.
    """

    port_ids: tuple[str, ...]
    ts: np.ndarray
    currents: np.ndarray
    voltages: np.ndarray
    energy_wh: np.ndarray
    events: tuple[SimEvent, ...] = ()

    @property
    def total_energy_wh(self) -> float:
        return float(self.energy_wh[-1].sum())

    def port_index(self, port_id: str) -> int:
        return self.port_ids.index(port_id)

    def trip_events(self) -> list[SimEvent]:
        return [e for e in self.events if e.kind == "trip"]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "port_id", "current_a", "voltage_v", "energy_wh"])
            for k in range(len(self.ts)):
                t = repr(float(self.ts[k]))
                for p, port_id in enumerate(self.port_ids):
                    writer.writerow(
                        [
                            t,
                            port_id,
                            repr(float(self.currents[k, p])),
                            repr(float(self.voltages[k, p])),
                            repr(float(self.energy_wh[k, p])),
                        ]
                    )

    def write_events_json(self, path: str | Path) -> None:
        payload = [{"t": e.t, "kind": e.kind, "port_id": e.port_id} for e in self.events]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    allowed = {"duration", "dt", "commands", "compute_profile", "power_cycles"}
    unknown = doc.keys() - allowed
    if unknown:
        raise ValidationError(f"scenario: unknown key(s) {sorted(unknown)}")
    commands = tuple(
        BusCommand(
            t_start=float(c["t_start"]),
            t_end=float(c["t_end"]),
            bus_id=c["bus_id"],
            n_active=int(c["n_active"]),
            tau=int(c["tau"]),
            alpha=int(c["alpha"]),
        )
        for c in doc.get("commands", [])
    )
    profile = tuple(
        ComputePhase(
            t_start=float(p["t_start"]),
            t_end=float(p["t_end"]),
            watts=float(p["watts"]),
            port_id=p.get("port_id"),
        )
        for p in doc.get("compute_profile", [])
    )
    cycles = tuple(
        PowerCycle(t=float(p["t"]), port_id=p["port_id"]) for p in doc.get("power_cycles", [])
    )
    return Scenario(
        duration=float(doc["duration"]),
        dt=float(doc["dt"]),
        commands=commands,
        compute_profile=profile,
        power_cycles=cycles,
    )


def validate_scenario(scenario: Scenario, topology: PowerTopology, model: LoadModel) -> None:
    """Window, reference, and overlap checks; raises ValidationError."""
    by_bus: dict[str, list[BusCommand]] = {}
    for cmd in scenario.commands:
        if not (0.0 <= cmd.t_start < cmd.t_end <= scenario.duration):
            raise ValidationError(
                f"command on bus {cmd.bus_id!r}: window [{cmd.t_start}, {cmd.t_end}) "
                f"outside [0, {scenario.duration}]"
            )
        topology.bus(cmd.bus_id)  # raises on unknown bus
        if cmd.n_active < 1:
            raise ValidationError(f"command on bus {cmd.bus_id!r}: n_active must be >= 1")
        if not 0 <= cmd.tau <= 1000:
            raise ValidationError(f"command on bus {cmd.bus_id!r}: tau {cmd.tau} outside [0, 1000]")
        model.d_of(cmd.alpha)  # raises on unknown alpha
        by_bus.setdefault(cmd.bus_id, []).append(cmd)
    for bus_id, cmds in by_bus.items():
        cmds.sort(key=lambda c: c.t_start)
        for a, b in zip(cmds, cmds[1:]):
            if b.t_start < a.t_end:
                raise ValidationError(
                    f"bus {bus_id!r}: overlapping commands at t={b.t_start} (ambiguous load)"
                )
    for phase in scenario.compute_profile:
        if not (0.0 <= phase.t_start < phase.t_end <= scenario.duration):
            raise ValidationError(
                f"compute phase: window [{phase.t_start}, {phase.t_end}) outside "
                f"[0, {scenario.duration}]"
            )
        if phase.watts < 0.0:
            raise ValidationError("compute phase watts must be >= 0")
        if phase.port_id is not None:
            topology.port(phase.port_id)
        elif not topology.compute_loads:
            raise ValidationError("compute phase without port_id needs a compute load in the topology")
    for cycle in scenario.power_cycles:
        topology.port(cycle.port_id)
        if not 0.0 <= cycle.t <= scenario.duration:
            raise ValidationError(f"power cycle at t={cycle.t} outside [0, {scenario.duration}]")


def jitter_scenario(scenario: Scenario, seed: int, window_s: float = JITTER_WINDOW_S) -> Scenario:
    """Shift each command window by a uniform offset in [-window_s, window_s],
    clamped to the scenario bounds. Seeded with numpy's default PCG64 rng."""
    rng = np.random.default_rng(seed)
    jittered = []
    for cmd in scenario.commands:
        delta = float(rng.uniform(-window_s, window_s))
        width = cmd.t_end - cmd.t_start
        start = min(max(cmd.t_start + delta, 0.0), scenario.duration - width)
        jittered.append(replace(cmd, t_start=start, t_end=start + width))
    return replace(scenario, commands=tuple(jittered))


def _window_mask(ts: np.ndarray, t_start: float, t_end: float) -> np.ndarray:
    return (ts >= t_start) & (ts < t_end)


def simulate(
    topology: PowerTopology,
    model: LoadModel,
    scenario: Scenario,
    fuses: list[FuseSetting] | None = None,
    seed: int | None = None,
) -> SimTrace:
    """Run the scenario; trips are events in the trace, never errors.

    ``fuses`` caps each command's torque register at its bus's synthesized
    ceiling. ``seed`` applies command phase jitter before simulating.
    """
    if seed is not None:
        scenario = jitter_scenario(scenario, seed)
    validate_scenario(scenario, topology, model)

    cap_by_bus = {f.bus_id: f.torque_cap for f in fuses} if fuses is not None else {}
    port_ids = tuple(p.id for p in topology.ports)
    port_index = {pid: i for i, pid in enumerate(port_ids)}
    n_steps = int(round(scenario.duration / scenario.dt))
    ts = np.arange(n_steps + 1) * scenario.dt

    currents = np.zeros((n_steps + 1, len(port_ids)))
    for load in topology.compute_loads:
        currents[:, port_index[load.port_id]] += load.steady_current
    default_compute_port = topology.compute_loads[0].port_id if topology.compute_loads else None
    for phase in scenario.compute_profile:
        pid = phase.port_id or default_compute_port
        port = topology.port(pid)
        currents[_window_mask(ts, phase.t_start, phase.t_end), port_index[pid]] += (
            phase.watts / port.nominal_voltage
        )
    for cmd in scenario.commands:
        bus = topology.bus(cmd.bus_id)
        tau = min(cmd.tau, cap_by_bus.get(bus.id, cmd.tau))
        amps = bus_load(model, cmd.n_active, tau, cmd.alpha)
        currents[_window_mask(ts, cmd.t_start, cmd.t_end), port_index[bus.port_id]] += amps

    voltages = np.empty_like(currents)
    events: list[SimEvent] = []
    compute_ports = {load.port_id for load in topology.compute_loads}

    for p, pid in enumerate(port_ids):
        port = topology.port(pid)
        cycles = sorted(c.t for c in scenario.power_cycles if c.port_id == pid)
        run_needed = max(1, int(math.ceil(port.trip_delay / scenario.dt)))
        col = currents[:, p]
        voltages[:, p] = port.nominal_voltage - port.internal_resistance * col

        seg_start = 0
        boundaries = [int(round(t / scenario.dt)) for t in cycles] + [n_steps + 1]
        tripped_before = False
        for boundary in boundaries:
            boundary = min(boundary, n_steps + 1)
            if boundary <= seg_start:
                continue
            if tripped_before:
                events.append(SimEvent(t=float(ts[seg_start]), kind="recovery", port_id=pid))
                tripped_before = False
            over = col[seg_start:boundary] > port.effective_limit
            trip_at = _first_sustained(over, run_needed)
            if trip_at is not None:
                k = seg_start + trip_at
                events.append(SimEvent(t=float(ts[k]), kind="trip", port_id=pid))
                if pid in compute_ports:
                    events.append(SimEvent(t=float(ts[k]), kind="brownout", port_id=pid))
                col[k:boundary] = 0.0
                voltages[k:boundary, p] = POST_TRIP_VOLTAGE
                tripped_before = True
            seg_start = boundary

    power_w = voltages * currents
    increments = (power_w[:-1] + power_w[1:]) / 2.0 * scenario.dt / 3600.0
    energy = np.zeros_like(currents)
    energy[1:] = np.cumsum(increments, axis=0)

    events.sort(key=lambda e: (e.t, e.port_id, e.kind))
    return SimTrace(
        port_ids=port_ids,
        ts=ts,
        currents=currents,
        voltages=voltages,
        energy_wh=energy,
        events=tuple(events),
    )


def _first_sustained(over: np.ndarray, run_needed: int) -> int | None:
    """Index just after the first run of ``run_needed`` consecutive True
    samples, or None. The returned sample is where the trip takes effect."""
    run = 0
    for i, flag in enumerate(over):
        run = run + 1 if flag else 0
        if run >= run_needed:
            return i + 1 if i + 1 < len(over) else None
    return None


@dataclass
class PortBudget:
    port_id: str
    peak_current_a: float
    peak_power_w: float
    effective_limit_a: float
    violation: bool


@dataclass
class BudgetCheck:
    """Static worst-case power report; violations are flags, not errors."""

    ports: list[PortBudget]
    actuator_capability_w: float
    compute_draw_w: float
    compute_headroom_w: float
    residual_headroom_w: float
    total_peak_w: float
    pdu_rating_w: float
    violations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ports": [
                {
                    "port_id": p.port_id,
                    "peak_current_a": p.peak_current_a,
                    "peak_power_w": p.peak_power_w,
                    "effective_limit_a": p.effective_limit_a,
                    "violation": p.violation,
                }
                for p in self.ports
            ],
            "actuator_capability_w": self.actuator_capability_w,
            "compute_draw_w": self.compute_draw_w,
            "compute_headroom_w": self.compute_headroom_w,
            "residual_headroom_w": self.residual_headroom_w,
            "total_peak_w": self.total_peak_w,
            "pdu_rating_w": self.pdu_rating_w,
            "violations": self.violations,
        }


def check_budget(
    topology: PowerTopology, model: LoadModel, fuses: list[FuseSetting] | None = None
) -> BudgetCheck:
    """Static worst-case report at the buses' configured operating points.

    ``actuator_capability_w`` is what the actuator-hosting ports could
    physically deliver (rated current times nominal voltage); the headroom
    left for compute is the PDU rating minus that capability.
    """
    cap_by_bus = {f.bus_id: f.torque_cap for f in fuses} if fuses is not None else {}
    ports = []
    violations = []
    actuator_ports = {b.port_id for b in topology.buses}
    total_peak_w = 0.0
    for port in topology.ports:
        current = 0.0
        for bus in topology.buses:
            if bus.port_id != port.id:
                continue
            tau = min(bus.torque_cap, cap_by_bus.get(bus.id, bus.torque_cap))
            current += bus_load(model, bus.active_count, tau, bus.accel_setting)
        for load in topology.compute_loads:
            if load.port_id == port.id:
                current += load.steady_current
        power = current * port.nominal_voltage
        total_peak_w += power
        violation = current > port.effective_limit
        if violation:
            violations.append(
                f"port {port.id!r}: worst-case {current:.3f} A exceeds effective limit "
                f"{port.effective_limit:.3f} A"
            )
        ports.append(
            PortBudget(
                port_id=port.id,
                peak_current_a=current,
                peak_power_w=power,
                effective_limit_a=port.effective_limit,
                violation=violation,
            )
        )

    capability = sum(
        p.rated_current * p.nominal_voltage for p in topology.ports if p.id in actuator_ports
    )
    compute_draw = sum(
        c.steady_current * topology.port(c.port_id).nominal_voltage for c in topology.compute_loads
    )
    if total_peak_w > topology.pdu_rating_w:
        violations.append(
            f"total worst-case draw {total_peak_w:.1f} W exceeds PDU rating "
            f"{topology.pdu_rating_w:.1f} W"
        )
    return BudgetCheck(
        ports=ports,
        actuator_capability_w=capability,
        compute_draw_w=compute_draw,
        compute_headroom_w=topology.pdu_rating_w - capability,
        residual_headroom_w=topology.pdu_rating_w - capability - compute_draw,
        total_peak_w=total_peak_w,
        pdu_rating_w=topology.pdu_rating_w,
        violations=violations,
    )


def random_fuse_respecting_scenario(
    topology: PowerTopology,
    fuses: list[FuseSetting],
    rng: np.random.Generator,
    duration: float = 60.0,
    dt: float = 0.001,
    bursts_per_bus: int = 4,
) -> Scenario:
    """Random non-overlapping command bursts that respect the synthesized
    caps and each bus's declared worst-case active count."""
    cap_by_bus = {f.bus_id: f.torque_cap for f in fuses}
    commands = []
    for bus in topology.buses:
        edges = np.sort(rng.uniform(0.0, duration, size=2 * bursts_per_bus))
        for i in range(bursts_per_bus):
            t0, t1 = float(edges[2 * i]), float(edges[2 * i + 1])
            t0, t1 = round(t0 / dt) * dt, round(t1 / dt) * dt
            if t1 - t0 < dt or t1 > duration:
                continue
            commands.append(
                BusCommand(
                    t_start=t0,
                    t_end=t1,
                    bus_id=bus.id,
                    n_active=bus.active_count,
                    tau=int(rng.integers(0, cap_by_bus[bus.id] + 1)),
                    alpha=bus.accel_setting,
                )
            )
    return Scenario(duration=duration, dt=dt, commands=tuple(commands))
