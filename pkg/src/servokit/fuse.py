"""Bus current model and firmware "virtual fuse" synthesis.

The per-bus load model is

    I(n, tau, alpha) = n * (slope * tau/1000 + no_load + D(alpha))

with ``D`` a calibrated per-acceleration-register inrush table. Inverting
it against a port's current budget yields the largest integer torque
register whose worst-case draw stays under the budget; written into servo
firmware, that cap acts as a fuse the control stack cannot exceed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import CalibrationError, InfeasibleFuseError, UnknownAccelError, ValidationError
from .model import PowerTopology

# Guards against the inversion landing one float ulp below an integer
# register value; max_torque re-checks the result against the budget anyway.
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class LoadModel:
    """Static + dynamic current model for one servo family."""

    no_load_current: float = 0.18
    current_slope: float = 2.52
    inrush: dict[int, float] = field(default_factory=dict)
    interpolate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inrush", dict(self.inrush))
        if self.no_load_current <= 0.0:
            raise ValidationError("no_load_current must be > 0")
        if self.current_slope <= 0.0:
            raise ValidationError("current_slope must be > 0")
        for alpha, d in self.inrush.items():
            if d < 0.0:
                raise ValidationError(f"inrush for alpha={alpha} must be >= 0, got {d}")

    def d_of(self, alpha: int) -> float:
        """Inrush current for an acceleration register. Exact lookup unless
        interpolation was explicitly enabled."""
        if alpha in self.inrush:
            return self.inrush[alpha]
        if not self.interpolate:
            raise UnknownAccelError(
                f"no inrush entry for alpha={alpha}; known: {sorted(self.inrush)}"
            )
        known = sorted(self.inrush)
        if not known or alpha < known[0] or alpha > known[-1]:
            raise UnknownAccelError(
                f"alpha={alpha} outside calibrated range {known[:1]}..{known[-1:]}"
            )
        hi = next(a for a in known if a > alpha)
        lo = max(a for a in known if a < alpha)
        frac = (alpha - lo) / (hi - lo)
        return self.inrush[lo] + frac * (self.inrush[hi] - self.inrush[lo])


@dataclass(frozen=True)
class FuseSetting:
    """Synthesized cap for one bus plus the budget bookkeeping behind it.

    ``torque_cap`` is the synthesized ceiling; ``predicted_load`` is the
    draw at the bus's configured operating torque (clipped to the cap), so
    ``headroom`` reports margin at the operating point.
    """

    bus_id: str
    torque_cap: int
    predicted_load: float
    port_limit: float
    headroom: float

    def __post_init__(self):
        if self.predicted_load > self.port_limit:
            raise ValidationError(
                f"fuse for bus {self.bus_id!r}: predicted load {self.predicted_load:.4f} A "
                f"exceeds port limit {self.port_limit:.4f} A"
            )
        if self.headroom < 0.0:
            raise ValidationError(f"fuse for bus {self.bus_id!r}: negative headroom")


def _check_tau(tau: float) -> None:
    if not 0 <= tau <= 1000:
        raise ValidationError(f"torque register {tau} outside [0, 1000]")


def bus_load(model: LoadModel, n_active: int, tau: float, alpha: int) -> float:
    """Worst-case bus current in amperes for n_active uniformly loaded servos."""
    if n_active < 1:
        raise ValidationError(f"n_active must be >= 1, got {n_active}")
    _check_tau(tau)
    return n_active * (model.current_slope * tau / 1000.0 + model.no_load_current + model.d_of(alpha))


def max_torque(model: LoadModel, port_limit: float, n_active: int, alpha: int) -> int:
    """Largest integer torque register whose bus_load stays within port_limit."""
    if n_active < 1:
        raise ValidationError(f"n_active must be >= 1, got {n_active}")
    d = model.d_of(alpha)
    budget = port_limit / n_active - model.no_load_current - d
    if budget < 0.0:
        min_load = n_active * (model.no_load_current + d)
        raise InfeasibleFuseError(
            f"even zero torque draws {min_load:.3f} A, over the {port_limit:.3f} A limit",
            min_load_a=min_load,
        )
    cap = math.floor(budget / model.current_slope * 1000.0 + _FLOOR_EPS)
    cap = max(0, min(1000, cap))
    # The epsilon above can admit a register one step too high; back off.
    while cap > 0 and bus_load(model, n_active, cap, alpha) > port_limit:
        cap -= 1
    return cap


def calibrate_inrush(
    no_load_current: float,
    current_slope: float,
    rows: list[tuple[int, float, int, float]],
) -> dict[int, float]:
    """Solve D(alpha) from observed bus loads.

    Rows are (n_active, tau, alpha, observed_load). Each alpha may appear
    once; a negative solved D is reported as an error, never clamped.
    Values within float roundoff of zero (1e-12 A) count as zero.
    """
    table: dict[int, float] = {}
    for n_active, tau, alpha, observed in rows:
        if n_active < 1:
            raise ValidationError(f"calibration row for alpha={alpha}: n_active must be >= 1")
        _check_tau(tau)
        if alpha in table:
            raise CalibrationError(f"duplicate calibration row for alpha={alpha}")
        d = observed / n_active - current_slope * tau / 1000.0 - no_load_current
        if d < -1e-12:
            raise CalibrationError(
                f"row (n={n_active}, tau={tau}, alpha={alpha}, load={observed}) solves to "
                f"negative inrush D={d:.6f} A"
            )
        table[alpha] = max(d, 0.0)
    return table


def synthesize_fuses(
    topology: PowerTopology, model: LoadModel, margin_registers: int = 0
) -> list[FuseSetting]:
    """One fuse per bus, inverted against the binding port budget.

    The budget is the port's effective limit (min of current rating and
    power/voltage) minus any steady compute current sharing the port. The
    configured safety margin is subtracted from the synthesized register
    cap, not from the budget.
    """
    if margin_registers < 0:
        raise ValidationError("margin_registers must be >= 0")
    settings = []
    for bus in topology.buses:
        port = topology.port(bus.port_id)
        compute_share = sum(c.steady_current for c in topology.compute_loads if c.port_id == port.id)
        budget = port.effective_limit - compute_share
        cap = max_torque(model, budget, bus.active_count, bus.accel_setting)
        cap = max(0, cap - margin_registers)
        operating_tau = min(bus.torque_cap, cap)
        predicted = bus_load(model, bus.active_count, operating_tau, bus.accel_setting)
        settings.append(
            FuseSetting(
                bus_id=bus.id,
                torque_cap=cap,
                predicted_load=predicted,
                port_limit=budget,
                headroom=budget - predicted,
            )
        )
    return settings
