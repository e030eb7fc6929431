"""Inference latency accounting: replanning bounds and chunk scheduling.

A policy emits ``horizon`` future actions per inference and the first
``prefix`` are executed before replanning, so the next plan must arrive
within prefix/action_rate seconds. The replanning bound itself is just
the inverse mean end-to-end latency.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, ROUND_HALF_UP, Decimal

from .errors import ValidationError
from .model import PduPort

# Published current envelope for the compute module on its 12 V port.
COMPUTE_CURRENT_ENVELOPE_A = 2.1


@dataclass(frozen=True)
class LatencyProfile:
    """Measured end-to-end latency of one policy on the edge computer."""

    model_name: str
    horizon: int
    prefix: int
    sampling_steps: int | None
    mean_latency: float  # seconds
    std_latency: float = 0.0

    def __post_init__(self):
        if not 1 <= self.prefix <= self.horizon:
            raise ValidationError(
                f"profile {self.model_name!r}: need 1 <= prefix <= horizon, "
                f"got {self.prefix} / {self.horizon}"
            )
        if self.mean_latency <= 0.0:
            raise ValidationError(f"profile {self.model_name!r}: mean_latency must be > 0")
        if self.std_latency < 0.0:
            raise ValidationError(f"profile {self.model_name!r}: std_latency must be >= 0")


def replan_frequency(profile: LatencyProfile) -> float:
    """Maximum replanning rate in Hz: exactly 1 / mean latency."""
    return 1.0 / profile.mean_latency


def report_hz(hz: float) -> float:
    """Presentation rounding to one decimal, matching the source table:
    half-up to two decimals, then half-even to one. (Plain half-up at one
    decimal would print 1.9 where the table says 1.8.)"""
    two = Decimal(repr(hz)).quantize(Decimal("0.01"), ROUND_HALF_UP)
    return float(two.quantize(Decimal("0.1"), ROUND_HALF_EVEN))


def max_sustainable_action_rate(profile: LatencyProfile) -> float:
    """Highest action streaming rate the prefix can cover: K / mean latency."""
    return profile.prefix * replan_frequency(profile)


@dataclass(frozen=True)
class ScheduleCheck:
    feasible: bool
    slack_s: float


def schedule_feasibility(
    profile: LatencyProfile, action_rate: float, jitter_sigmas: float = 0.0
) -> ScheduleCheck:
    """Can a new plan arrive before the executing prefix runs out?

    Feasible iff mean + jitter_sigmas * std <= prefix / action_rate. The
    sigma padding is an extension; jitter_sigmas=0 uses only the mean.
    """
    if action_rate <= 0.0:
        raise ValidationError("action_rate must be > 0")
    budget = profile.prefix / action_rate
    needed = profile.mean_latency + jitter_sigmas * profile.std_latency
    slack = budget - needed
    return ScheduleCheck(feasible=slack >= 0.0, slack_s=slack)


@dataclass(frozen=True)
class ComputeFit:
    fits: bool
    current_a: float
    envelope_a: float
    port_limit_a: float


def compute_power_check(profile_watts: float, port: PduPort) -> ComputeFit:
    """Does a compute draw fit its port and the published current envelope?"""
    if profile_watts < 0.0:
        raise ValidationError("profile_watts must be >= 0")
    current = profile_watts / port.nominal_voltage
    fits = current < COMPUTE_CURRENT_ENVELOPE_A and current <= port.effective_limit
    return ComputeFit(
        fits=fits,
        current_a=current,
        envelope_a=COMPUTE_CURRENT_ENVELOPE_A,
        port_limit_a=port.effective_limit,
    )


DEFAULT_RATE_SWEEP_HZ = (1.0, 5.0, 10.0, 20.0, 30.0, 50.0, 100.0)


def budget_report(
    profiles: list[LatencyProfile],
    action_rates: tuple[float, ...] = DEFAULT_RATE_SWEEP_HZ,
    jitter_sigmas: float = 0.0,
) -> dict:
    """Per-profile replanning bound and feasibility over a rate sweep."""
    rows = []
    for profile in profiles:
        f_max = replan_frequency(profile)
        feasibility = {}
        for rate in action_rates:
            check = schedule_feasibility(profile, rate, jitter_sigmas)
            feasibility[repr(rate)] = {"feasible": check.feasible, "slack_s": check.slack_s}
        rows.append(
            {
                "model_name": profile.model_name,
                "horizon": profile.horizon,
                "prefix": profile.prefix,
                "sampling_steps": profile.sampling_steps,
                "mean_latency_s": profile.mean_latency,
                "f_replan_max_hz": f_max,
                "f_replan_reported_hz": report_hz(f_max),
                "max_sustainable_action_rate_hz": max_sustainable_action_rate(profile),
                "action_rate_feasible": feasibility,
            }
        )
    return {"jitter_sigmas": jitter_sigmas, "profiles": rows}
