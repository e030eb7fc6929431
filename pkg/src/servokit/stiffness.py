"""Cantilever stiffness, parasitic elastic energy, and payload bounds.

A compliant link behaves like a series spring that stores motor work as
U = k * delta^2 / 2 instead of transmitting it; the linear-regime spring
constant comes straight from the static deflection test. Measured yield
forces are gearbox failures and stay calibration data, never computed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

STANDARD_GRAVITY = 9.80665  # m/s^2

# Deflection was read at 1 mm resolution, so a fitted k carries roughly
# +/-25% data-limited uncertainty at the 2 mm operating point.
DEFLECTION_RESOLUTION_M = 0.001


@dataclass(frozen=True)
class LinkProfile:
    """One print profile's static test: geometry, load, and outcome."""

    name: str
    walls: int
    infill: float
    mass: float  # kg
    test_length: float  # m, cantilever extension of the load point
    test_load_mass: float  # kg
    measured_deflection: float  # m
    yield_force_mean: float = 0.0  # N, measured gearbox yield (calibration data)
    yield_force_std: float = 0.0

    def __post_init__(self):
        if self.mass <= 0.0 or self.test_length <= 0.0:
            raise ValidationError(f"profile {self.name!r}: mass and test_length must be > 0")
        if self.measured_deflection <= 0.0:
            raise ValidationError(f"profile {self.name!r}: measured_deflection must be > 0")
        if self.walls < 1:
            raise ValidationError(f"profile {self.name!r}: walls must be >= 1")
        if not 0.0 < self.infill <= 1.0:
            raise ValidationError(f"profile {self.name!r}: infill must be in (0, 1]")


# Static characterization of the three print profiles: 100 g load at
# 18.6 cm extension, 2 mm deflection each; masses and yield forces differ.
BASELINE = LinkProfile(
    name="baseline", walls=2, infill=0.15, mass=0.758,
    test_length=0.186, test_load_mass=0.100, measured_deflection=0.002,
    yield_force_mean=11.06, yield_force_std=0.63,
)
HIGH_INFILL = LinkProfile(
    name="high_infill", walls=2, infill=0.50, mass=0.996,
    test_length=0.186, test_load_mass=0.100, measured_deflection=0.002,
    yield_force_mean=12.00, yield_force_std=1.28,
)
HIGH_SHELL = LinkProfile(
    name="high_shell", walls=4, infill=0.15, mass=0.838,
    test_length=0.186, test_load_mass=0.100, measured_deflection=0.002,
    yield_force_mean=18.49, yield_force_std=2.15,
)
REFERENCE_PROFILES = (BASELINE, HIGH_INFILL, HIGH_SHELL)


def stiffness_from_deflection(profile: LinkProfile) -> float:
    """Linear-regime spring constant k = F / delta in N/m."""
    force = profile.test_load_mass * STANDARD_GRAVITY
    return force / profile.measured_deflection


def elastic_energy(k: float, delta: float) -> float:
    """Parasitic energy stored at deflection delta: k * delta^2 / 2, joules."""
    if k < 0.0:
        raise ValidationError("stiffness must be >= 0")
    return 0.5 * k * delta * delta


def payload_bound(reach: float, stall_torque: float) -> float:
    """Rigid-link end-effector force bound from a shoulder-dominant,
    single-joint model: F = tau_stall / reach, newtons."""
    if reach <= 0.0:
        raise ValidationError("reach must be > 0")
    return stall_torque / reach


def characterize(
    profiles: tuple[LinkProfile, ...] = REFERENCE_PROFILES, stall_torque: float | None = None
) -> list[dict]:
    """Per-profile report rows, ranked by stiffness-to-mass ratio."""
    rows = []
    for profile in profiles:
        k = stiffness_from_deflection(profile)
        row = {
            "name": profile.name,
            "walls": profile.walls,
            "infill": profile.infill,
            "mass_kg": profile.mass,
            "stiffness_n_per_m": k,
            "stiffness_per_mass": k / profile.mass,
            "elastic_energy_j": elastic_energy(k, profile.measured_deflection),
            "yield_force_mean_n": profile.yield_force_mean,
            "yield_force_std_n": profile.yield_force_std,
        }
        if stall_torque is not None:
            row["payload_bound_n"] = payload_bound(profile.test_length, stall_torque)
        rows.append(row)
    rows.sort(key=lambda r: r["stiffness_per_mass"], reverse=True)
    return rows
