"""servokit: executable systems models for a low-cost bimanual mobile
manipulator — current budgeting and virtual-fuse synthesis, power transient
simulation, QP differential IK, an RGB-D grasp pipeline, link stiffness
estimation, and inference replanning budgets."""

__version__ = "0.1.0"

from .budget import LatencyProfile, replan_frequency, report_hz, schedule_feasibility
from .config import SystemConfig, load_config, load_topology
from .fuse import FuseSetting, LoadModel, bus_load, calibrate_inrush, max_torque, synthesize_fuses
from .ik import IkTask, Trajectory, gripper_close, ik_step, solve_trajectory
from .kinematics import fk, jacobian
from .model import (
    ActuatorSpec,
    BusConfig,
    ComputeLoad,
    KinematicChain,
    PduPort,
    PowerTopology,
    default_arm,
    register_to_torque,
)
from .perception import Detection, HsvRange, RgbdFrame, detect_and_locate, segment
from .powersim import Scenario, SimTrace, check_budget, simulate
from .stiffness import LinkProfile, elastic_energy, payload_bound, stiffness_from_deflection
from .transforms import Transform

__all__ = [
    "ActuatorSpec",
    "BusConfig",
    "ComputeLoad",
    "Detection",
    "FuseSetting",
    "HsvRange",
    "IkTask",
    "KinematicChain",
    "LatencyProfile",
    "LinkProfile",
    "LoadModel",
    "PduPort",
    "PowerTopology",
    "RgbdFrame",
    "Scenario",
    "SimTrace",
    "SystemConfig",
    "Trajectory",
    "Transform",
    "bus_load",
    "calibrate_inrush",
    "check_budget",
    "default_arm",
    "detect_and_locate",
    "elastic_energy",
    "fk",
    "gripper_close",
    "ik_step",
    "jacobian",
    "load_config",
    "load_topology",
    "max_torque",
    "payload_bound",
    "register_to_torque",
    "replan_frequency",
    "report_hz",
    "schedule_feasibility",
    "segment",
    "simulate",
    "solve_trajectory",
    "stiffness_from_deflection",
    "synthesize_fuses",
]
