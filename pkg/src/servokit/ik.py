"""Differential inverse kinematics as a box-constrained least-squares QP.

Each control tick solves

    min  || W (J dq - v) ||^2  +  lambda * || dq - dq_post ||^2
    s.t. lo <= dq <= hi,  dq_i = 0 for frozen joints

where v is the clamped pose-error twist, W the per-axis frame weights,
and dq_post a small per-tick pull toward the posture reference. The box
combines joint limits and velocity limits scaled by dt, so no sample of a
solved trajectory can violate either. The QP is solved with an exact
bounded-variable least-squares method on the unfrozen coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .errors import SingularChainError, ValidationError
from .kinematics import fk, jacobian
from .model import KinematicChain
from .transforms import Transform, so3_log

_KKT_TOL = 1e-8
_STALL_NORM = 1e-9


@dataclass
class IkTask:
    """Target pose plus the weights, limits, and tolerances of one solve.

    Zero orientation weights make the task position-only: rotation error
    then neither enters the objective nor gates termination. posture_ref
    None means "hold the start configuration".
    """

    target_pose: Transform
    frame_weight_pos: np.ndarray = field(default_factory=lambda: np.ones(3))
    frame_weight_rot: np.ndarray = field(default_factory=lambda: np.ones(3))
    posture_ref: np.ndarray | None = None
    posture_weight: float = 1e-2
    posture_rate: float = 1.0  # fraction of the posture error pulled per second
    frozen_joints: frozenset[int] = frozenset()
    dt: float = 0.01
    max_steps: int = 200
    tol_pos: float = 1e-3
    tol_rot: float = 1e-2
    max_linear_rate: float = 0.2  # m/s twist clamp
    max_angular_rate: float = 1.0  # rad/s twist clamp

    def __post_init__(self):
        self.frame_weight_pos = np.asarray(self.frame_weight_pos, dtype=float)
        self.frame_weight_rot = np.asarray(self.frame_weight_rot, dtype=float)
        if self.dt <= 0.0:
            raise ValidationError("task dt must be > 0")
        if np.any(self.frame_weight_pos < 0.0) or np.any(self.frame_weight_rot < 0.0):
            raise ValidationError("frame weights must be >= 0")
        if self.posture_weight < 0.0:
            raise ValidationError("posture_weight must be >= 0")


@dataclass
class Trajectory:
    """Joint samples at fixed dt plus how the solve ended."""

    qs: np.ndarray  # (steps+1, n)
    dt: float
    termination: str  # "reached" | "max_steps" | "stalled"
    final_pos_err: float
    final_rot_err: float

    def write_csv(self, path) -> None:
        import csv

        n = self.qs.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"q{i}" for i in range(n)])
            for k, q in enumerate(self.qs):
                writer.writerow([repr(k * self.dt)] + [repr(float(v)) for v in q])


def error_twist(current: Transform, task: IkTask) -> np.ndarray:
    """Clamped 6-twist from current to target: position error stacked on
    the log of the relative rotation, both in the base frame."""
    e_pos = task.target_pose.translation - current.translation
    e_rot = so3_log(task.target_pose.rotation @ current.rotation.T)
    max_pos = task.max_linear_rate * task.dt
    max_rot = task.max_angular_rate * task.dt
    pos_norm = float(np.linalg.norm(e_pos))
    rot_norm = float(np.linalg.norm(e_rot))
    if pos_norm > max_pos:
        e_pos = e_pos * (max_pos / pos_norm)
    if rot_norm > max_rot:
        e_rot = e_rot * (max_rot / rot_norm)
    return np.concatenate([e_pos, e_rot])


def step_bounds(chain: KinematicChain, q: np.ndarray, task: IkTask) -> tuple[np.ndarray, np.ndarray]:
    """Per-joint displacement box from joint limits and velocity limits."""
    vel_step = chain.vel_limits * task.dt
    lo = np.maximum(chain.limits_lo - q, -vel_step)
    hi = np.minimum(chain.limits_hi - q, vel_step)
    return lo, hi


def ik_step(chain: KinematicChain, q: np.ndarray, task: IkTask) -> np.ndarray:
    """One QP tick; returns the joint displacement dq."""
    q = np.asarray(q, dtype=float)
    chain.check_limits(q)
    n = len(chain.joints)
    frozen = frozenset(task.frozen_joints)
    free = np.array([i for i in range(n) if i not in frozen], dtype=int)
    if free.size == 0:
        raise ValidationError("all joints frozen; nothing to solve")

    jac = jacobian(chain, q)
    v = error_twist(fk(chain, q), task)
    weights = np.concatenate([task.frame_weight_pos, task.frame_weight_rot])

    if task.posture_ref is not None:
        pull = min(1.0, task.posture_rate * task.dt)
        dq_post = (np.asarray(task.posture_ref, dtype=float) - q) * pull
    else:
        dq_post = np.zeros(n)

    lo, hi = step_bounds(chain, q, task)
    # Floating-point drift can leave q a few ulp past a limit; keep 0 feasible.
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)

    a_task = weights[:, None] * jac[:, free]
    b_task = weights * v
    lam = task.posture_weight
    if lam > 0.0:
        sqrt_lam = np.sqrt(lam)
        a = np.vstack([a_task, sqrt_lam * np.eye(free.size)])
        b = np.concatenate([b_task, sqrt_lam * dq_post[free]])
    else:
        if np.linalg.matrix_rank(a_task) < free.size:
            raise SingularChainError(
                "rank-deficient Jacobian with zero posture weight; solution not unique"
            )
        a, b = a_task, b_task

    result = lsq_linear(a, b, bounds=(lo[free], hi[free]), method="bvls")
    dq = np.zeros(n)
    dq[free] = result.x

    _assert_kkt(a, b, result.x, lo[free], hi[free])
    return dq


def _assert_kkt(a: np.ndarray, b: np.ndarray, x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
    """First-order optimality of the box-constrained least squares solve."""
    grad = a.T @ (a @ x - b)  # half the true gradient; sign pattern is what matters
    scale = max(1.0, float(np.abs(grad).max()))
    at_lo = x <= lo + 1e-12
    at_hi = x >= hi - 1e-12
    residual = np.where(at_lo, np.minimum(grad, 0.0), np.where(at_hi, np.maximum(grad, 0.0), grad))
    if np.abs(residual).max() > _KKT_TOL * scale:
        raise AssertionError(f"QP stationarity residual {np.abs(residual).max():.3e} above tolerance")


def pose_errors(current: Transform, task: IkTask) -> tuple[float, float]:
    pos = float(np.linalg.norm(task.target_pose.translation - current.translation))
    rot = float(np.linalg.norm(so3_log(task.target_pose.rotation @ current.rotation.T)))
    return pos, rot


def solve_trajectory(chain: KinematicChain, q0: np.ndarray, task: IkTask) -> Trajectory:
    """Iterate ik_step until the task tolerances are met, the step stalls,
    or max_steps runs out. Task error is not guaranteed monotone (posture
    trade-off); only the final error is meaningful."""
    q = np.asarray(q0, dtype=float).copy()
    chain.check_limits(q)
    if task.posture_ref is None:
        task = IkTask(**{**task.__dict__, "posture_ref": q.copy()})

    rot_gated = bool(np.any(task.frame_weight_rot > 0.0))
    pos_gated = bool(np.any(task.frame_weight_pos > 0.0))

    def reached(pos_err: float, rot_err: float) -> bool:
        return (not pos_gated or pos_err < task.tol_pos) and (
            not rot_gated or rot_err < task.tol_rot
        )

    samples = [q.copy()]
    termination = "max_steps"
    pos_err, rot_err = pose_errors(fk(chain, q), task)
    for _ in range(task.max_steps):
        if reached(pos_err, rot_err):
            termination = "reached"
            break
        dq = ik_step(chain, q, task)
        if float(np.linalg.norm(dq)) < _STALL_NORM:
            termination = "stalled"
            break
        q = q + dq
        samples.append(q.copy())
        pos_err, rot_err = pose_errors(fk(chain, q), task)
    if termination == "max_steps" and reached(pos_err, rot_err):
        termination = "reached"
    return Trajectory(
        qs=np.array(samples),
        dt=task.dt,
        termination=termination,
        final_pos_err=pos_err,
        final_rot_err=rot_err,
    )


def gripper_close(start: float, end: float, step: float, dwell: float) -> list[tuple[float, float]]:
    """Stepped closure: monotone (time, position) commands from start to end
    inclusive, spaced by dwell seconds."""
    if step <= 0.0:
        raise ValidationError(f"gripper step must be > 0, got {step}")
    if dwell < 0.0:
        raise ValidationError("gripper dwell must be >= 0")
    if start == end:
        return [(0.0, start)]
    span = abs(end - start)
    direction = 1.0 if end > start else -1.0
    count = int(np.ceil(span / step - 1e-12))  # interior steps before the final endpoint
    positions = [start + direction * step * k for k in range(count)]
    positions.append(end)
    return [(k * dwell, pos) for k, pos in enumerate(positions)]
