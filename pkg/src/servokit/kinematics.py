"""Forward kinematics and geometric Jacobians for serial revolute chains."""

from __future__ import annotations

import numpy as np

from .model import KinematicChain
from .transforms import Transform, rotation_about_axis


def joint_frames(chain: KinematicChain, q: np.ndarray) -> tuple[list[Transform], Transform]:
    """Per-joint frames (after the fixed origin, before the joint rotation)
    and the end-effector pose. Validates joint limits."""
    q = np.asarray(q, dtype=float)
    chain.check_limits(q)
    frames: list[Transform] = []
    t = Transform.identity()
    for joint, qi in zip(chain.joints, q):
        t = t.compose(joint.origin)
        frames.append(t)
        t = t.compose(Transform(rotation=rotation_about_axis(joint.axis, float(qi))))
    return frames, t.compose(chain.end_effector_offset)


def fk(chain: KinematicChain, q: np.ndarray) -> Transform:
    """End-effector pose in the chain base frame."""
    _, pose = joint_frames(chain, q)
    return pose


def jacobian(chain: KinematicChain, q: np.ndarray, frozen: frozenset[int] = frozenset()) -> np.ndarray:
    """6 x n geometric Jacobian (linear rows first, then angular).

    Column i is [z_i x (p_e - p_i); z_i] for revolute joint i; columns of
    frozen joints are zeroed.
    """
    frames, ee = joint_frames(chain, q)
    p_e = ee.translation
    jac = np.zeros((6, len(chain.joints)))
    for i, (joint, frame) in enumerate(zip(chain.joints, frames)):
        if i in frozen:
            continue
        z_i = frame.rotation @ joint.axis
        p_i = frame.translation
        jac[:3, i] = np.cross(z_i, p_e - p_i)
        jac[3:, i] = z_i
    return jac
