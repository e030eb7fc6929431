import numpy as np
import pytest

from servokit.errors import ValidationError
from servokit.kinematics import fk, jacobian
from servokit.model import Joint, KinematicChain, default_arm
from servokit.transforms import Transform, rotation_about_axis, rpy_matrix, so3_log


def random_q(chain, rng, margin=0.85):
    lo, hi = chain.limits_lo * margin, chain.limits_hi * margin
    return lo + (hi - lo) * rng.random(len(chain))


def fk_oracle(chain, q):
    # Independent 4x4 homogeneous-matrix composition.
    m = np.eye(4)
    for joint, qi in zip(chain.joints, q):
        step = np.eye(4)
        step[:3, :3] = joint.origin.rotation
        step[:3, 3] = joint.origin.translation
        rot = np.eye(4)
        rot[:3, :3] = rotation_about_axis(joint.axis, qi)
        m = m @ step @ rot
    tail = np.eye(4)
    tail[:3, :3] = chain.end_effector_offset.rotation
    tail[:3, 3] = chain.end_effector_offset.translation
    return m @ tail


def planar_two_link(l1=0.3, l2=0.2):
    z = np.array([0.0, 0.0, 1.0])
    return KinematicChain(
        joints=(
            Joint(axis=z, origin=Transform(), limit_lo=-np.pi, limit_hi=np.pi, vel_limit=5.0),
            Joint(
                axis=z,
                origin=Transform(translation=np.array([l1, 0.0, 0.0])),
                limit_lo=-np.pi,
                limit_hi=np.pi,
                vel_limit=5.0,
            ),
        ),
        end_effector_offset=Transform(translation=np.array([l2, 0.0, 0.0])),
    )


class TestFk:
    def test_zero_pose_is_product_of_origins(self):
        arm = default_arm()
        pose = fk(arm, np.zeros(6))
        expected_t = np.zeros(3)
        for joint in arm.joints:
            expected_t = expected_t + joint.origin.translation
        expected_t = expected_t + arm.end_effector_offset.translation
        assert np.allclose(pose.translation, expected_t, atol=1e-15)
        assert np.allclose(pose.rotation, np.eye(3), atol=1e-15)

    def test_single_revolute_quarter_turn(self):
        z = np.array([0.0, 0.0, 1.0])
        link = 0.25
        chain = KinematicChain(
            joints=(Joint(axis=z, origin=Transform(), limit_lo=-np.pi, limit_hi=np.pi, vel_limit=5.0),),
            end_effector_offset=Transform(translation=np.array([link, 0.0, 0.0])),
        )
        pose = fk(chain, np.array([np.pi / 2]))
        assert np.allclose(pose.translation, [0.0, link, 0.0], atol=1e-12)

    def test_matches_matrix_oracle_at_random_configs(self):
        arm = default_arm()
        rng = np.random.default_rng(7)
        for _ in range(50):
            q = random_q(arm, rng)
            pose = fk(arm, q)
            expected = fk_oracle(arm, q)
            assert np.allclose(pose.rotation, expected[:3, :3], atol=1e-12)
            assert np.allclose(pose.translation, expected[:3, 3], atol=1e-12)

    def test_rotation_stays_proper(self):
        arm = default_arm()
        rng = np.random.default_rng(11)
        for _ in range(20):
            pose = fk(arm, random_q(arm, rng))
            assert np.max(np.abs(pose.rotation.T @ pose.rotation - np.eye(3))) < 1e-9
            assert abs(np.linalg.det(pose.rotation) - 1.0) < 1e-9

    def test_limit_violation_raises(self):
        arm = default_arm()
        q = np.zeros(6)
        q[0] = 3.0  # beyond the 2.2 rad pan limit
        with pytest.raises(ValidationError):
            fk(arm, q)


class TestJacobian:
    def test_finite_difference_check(self):
        # Central differences on fk, h = 1e-6: both position rows and
        # rotation rows (via the log of the relative rotation).
        arm = default_arm()
        rng = np.random.default_rng(23)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            q = random_q(arm, rng)
            jac = jacobian(arm, q)
            fd = np.zeros_like(jac)
            for i in range(len(arm)):
                dq = np.zeros(len(arm))
                dq[i] = h
                plus = fk(arm, q + dq)
                minus = fk(arm, q - dq)
                fd[:3, i] = (plus.translation - minus.translation) / (2 * h)
                fd[3:, i] = so3_log(plus.rotation @ minus.rotation.T) / (2 * h)
            worst = max(worst, float(np.abs(jac - fd).max()))
        assert worst < 1e-6

    def test_planar_two_link_analytic(self):
        chain = planar_two_link(0.3, 0.2)
        for q1, q2 in [(0.2, 0.4), (-1.0, 0.7), (0.0, 0.0), (1.2, -0.5)]:
            jac = jacobian(chain, np.array([q1, q2]))
            s1, c1 = np.sin(q1), np.cos(q1)
            s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
            expected = np.array(
                [
                    [-0.3 * s1 - 0.2 * s12, -0.2 * s12],
                    [0.3 * c1 + 0.2 * c12, 0.2 * c12],
                ]
            )
            assert np.allclose(jac[:2], expected, atol=1e-12)
            assert np.allclose(jac[5], [1.0, 1.0])  # both joints spin about z

    def test_frozen_column_zeroed(self):
        arm = default_arm()
        q = np.full(6, 0.3)
        jac = jacobian(arm, q, frozen=frozenset({2, 5}))
        assert np.all(jac[:, 2] == 0.0)
        assert np.all(jac[:, 5] == 0.0)
        full = jacobian(arm, q)
        keep = [0, 1, 3, 4]
        assert np.allclose(jac[:, keep], full[:, keep])

    def test_directional_derivative_consistency(self):
        # fk position shift matches J @ dq to second order in ||dq||.
        arm = default_arm()
        rng = np.random.default_rng(5)
        q = random_q(arm, rng)
        jac = jacobian(arm, q)
        direction = rng.standard_normal(6)
        direction /= np.linalg.norm(direction)
        for eps in (1e-3, 1e-4):
            moved = fk(arm, q + eps * direction)
            base = fk(arm, q)
            lin = moved.translation - base.translation
            assert np.linalg.norm(lin - eps * (jac[:3] @ direction)) < 5.0 * eps**2


class TestTransforms:
    def test_so3_log_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            axis = rng.standard_normal(3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(-np.pi + 1e-6, np.pi - 1e-6)
            rot = rotation_about_axis(axis, angle)
            recovered = so3_log(rot)
            assert np.allclose(recovered, axis * angle, atol=1e-8)

    def test_so3_log_small_angle(self):
        rot = rotation_about_axis(np.array([0.0, 0.0, 1.0]), 1e-12)
        assert np.allclose(so3_log(rot), [0.0, 0.0, 1e-12], atol=1e-15)

    def test_compose_inverse(self):
        t1 = Transform(rotation=rpy_matrix(0.2, -0.4, 0.9), translation=np.array([0.1, 0.2, -0.3]))
        t2 = Transform(rotation=rpy_matrix(-0.5, 0.1, 0.3), translation=np.array([-0.2, 0.0, 0.5]))
        p = np.array([0.3, -0.1, 0.2])
        assert np.allclose(t1.compose(t2).apply(p), t1.apply(t2.apply(p)), atol=1e-14)
        roundtrip = t1.inverse().apply(t1.apply(p))
        assert np.allclose(roundtrip, p, atol=1e-14)
