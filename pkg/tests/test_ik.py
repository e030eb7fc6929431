import itertools

import numpy as np
import pytest

from servokit.errors import ValidationError
from servokit.ik import IkTask, error_twist, gripper_close, ik_step, solve_trajectory, step_bounds
from servokit.kinematics import fk, jacobian
from servokit.model import Joint, KinematicChain, default_arm
from servokit.transforms import Transform

HOME = np.array([0.0, -0.35, 0.8, 0.8, 0.0, 0.0])


def position_task(target_xyz, **kwargs):
    defaults = dict(
        target_pose=Transform(translation=np.asarray(target_xyz, dtype=float)),
        frame_weight_rot=np.zeros(3),
        frozen_joints=default_arm().frozen_by_default(),
    )
    defaults.update(kwargs)
    return IkTask(**defaults)


def three_joint_chain():
    y = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])
    return KinematicChain(
        joints=(
            Joint(axis=z, origin=Transform(), limit_lo=-2.0, limit_hi=2.0, vel_limit=3.0),
            Joint(
                axis=y,
                origin=Transform(translation=np.array([0.15, 0.0, 0.0])),
                limit_lo=-2.0,
                limit_hi=2.0,
                vel_limit=3.0,
            ),
            Joint(
                axis=y,
                origin=Transform(translation=np.array([0.12, 0.0, 0.0])),
                limit_lo=-2.0,
                limit_hi=2.0,
                vel_limit=3.0,
            ),
        ),
        end_effector_offset=Transform(translation=np.array([0.1, 0.0, 0.0])),
    )


def qp_objective(a, b, x):
    r = a @ x - b
    return float(r @ r)


def brute_force_box_qp(a, b, lo, hi):
    """Exhaustive active-set enumeration: every coordinate is at its lower
    bound, free, or at its upper bound; solve the free block exactly and
    keep the best feasible candidate."""
    n = a.shape[1]
    best_x, best_f = None, np.inf
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        x = np.zeros(n)
        fixed = []
        free = []
        for i, s in enumerate(pattern):
            if s == -1:
                x[i] = lo[i]
                fixed.append(i)
            elif s == 1:
                x[i] = hi[i]
                fixed.append(i)
            else:
                free.append(i)
        if free:
            af = a[:, free]
            rhs = b - a[:, fixed] @ x[fixed] if fixed else b
            sol, *_ = np.linalg.lstsq(af, rhs, rcond=None)
            x[np.array(free)] = sol
            if np.any(x[free] < lo[free] - 1e-12) or np.any(x[free] > hi[free] + 1e-12):
                continue
        f = qp_objective(a, b, x)
        if f < best_f - 1e-15:
            best_f, best_x = f, x
    return best_x, best_f


def assemble_qp(chain, q, task):
    # Same stacking the solver uses; the comparison point is the *solution*.
    jac = jacobian(chain, q)
    v = error_twist(fk(chain, q), task)
    w = np.concatenate([task.frame_weight_pos, task.frame_weight_rot])
    lam = task.posture_weight
    ref = task.posture_ref if task.posture_ref is not None else q
    dq_post = (np.asarray(ref, dtype=float) - q) * min(1.0, task.posture_rate * task.dt)
    a = np.vstack([w[:, None] * jac, np.sqrt(lam) * np.eye(len(chain))])
    b = np.concatenate([w * v, np.sqrt(lam) * dq_post])
    lo, hi = step_bounds(chain, q, task)
    return a, b, lo, hi


class TestIkStep:
    def test_fixed_point_at_target_with_matching_posture(self):
        arm = default_arm()
        task = position_task(fk(arm, HOME).translation, posture_ref=HOME.copy())
        task.target_pose = fk(arm, HOME)
        task.frame_weight_rot = np.ones(3)
        dq = ik_step(arm, HOME, task)
        assert np.linalg.norm(dq) < 1e-12

    def test_posture_pull_bounded_at_target(self):
        arm = default_arm()
        ref = HOME + 0.2
        task = position_task(fk(arm, HOME).translation, posture_ref=ref)
        dq = ik_step(arm, HOME, task)
        pull = (ref - HOME) * min(1.0, task.posture_rate * task.dt)
        assert np.linalg.norm(dq) <= np.linalg.norm(pull) + 1e-12

    def test_interior_solution_matches_damped_least_squares(self):
        # With generous bounds the box is inactive and the answer is the
        # dense closed form (J^T W^2 J + lam I)^-1 (J^T W^2 v + lam dq_post).
        arm = default_arm()
        q = HOME.copy()
        task = IkTask(
            target_pose=Transform(translation=fk(arm, q).translation + np.array([0.001, 0.0005, -0.0008])),
            frame_weight_rot=np.zeros(3),
            posture_ref=q + 0.05,
            posture_weight=0.02,
        )
        jac = jacobian(arm, q)
        v = error_twist(fk(arm, q), task)
        w2 = np.diag(np.concatenate([task.frame_weight_pos, task.frame_weight_rot]) ** 2)
        dq_post = 0.05 * np.ones(6) * min(1.0, task.posture_rate * task.dt)
        lam = task.posture_weight
        closed = np.linalg.solve(
            jac.T @ w2 @ jac + lam * np.eye(6), jac.T @ w2 @ v + lam * dq_post
        )
        lo, hi = step_bounds(arm, q, task)
        assert np.all(closed > lo) and np.all(closed < hi)  # interior case by construction
        dq = ik_step(arm, q, task)
        assert np.allclose(dq, closed, atol=1e-10)

    def test_box_active_matches_brute_force_enumeration(self):
        chain = three_joint_chain()
        rng = np.random.default_rng(17)
        for trial in range(30):
            q = rng.uniform(-1.2, 1.2, size=3)
            target = fk(chain, q).translation + rng.uniform(-0.05, 0.05, size=3)
            task = IkTask(
                target_pose=Transform(translation=target),
                frame_weight_rot=np.zeros(3),
                posture_ref=np.clip(q + rng.uniform(-1.0, 1.0, size=3), -2.0, 2.0),
                posture_weight=10 ** rng.uniform(-3, -1),
                dt=0.01,
                max_linear_rate=2.0,  # big error per step so bounds actually bind
            )
            dq = ik_step(chain, q, task)
            a, b, lo, hi = assemble_qp(chain, q, task)
            x_star, f_star = brute_force_box_qp(a, b, lo, hi)
            assert qp_objective(a, b, dq) <= f_star + 1e-8
            assert np.allclose(dq, x_star, atol=1e-6)

    def test_first_order_optimality_sampling(self):
        # Nudging any free coordinate inside the box must not help by more
        # than the tolerance.
        arm = default_arm()
        task = position_task(np.array([0.30, 0.05, 0.02]), posture_ref=HOME.copy())
        q = HOME.copy()
        free = [i for i in range(len(arm)) if i not in task.frozen_joints]
        for _ in range(5):
            dq = ik_step(arm, q, task)
            a, b, lo, hi = assemble_qp(arm, q, task)
            base = qp_objective(a, b, dq)
            for i in free:
                for eps in (1e-5, -1e-5):
                    probe = dq.copy()
                    probe[i] = np.clip(probe[i] + eps, lo[i], hi[i])
                    assert qp_objective(a, b, probe) >= base - 1e-10
            q = q + dq

    def test_frozen_joints_do_not_move(self):
        arm = default_arm()
        task = position_task(np.array([0.25, 0.1, 0.1]), frozen_joints=frozenset({1, 5}))
        dq = ik_step(arm, HOME, task)
        assert dq[1] == 0.0 and dq[5] == 0.0

    def test_all_frozen_rejected(self):
        arm = default_arm()
        task = position_task(np.array([0.2, 0.0, 0.1]), frozen_joints=frozenset(range(6)))
        with pytest.raises(ValidationError):
            ik_step(arm, HOME, task)


class TestSolveTrajectory:
    def test_reachable_target_converges_within_two_seconds(self):
        arm = default_arm()
        task = position_task(np.array([0.25, 0.0, 0.05]), max_steps=200)
        traj = solve_trajectory(arm, HOME, task)
        assert traj.termination == "reached"
        assert traj.final_pos_err < 1e-3
        assert len(traj.qs) - 1 <= 200

    def test_start_at_solution_reaches_in_step_zero(self):
        arm = default_arm()
        task = IkTask(target_pose=fk(arm, HOME), frozen_joints=arm.frozen_by_default())
        traj = solve_trajectory(arm, HOME, task)
        assert traj.termination == "reached"
        assert len(traj.qs) == 1

    def test_unreachable_target_stops_at_workspace_boundary(self):
        # Boundary oracle: the reach sphere radius is the link-length sum,
        # centered on the shoulder (joints 1 and 2 share an origin point).
        arm = default_arm()
        shoulder = np.array([0.0, 0.0, 0.0563])
        reach = arm.link_length_sum()
        task = position_task(
            np.array([1.0, 0.0, 0.0563]),
            posture_weight=1e-3,
            max_steps=600,
        )
        traj = solve_trajectory(arm, HOME, task)
        assert traj.termination in ("stalled", "max_steps")
        final = fk(arm, traj.qs[-1]).translation
        assert np.linalg.norm(final - shoulder) >= reach - 0.005

    def test_limits_and_velocity_bounds_never_violated(self):
        arm = default_arm()
        rng = np.random.default_rng(31)
        lo, hi = arm.limits_lo, arm.limits_hi
        vel_step = arm.vel_limits * 0.01
        for _ in range(10):
            q_goal = lo + (hi - lo) * rng.uniform(0.15, 0.85, size=6)
            task = position_task(fk(arm, q_goal).translation, max_steps=250, max_linear_rate=0.5)
            traj = solve_trajectory(arm, HOME, task)
            assert np.all(traj.qs >= lo - 1e-9) and np.all(traj.qs <= hi + 1e-9)
            steps = np.diff(traj.qs, axis=0)
            assert np.all(np.abs(steps) <= vel_step + 1e-9)

    def test_frozen_joint_invariance_across_trajectory(self):
        arm = default_arm()
        task = position_task(
            np.array([0.20, -0.08, 0.10]), frozen_joints=frozenset({0, 5}), max_steps=250
        )
        traj = solve_trajectory(arm, HOME, task)
        assert np.all(traj.qs[:, 0] == HOME[0])
        assert np.all(traj.qs[:, 5] == HOME[5])

    def test_error_not_required_monotone_but_final_checked(self):
        arm = default_arm()
        task = position_task(np.array([0.30, 0.05, 0.02]), max_steps=300)
        traj = solve_trajectory(arm, HOME, task)
        assert traj.termination == "reached"
        assert traj.final_pos_err < task.tol_pos


class TestGripperClose:
    def test_seven_commands_with_total_dwell(self):
        commands = gripper_close(0.8, 0.2, 0.1, 0.05)
        assert len(commands) == 7
        positions = [p for _, p in commands]
        assert positions[0] == 0.8 and positions[-1] == 0.2
        assert all(a > b for a, b in zip(positions, positions[1:]))  # monotone closing
        assert commands[-1][0] - commands[0][0] == pytest.approx(0.30, rel=1e-12)

    def test_start_equals_end_single_command(self):
        assert gripper_close(0.5, 0.5, 0.1, 0.05) == [(0.0, 0.5)]

    def test_step_larger_than_range_two_commands(self):
        commands = gripper_close(0.0, 0.05, 0.1, 0.02)
        assert [p for _, p in commands] == [0.0, 0.05]

    def test_opening_direction(self):
        commands = gripper_close(0.2, 0.5, 0.1, 0.01)
        positions = [p for _, p in commands]
        assert positions == pytest.approx([0.2, 0.3, 0.4, 0.5])

    def test_zero_step_rejected(self):
        with pytest.raises(ValidationError):
            gripper_close(0.8, 0.2, 0.0, 0.05)
