import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doorverse.assets import LatchModel, compose, generate_body, generate_handle
from doorverse.errors import (ConfigurationError, EpisodeExhaustedError, InvalidArgumentError)
from doorverse.expert import expert_grasp_action
from doorverse.geometry import pose_about_axis, rot_axis_angle
from doorverse.sim import (Action, DETACH_POS, RobotModel, SimState, TaskConfig,
                           door_open_success, is_success, latch_force_door,
                           latch_force_handle, reset, step)

LATCH = LatchModel(k1=3.0, k2=3.0, f_f=150.0, thre=0.5)


def grasped_state(instance, robot, task, seed=3):
    state = reset(instance, robot, task, seed)
    result = step(state, expert_grasp_action(instance, state, robot), instance, robot, task)
    assert "grasped" in result.events
    return state


class TestLatchForces:
    def test_blocking_force_while_latched(self):
        assert latch_force_door(0.3, 0.1, LATCH) == 150.0

    def test_spring_force_once_unlocked(self):
        assert latch_force_door(0.4, 0.6, LATCH) == pytest.approx(1.2)

    def test_zero_displacement_zero_spring(self):
        assert latch_force_door(0.0, 0.6, LATCH) == 0.0

    def test_handle_spring_values(self):
        assert latch_force_handle(0.4, LATCH) == pytest.approx(1.2)
        assert latch_force_handle(0.0, LATCH) == 0.0
        assert latch_force_handle(1.0, LATCH) == pytest.approx(3.0)

    def test_negative_angles_rejected(self):
        with pytest.raises(InvalidArgumentError):
            latch_force_door(-0.1, 0.0, LATCH)
        with pytest.raises(InvalidArgumentError):
            latch_force_handle(-0.1, LATCH)

    def test_purity_against_direct_reimplementation(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            th_d = float(rng.random() * 3.0)
            th_h = float(rng.random() * 3.0)
            expected = LATCH.f_f if th_h <= LATCH.thre else LATCH.k1 * th_d
            assert latch_force_door(th_d, th_h, LATCH) == expected
            assert latch_force_handle(th_h, LATCH) == LATCH.k2 * th_h


class TestReset:
    def test_fresh_state(self, lever_interior, robot, task):
        state = reset(lever_interior, robot, task, seed=0)
        assert state.theta_d == 0.0 and state.theta_h == 0.0
        assert not state.unlocked and state.attached is None
        assert not state.success and not state.collided

    def test_determinism(self, lever_interior, robot, task):
        a = reset(lever_interior, robot, task, seed=5)
        b = reset(lever_interior, robot, task, seed=5)
        assert np.array_equal(a.base_xy_yaw, b.base_xy_yaw)
        assert np.array_equal(a.ee_pose.pos, b.ee_pose.pos)
        assert np.array_equal(a.ee_pose.rot, b.ee_pose.rot)

    def test_unachievable_task_rejected(self, robot):
        body = generate_body("Interior", 0)
        shallow = type(body)(**{**body.__dict__, "theta_d_max": math.radians(30.0)})
        inst = compose(shallow, generate_handle("lever", 1))
        with pytest.raises(ConfigurationError):
            reset(inst, robot, TaskConfig(), seed=0)


class TestStep:
    def test_on_manifold_handle_rotation(self, lever_interior, robot, task):
        state = grasped_state(lever_interior, robot, task)
        axis, origin = lever_interior.handle_axis_world(state.theta_d)
        spin = pose_about_axis(origin, axis, 0.2)
        target = spin.compose(state.ee_pose)
        result = step(state, Action(target.pos, target.rot, "close"),
                      lever_interior, robot, task)
        assert result.d_theta_h == pytest.approx(0.2, abs=1e-6)
        assert result.d_theta_d == pytest.approx(0.0, abs=1e-9)

    def test_latched_pull_blocks_door_and_detaches(self, lever_interior, robot, task):
        state = grasped_state(lever_interior, robot, task)
        axis, origin = lever_interior.door_axis_world()
        spin = pose_about_axis(origin, axis, 0.1)   # arc displacement > detach threshold
        target = spin.compose(state.ee_pose)
        displacement = np.linalg.norm(target.pos - state.ee_pose.pos)
        assert displacement > DETACH_POS
        result = step(state, Action(target.pos, target.rot, "close"),
                      lever_interior, robot, task)
        assert result.d_theta_d == 0.0
        assert "detached" in result.events and state.attached is None

    def test_spring_relaxation_halves_handle_angle(self, lever_interior, robot, task):
        state = reset(lever_interior, robot, task, seed=0)
        state.theta_h = 0.4
        hold = Action(state.ee_pose.pos, state.ee_pose.rot, "open")
        step(state, hold, lever_interior, robot, task)
        assert state.theta_h == pytest.approx(0.2)

    def test_relaxation_convergence_bound(self, lever_interior, robot, task):
        state = reset(lever_interior, robot, task, seed=0)
        x = 0.9
        state.theta_h = x
        hold = Action(state.ee_pose.pos, state.ee_pose.rot, "open")
        bound = math.ceil(math.log(x / 1e-6) / math.log(2.0))
        for _ in range(bound):
            if state.theta_h < 1e-6:
                break
            step(state, hold, lever_interior, robot, task)
        assert state.theta_h < 1e-6

    def test_horizon_exhaustion_raises(self, lever_interior, robot):
        task = TaskConfig(horizon=1)
        state = reset(lever_interior, robot, task, seed=0)
        hold = Action(state.ee_pose.pos, state.ee_pose.rot, "open")
        step(state, hold, lever_interior, robot, task)
        with pytest.raises(EpisodeExhaustedError):
            step(state, hold, lever_interior, robot, task)

    def test_non_orthonormal_rotation_rejected(self, lever_interior, robot, task):
        state = reset(lever_interior, robot, task, seed=0)
        bad = np.eye(3)
        bad[0, 0] = 2.0
        with pytest.raises(InvalidArgumentError):
            step(state, Action(state.ee_pose.pos, bad, "open"), lever_interior, robot, task)

    def test_attached_pose_tracks_fk_exactly(self, lever_interior, robot, task):
        state = grasped_state(lever_interior, robot, task)
        for k in range(6):
            axis, origin = lever_interior.handle_axis_world(state.theta_d)
            spin = pose_about_axis(origin, axis, 0.05)
            target = spin.compose(state.ee_pose)
            step(state, Action(target.pos, target.rot, "close"), lever_interior, robot, task)
            if state.attached is None:
                break
            fk = lever_interior.fk_handle(state.theta_d, state.theta_h).compose(state.attached)
            assert fk.almost_equal(state.ee_pose, tol=1e-9)

    def test_determinism_bit_identical(self, lever_interior, robot, task):
        results = []
        for _ in range(2):
            state = grasped_state(lever_interior, robot, task)
            axis, origin = lever_interior.handle_axis_world(state.theta_d)
            spin = pose_about_axis(origin, axis, 0.13)
            target = spin.compose(state.ee_pose)
            r = step(state, Action(target.pos, target.rot, "close"),
                     lever_interior, robot, task)
            results.append((state.theta_h, state.theta_d, r.d_theta_h, r.d_theta_d))
        assert results[0] == results[1]

    @given(st.integers(0, 500))
    @settings(max_examples=15)
    def test_joint_limits_always_hold(self, seed):
        inst = compose(generate_body("Interior", 2), generate_handle("lever", 2))
        robot = RobotModel()
        task = TaskConfig()
        rng = np.random.default_rng(seed)
        state = reset(inst, robot, task, seed)
        for _ in range(8):
            pos = state.ee_pose.pos + rng.standard_normal(3) * 0.05
            rot = rot_axis_angle(rng.standard_normal(3) + 1e-3, rng.random()) @ state.ee_pose.rot
            step(state, Action(pos, rot, "close"), inst, robot, task)
            assert 0.0 <= state.theta_d <= inst.body.theta_d_max
            assert 0.0 <= state.theta_h <= inst.handle.theta_h_max

    @given(st.integers(0, 500))
    @settings(max_examples=15)
    def test_latch_soundness_door_never_moves_while_locked(self, seed):
        inst = compose(generate_body("Safe", 1), generate_handle("round", 3))
        robot = RobotModel()
        task = TaskConfig()
        rng = np.random.default_rng(seed)
        state = reset(inst, robot, task, seed)
        ever_unlocked = False
        for _ in range(10):
            anchor = inst.grasp_anchor_world(state.theta_d, state.theta_h)
            pos = anchor + rng.standard_normal(3) * 0.02
            rot = rot_axis_angle(rng.standard_normal(3) + 1e-3, rng.random() * 0.2) @ state.ee_pose.rot
            step(state, Action(pos, rot, "close"), inst, robot, task)
            ever_unlocked = ever_unlocked or state.unlocked
            if not ever_unlocked:
                assert abs(state.theta_d) < 1e-12

    def test_detach_honesty(self, lever_interior, robot, task):
        state = grasped_state(lever_interior, robot, task)
        # command far off the constraint manifold
        target_pos = state.ee_pose.pos + np.array([0.0, 0.5, 0.0])
        result = step(state, Action(target_pos, state.ee_pose.rot, "close"),
                      lever_interior, robot, task)
        assert "detached" in result.events
        assert state.attached is None


class TestSuccess:
    def test_threshold_is_strict(self, task):
        assert not door_open_success(math.radians(44.9), task)
        assert not door_open_success(math.radians(45.0), task)
        assert door_open_success(math.radians(45.1), task)

    def test_is_success_reads_sticky_flag(self, task):
        state = SimState()
        assert not is_success(state, task)
        state.success = True
        assert is_success(state, task)

    def test_success_sticky_through_episode(self, lever_interior, robot, task):
        state = grasped_state(lever_interior, robot, task)
        axis, origin = lever_interior.handle_axis_world(state.theta_d)
        for _ in range(4):
            spin = pose_about_axis(origin, axis, 0.15)
            target = spin.compose(state.ee_pose)
            step(state, Action(target.pos, target.rot, "close"), lever_interior, robot, task)
        assert state.unlocked
        d_axis, d_origin = lever_interior.door_axis_world()
        for _ in range(9):
            spin = pose_about_axis(d_origin, d_axis, 0.1)
            target = spin.compose(state.ee_pose)
            step(state, Action(target.pos, target.rot, "close"), lever_interior, robot, task)
        assert state.success
        hold = Action(state.ee_pose.pos, state.ee_pose.rot, "open")
        result = step(state, hold, lever_interior, robot, task)
        assert is_success(state, task)
