"""Quasi-static articulated door simulator.

Forces from the latch model are rendered as motion constraints rather than
integrated dynamics: the latch blocks door opening outright while locked, and
the handle/door springs become per-step exponential relaxation once the
gripper lets go. Attached manipulation is resolved by projecting the commanded
end-effector pose onto the two-joint motion manifold (damped Gauss-Newton).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assets import DoorInstance, LatchModel  # noqa: F401  (LatchModel re-exported here)
from .errors import (ConfigurationError, EpisodeExhaustedError, InvalidArgumentError)
from .geometry import (Box, Cylinder, Pose, Primitive, point_primitive_outside_distance,
                       ray_box, rot_axis_angle, rotation_to_rotvec, is_rotation, unit)

ATTACH_DIST = 0.015          # gripper midpoint to handle surface, meters
DETACH_POS = 0.03            # constrained-solve residual thresholds
DETACH_ROT = 0.3
RELOCK_MARGIN = math.radians(2.0)
SPRING_RELAX_H = 0.5         # per-step handle spring relaxation factor
SPRING_RELAX_D = 0.05        # per-step door spring relaxation factor
GN_ITERS = 5
GN_DAMPING = 1e-6
CONTACT_EXCLUDE_RADIUS = 0.18
UNLOCK_EPS = 1e-9    # tolerance on the unlock comparison; solver residuals are ~1e-11


@dataclass(frozen=True)
class RobotModel:
    """Mobile base + reach-constrained arm proxy + parallel gripper."""

    mobile: bool = True
    reach: float = 0.9
    aperture: float = 0.08
    finger_length: float = 0.08
    base_standoff: float = 1.2      # home distance in front of the door center
    shoulder_height: float = 1.0
    max_step_translation: float = 0.10   # attached manipulation, per action
    max_step_rotation: float = 0.5
    base_max_step: float = 0.25          # attached base follow, per action
    arm_radius: float = 0.03
    follow_fraction: float = 0.85        # keep ee within follow_fraction * reach

    def validate(self) -> None:
        if self.reach <= 0.0 or self.aperture <= 0.0:
            raise InvalidArgumentError("reach and aperture must be positive")


@dataclass(frozen=True)
class TaskConfig:
    thre_door: float = 0.7853981634   # 45 degrees
    horizon: int = 40
    stage2_budget: int = 10
    terminate_on_collision: bool = True

    def validate(self, theta_d_max: float | None = None) -> None:
        if self.thre_door <= 0.0:
            raise InvalidArgumentError("thre_door must be positive")
        if theta_d_max is not None and self.thre_door >= theta_d_max:
            raise ConfigurationError("door joint limit does not exceed thre_door; task unachievable")


@dataclass(frozen=True)
class Action:
    """Target end-effector pose plus gripper command."""

    p: np.ndarray
    r: np.ndarray
    gripper: str = "close"   # "open" | "close"

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64).reshape(3))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=np.float64).reshape(3, 3))

    def validate(self) -> None:
        if not np.all(np.isfinite(self.p)):
            raise InvalidArgumentError("action position must be finite")
        if not is_rotation(self.r, tol=1e-6):
            raise InvalidArgumentError("action rotation must be orthonormal with det 1")
        if self.gripper not in ("open", "close"):
            raise InvalidArgumentError(f"unknown gripper command {self.gripper!r}")

    @property
    def pose(self) -> Pose:
        return Pose(self.r, self.p)

    def to_dict(self) -> dict:
        return {"p": [float(x) for x in self.p],
                "rotmat": [float(x) for x in self.r.reshape(-1)],
                "gripper": self.gripper}

    @staticmethod
    def from_dict(d: dict) -> "Action":
        return Action(np.array(d["p"]), np.array(d["rotmat"]).reshape(3, 3), d["gripper"])


@dataclass
class SimState:
    """Full privileged simulator state; exclusively owned by one episode."""

    theta_d: float = 0.0
    theta_h: float = 0.0
    unlocked: bool = False
    attached: Pose | None = None     # grasp frame, fixed in the handle link
    ee_pose: Pose = field(default_factory=Pose.identity)
    prev_ee_pose: Pose = field(default_factory=Pose.identity)
    base_xy_yaw: np.ndarray = field(default_factory=lambda: np.zeros(3))
    step_index: int = 0
    success: bool = False
    collided: bool = False
    max_theta_d: float = 0.0
    shoulder_z: float = 1.0    # torso lift set at reset to suit the handle height

    def copy(self) -> "SimState":
        return SimState(
            theta_d=self.theta_d, theta_h=self.theta_h, unlocked=self.unlocked,
            attached=self.attached, ee_pose=self.ee_pose, prev_ee_pose=self.prev_ee_pose,
            base_xy_yaw=self.base_xy_yaw.copy(), step_index=self.step_index,
            success=self.success, collided=self.collided, max_theta_d=self.max_theta_d,
            shoulder_z=self.shoulder_z)


@dataclass(frozen=True)
class StepResult:
    state: SimState
    events: frozenset[str]
    d_theta_h: float
    d_theta_d: float


def latch_force_door(theta_d: float, theta_h: float, latch: LatchModel) -> float:
    """Blocking/spring force on the door joint (N)."""
    if theta_d < 0.0 or theta_h < 0.0:
        raise InvalidArgumentError("joint angles must be non-negative")
    if theta_h <= latch.thre:
        return latch.f_f
    return latch.k1 * theta_d


def latch_force_handle(theta_h: float, latch: LatchModel) -> float:
    """Handle return-spring force (N)."""
    if theta_h < 0.0:
        raise InvalidArgumentError("joint angle must be non-negative")
    return latch.k2 * theta_h


def door_open_success(theta_d: float, task: TaskConfig) -> bool:
    """Strictly-greater-than success test against the door threshold."""
    return theta_d > task.thre_door


def shoulder_point(state: SimState, robot: RobotModel) -> np.ndarray:
    return np.array([state.base_xy_yaw[0], state.base_xy_yaw[1], state.shoulder_z])


def gripper_prims(state: SimState, robot: RobotModel) -> list[Primitive]:
    """Palm box plus finger box along the tool approach axis, for rendering/collision."""
    approach = state.ee_pose.rot[:, 2]
    palm = Box(Pose(state.ee_pose.rot, state.ee_pose.pos - 0.04 * approach),
               np.array([0.10, 0.08, 0.06]))
    fingers = Box(Pose(state.ee_pose.rot, state.ee_pose.pos + (robot.finger_length / 2.0 - 0.01) * approach),
                  np.array([robot.aperture + 0.03, 0.02, robot.finger_length]))
    return [palm, fingers]


def arm_prims(state: SimState, robot: RobotModel) -> list[Primitive]:
    """Base box plus arm proxy rendered as a thin cylinder from shoulder to wrist."""
    base = Box(Pose(np.eye(3), np.array([state.base_xy_yaw[0], state.base_xy_yaw[1], 0.25])),
               np.array([0.30, 0.30, 0.50]))
    a = shoulder_point(state, robot)
    b = state.ee_pose.pos
    v = b - a
    length = float(np.linalg.norm(v))
    if length < 1e-6:
        return [base]
    z = v / length
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = unit(np.cross(ref, z))
    y = np.cross(z, x)
    pose = Pose(np.column_stack([x, y, z]), (a + b) / 2.0)
    return [base, Cylinder(pose, robot.arm_radius, length)]


def robot_prims(state: SimState, robot: RobotModel) -> list[Primitive]:
    return [*arm_prims(state, robot), *gripper_prims(state, robot)]


def reset(instance: DoorInstance, robot: RobotModel, task: TaskConfig, seed: int) -> SimState:
    """Fresh closed-door state with the base jittered around its home pose."""
    robot.validate()
    task.validate(theta_d_max=instance.body.theta_d_max)
    rng = np.random.default_rng([int(seed), 7])
    jitter = (rng.random(2) - 0.5) * 0.2   # +-0.1 m
    center = instance.door_center
    base_xy = np.array([center[0] + jitter[0], robot.base_standoff + jitter[1]])
    yaw = -math.pi / 2.0   # facing the door at -y
    anchor_z = float(instance.grasp_anchor_world(0.0, 0.0)[2])
    shoulder_z = float(np.clip(anchor_z + 0.30, 0.5, robot.shoulder_height))
    state = SimState(base_xy_yaw=np.array([base_xy[0], base_xy[1], yaw]),
                     shoulder_z=shoulder_z)
    # ee home: shoulder height, partway toward the door, tool z looking at the door
    ee_pos = np.array([base_xy[0], base_xy[1] - 0.35, shoulder_z])
    z_tool = np.array([0.0, -1.0, 0.0])
    y_tool = np.array([0.0, 0.0, 1.0])
    x_tool = np.cross(y_tool, z_tool)
    ee = Pose(np.column_stack([x_tool, y_tool, z_tool]), ee_pos)
    state.ee_pose = ee
    state.prev_ee_pose = ee
    return state


def _grasp_frame_world(instance: DoorInstance, theta_d: float, theta_h: float, grasp_local: Pose) -> Pose:
    return instance.fk_handle(theta_d, theta_h).compose(grasp_local)


def _pose_error(current: Pose, target: Pose) -> np.ndarray:
    dp = target.pos - current.pos
    dw = rotation_to_rotvec(target.rot @ current.rot.T)
    return np.concatenate([dp, dw])


def _two_joint_jacobian(instance: DoorInstance, theta_d: float, grasp_pos: np.ndarray) -> np.ndarray:
    a_d, o_d = instance.door_axis_world()
    a_h, o_h = instance.handle_axis_world(theta_d)
    col_d = np.concatenate([np.cross(a_d, grasp_pos - o_d), a_d])
    col_h = np.concatenate([np.cross(a_h, grasp_pos - o_h), a_h])
    return np.column_stack([col_d, col_h])


def _solve_joint_step(instance: DoorInstance, state: SimState, cmd: Pose) -> np.ndarray:
    """Damped Gauss-Newton for (theta_d, theta_h) matching the commanded grasp frame."""
    th = np.array([state.theta_d, state.theta_h])
    for _ in range(GN_ITERS):
        g = _grasp_frame_world(instance, th[0], th[1], state.attached)
        e = _pose_error(g, cmd)
        jac = _two_joint_jacobian(instance, th[0], grasp_pos=g.pos)
        jtj = jac.T @ jac + GN_DAMPING * np.eye(2)
        th = th + np.linalg.solve(jtj, jac.T @ e)
    return th - np.array([state.theta_d, state.theta_h])


def _clip_attached_command(ee: Pose, action: Action, robot: RobotModel) -> Pose:
    dp = action.p - ee.pos
    dist = float(np.linalg.norm(dp))
    if dist > robot.max_step_translation:
        dp = dp * (robot.max_step_translation / dist)
    dw = rotation_to_rotvec(action.r @ ee.rot.T)
    ang = float(np.linalg.norm(dw))
    rot = action.r
    if ang > robot.max_step_rotation:
        rot = rot_axis_angle(dw / ang, robot.max_step_rotation) @ ee.rot
    return Pose(rot, ee.pos + dp)


def _follow_base(state: SimState, robot: RobotModel, target: np.ndarray, max_step: float | None) -> None:
    """Translate the base (x, y) so the target stays within follow range; yaw faces the target."""
    if not robot.mobile:
        return
    limit = robot.follow_fraction * robot.reach
    sp = shoulder_point(state, robot)
    gap = np.linalg.norm(target - sp)
    if gap > limit:
        move_xy = (target - sp)[:2]
        need = gap - limit
        move_dir = move_xy / max(np.linalg.norm(move_xy), 1e-9)
        step = need if max_step is None else min(need, max_step)
        state.base_xy_yaw[:2] = state.base_xy_yaw[:2] + move_dir * step
    look = target[:2] - state.base_xy_yaw[:2]
    if np.linalg.norm(look) > 1e-9:
        state.base_xy_yaw[2] = math.atan2(look[1], look[0])


def _handle_surface_query(instance: DoorInstance, state: SimState, point: np.ndarray) -> tuple[float, float]:
    """(distance to nearest handle primitive, graspable thickness of that primitive)."""
    best = (np.inf, np.inf)
    for prim in instance.handle_prims(state.theta_d, state.theta_h):
        d = point_primitive_outside_distance(point, prim)
        if d < best[0]:
            if isinstance(prim, Box):
                thick = float(np.min(prim.dims))
            else:
                thick = float(min(2.0 * prim.radius, prim.length))
            best = (d, thick)
    return best


def _segment_hit(p0: np.ndarray, p1: np.ndarray, box: Box, inflate: float) -> np.ndarray | None:
    grown = Box(box.pose, box.dims + 2.0 * inflate)
    d = p1 - p0
    t = float(ray_box(p0, d[None, :], grown)[0])
    if t <= 1.0:
        return p0 + t * d
    return None


def _check_collision(instance: DoorInstance, state: SimState, robot: RobotModel) -> bool:
    """Arm proxy segment + finger segment against board OBB and wall strips.

    Hits near the end-effector are legitimate contact (not collision) while
    the gripper is engaged with the handle; engagement persists through a
    detach as long as the ee is still at the handle, so losing grip does not
    spuriously terminate the episode.
    """
    handle_dist, _ = _handle_surface_query(instance, state, state.ee_pose.pos)
    engaged = state.attached is not None or handle_dist < 0.06
    exclude = state.ee_pose.pos if engaged else None
    segs = []
    sp = shoulder_point(state, robot)
    segs.append((sp, state.ee_pose.pos))
    approach = state.ee_pose.rot[:, 2]
    segs.append((state.ee_pose.pos, state.ee_pose.pos + robot.finger_length * approach))
    obstacles = [instance.board_box(state.theta_d), *instance.body.frame_prims]
    for p0, p1 in segs:
        for box in obstacles:
            hit = _segment_hit(p0, p1, box, inflate=robot.arm_radius)
            if hit is None:
                continue
            if exclude is not None and np.linalg.norm(hit - exclude) < CONTACT_EXCLUDE_RADIUS:
                continue
            return True
    return False


def step(state: SimState, action: Action, instance: DoorInstance,
         robot: RobotModel, task: TaskConfig) -> StepResult:
    """Advance one quasi-static step; returns realized joint residuals and events."""
    if state.step_index >= task.horizon:
        raise EpisodeExhaustedError(f"episode horizon {task.horizon} exhausted")
    action.validate()
    events: set[str] = set()
    th_d0, th_h0 = state.theta_d, state.theta_h
    ee_before = state.ee_pose

    if state.attached is not None and action.gripper == "open":
        state.attached = None
        events.add("detached")

    if state.attached is None:
        # free-space motion settles within one quasi-static action
        target = np.asarray(action.p, dtype=np.float64)
        _follow_base(state, robot, target, max_step=None)
        sp = shoulder_point(state, robot)
        offset = target - sp
        gap = float(np.linalg.norm(offset))
        if gap > robot.reach:
            target = sp + offset * (robot.reach / gap)
            events.add("reach_clipped")
        state.ee_pose = Pose(action.r, target)
        if action.gripper == "close" and "detached" not in events:
            dist, thickness = _handle_surface_query(instance, state, state.ee_pose.pos)
            if dist < ATTACH_DIST and thickness < robot.aperture:
                fk = instance.fk_handle(state.theta_d, state.theta_h)
                state.attached = fk.inverse().compose(state.ee_pose)
                events.add("grasped")
    else:
        cmd = _clip_attached_command(state.ee_pose, action, robot)
        delta = _solve_joint_step(instance, state, cmd)
        if not state.unlocked:
            delta[0] = min(delta[0], 0.0)   # the latch blocks opening outright
        th = np.array([
            float(np.clip(th_d0 + delta[0], 0.0, instance.body.theta_d_max)),
            float(np.clip(th_h0 + delta[1], 0.0, instance.handle.theta_h_max)),
        ])

        # enforce arm reach: scale the joint step back until the grasp frame is reachable
        def reachable(theta: np.ndarray) -> bool:
            g = _grasp_frame_world(instance, theta[0], theta[1], state.attached)
            probe = state.copy()
            _follow_base(probe, robot, g.pos, max_step=robot.base_max_step)
            return bool(np.linalg.norm(g.pos - shoulder_point(probe, robot)) <= robot.reach)

        if not reachable(th):
            events.add("reach_clipped")
            lo, hi = 0.0, 1.0
            base = np.array([th_d0, th_h0])
            for _ in range(12):
                mid = (lo + hi) / 2.0
                if reachable(base + mid * (th - base)):
                    lo = mid
                else:
                    hi = mid
            th = base + lo * (th - base)

        g_new = _grasp_frame_world(instance, float(th[0]), float(th[1]), state.attached)
        res_p, res_r = g_new.error_to(cmd)
        if res_p > DETACH_POS or res_r > DETACH_ROT:
            # grip strain exceeds the limit partway along the motion: the joints
            # only reach the slip point, then the grasp lets go
            frac = min(DETACH_POS / max(res_p, 1e-12),
                       DETACH_ROT / max(res_r, 1e-12), 1.0)
            th = np.array([th_d0, th_h0]) + frac * (th - np.array([th_d0, th_h0]))
            g_new = _grasp_frame_world(instance, float(th[0]), float(th[1]), state.attached)
            state.attached = None
            events.add("detached")
        state.theta_d, state.theta_h = float(th[0]), float(th[1])
        _follow_base(state, robot, g_new.pos, max_step=robot.base_max_step)
        state.ee_pose = g_new

    # spring relaxation once nothing holds the joints
    if state.attached is None:
        state.theta_h *= (1.0 - SPRING_RELAX_H)
        if state.unlocked and state.theta_d < RELOCK_MARGIN:
            state.theta_d *= (1.0 - SPRING_RELAX_D)

    # latch bookkeeping
    if not state.unlocked and state.theta_h >= instance.latch.thre - UNLOCK_EPS:
        state.unlocked = True
        events.add("unlocked")
    elif state.unlocked and state.theta_h < instance.latch.thre and state.theta_d < RELOCK_MARGIN:
        state.unlocked = False

    if _check_collision(instance, state, robot):
        state.collided = True
        events.add("collided")

    if door_open_success(state.theta_d, task):
        if not state.success:
            events.add("success")
        state.success = True

    state.max_theta_d = max(state.max_theta_d, state.theta_d)
    state.prev_ee_pose = ee_before
    state.step_index += 1
    return StepResult(state=state, events=frozenset(events),
                      d_theta_h=state.theta_h - th_h0, d_theta_d=state.theta_d - th_d0)


def is_success(state: SimState, task: TaskConfig) -> bool:
    """True iff the door angle strictly exceeded the threshold at some step."""
    return bool(state.success)
