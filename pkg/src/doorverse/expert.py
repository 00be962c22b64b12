"""Privileged rule-based stage controllers and episode recording.

The expert reads ground-truth joint axes from the instance: it grasps at the
annotated anchor, rotates the grasp frame about the handle joint axis until
the latch releases, then advances it along the door-opening arc. Recorded
episodes (optionally with per-step observations) are the raw material for
policy training.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .assets import DoorInstance
from .errors import InvalidStateError, ReachabilityError
from .geometry import pose_about_axis, rot_axis_angle, unit
from .percept import CameraConfig, Observation, observe
from .sim import Action, RobotModel, SimState, TaskConfig, reset, shoulder_point, step

DELTA_H = 0.15   # handle rotation per expert action, rad
DELTA_D = 0.10   # door advance per expert action, rad

STAGES = ("grasp", "handle", "door")


@dataclass(frozen=True)
class NoiseConfig:
    """Seeded Gaussian perturbation applied to a fraction of executed actions."""

    sigma_pos: float = 0.0
    sigma_rot: float = 0.0
    fraction: float = 0.0

    def validate(self) -> None:
        if min(self.sigma_pos, self.sigma_rot, self.fraction) < 0.0 or self.fraction > 1.0:
            raise ValueError("noise parameters out of range")

    def to_dict(self) -> dict:
        return {"sigma_pos": self.sigma_pos, "sigma_rot": self.sigma_rot,
                "fraction": self.fraction}

    @staticmethod
    def from_dict(d: dict) -> "NoiseConfig":
        return NoiseConfig(**d)


@dataclass
class TrajectoryStep:
    stage: str
    action: Action                     # executed (possibly perturbed)
    rule_action: Action                # pure controller output
    d_theta_h: float
    d_theta_d: float
    events: frozenset[str]
    observation: Observation | None = None
    state_vec: np.ndarray | None = None   # robot-state vector at decision time

    def to_dict(self, cloud_ref: str | None = None) -> dict:
        d = {
            "stage": self.stage,
            "action": self.action.to_dict(),
            "rule_action": self.rule_action.to_dict(),
            "d_theta_h": self.d_theta_h,
            "d_theta_d": self.d_theta_d,
            "events": sorted(self.events),
        }
        if self.state_vec is not None:
            d["state_vec"] = [float(x) for x in self.state_vec]
        if cloud_ref is not None:
            d["cloud"] = cloud_ref
        return d


@dataclass
class TrajectoryRecord:
    instance_id: str
    seed: int
    steps: list[TrajectoryStep] = field(default_factory=list)
    final_theta_d: float = 0.0
    max_theta_d: float = 0.0
    success: bool = False
    failure: str | None = None         # propagated error, episode kept as a failure

    def stage_steps(self, stage: str) -> list[TrajectoryStep]:
        return [s for s in self.steps if s.stage == stage]

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "seed": self.seed,
            "final_theta_d": self.final_theta_d,
            "max_theta_d": self.max_theta_d,
            "success": self.success,
            "failure": self.failure,
            "steps": [s.to_dict() for s in self.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _grasp_orientation(face_normal: np.ndarray, tangent: np.ndarray) -> np.ndarray:
    """Tool frame: z approaches along -face normal, y along the handle tangent."""
    z = unit(-face_normal)
    t = tangent - (tangent @ z) * z
    y = unit(t)
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


def expert_grasp_action(instance: DoorInstance, state: SimState,
                        robot: RobotModel | None = None) -> Action:
    """Close the gripper at the annotated anchor, approaching along the face normal."""
    if state.attached is not None:
        raise InvalidStateError("grasp action requires an unattached gripper")
    anchor = instance.grasp_anchor_world(state.theta_d, state.theta_h)
    if robot is not None and not robot.mobile:
        if np.linalg.norm(anchor - shoulder_point(state, robot)) > robot.reach:
            raise ReachabilityError("grasp anchor outside fixed-base reach")
    normal = instance.board_pose(state.theta_d).apply_dir(np.array([0.0, 1.0, 0.0]))
    tangent = instance.anchor_tangent_world(state.theta_d, state.theta_h)
    return Action(anchor, _grasp_orientation(normal, tangent), "close")


def expert_handle_action(instance: DoorInstance, state: SimState,
                         delta_h: float = DELTA_H) -> Action:
    """Rotate the grasp frame about the handle joint axis toward unlock."""
    if state.attached is None:
        raise InvalidStateError("handle action requires an attached gripper")
    if state.unlocked:
        raise InvalidStateError("handle action requires a latched door")
    axis, origin = instance.handle_axis_world(state.theta_d)
    spin = pose_about_axis(origin, axis, delta_h)
    target = spin.compose(state.ee_pose)
    return Action(target.pos, target.rot, "close")


def expert_door_action(instance: DoorInstance, state: SimState,
                       delta_d: float = DELTA_D) -> Action:
    """Advance the grasp frame along the door-opening arc about the hinge."""
    if state.attached is None:
        raise InvalidStateError("door action requires an attached gripper")
    if not state.unlocked:
        raise InvalidStateError("door action requires an unlocked latch")
    axis, origin = instance.door_axis_world()
    spin = pose_about_axis(origin, axis, delta_d)
    target = spin.compose(state.ee_pose)
    return Action(target.pos, target.rot, "close")


@dataclass
class StageControllers:
    """Per-stage action sources; each takes (instance, state, observation)."""

    grasp: object
    handle: object
    door: object


def expert_controllers(robot: RobotModel | None = None) -> StageControllers:
    return StageControllers(
        grasp=lambda inst, st, obs: expert_grasp_action(inst, st, robot),
        handle=lambda inst, st, obs: expert_handle_action(inst, st),
        door=lambda inst, st, obs: expert_door_action(inst, st),
    )


def perturb_action(action: Action, noise: NoiseConfig, rng: np.random.Generator) -> Action:
    """Seeded Gaussian pose perturbation; the gripper command is untouched."""
    if noise.fraction <= 0.0 or rng.random() >= noise.fraction:
        return action
    p = action.p + rng.standard_normal(3) * noise.sigma_pos
    r = action.r
    if noise.sigma_rot > 0.0:
        axis = rng.standard_normal(3)
        axis = axis / max(np.linalg.norm(axis), 1e-9)
        r = rot_axis_angle(axis, rng.standard_normal() * noise.sigma_rot) @ r
    return Action(p, r, action.gripper)


def collect_episode(instance: DoorInstance, controllers: StageControllers,
                    noise: NoiseConfig | dict[str, NoiseConfig], seed: int,
                    robot: RobotModel | None = None, task: TaskConfig | None = None,
                    camera: CameraConfig | None = None,
                    observe_filter=None) -> TrajectoryRecord:
    """Roll one episode: grasp (one decision), handle loop, door loop.

    Noise may be a single config or a per-stage dict. Observations are
    rendered only when a camera is given; `observe_filter(stage, k)` can
    restrict rendering to a subset of steps (labels are recorded for all).
    Simulator/controller errors mark the episode failed instead of raising.
    """
    robot = robot or RobotModel()
    task = task or TaskConfig()
    if isinstance(noise, NoiseConfig):
        noise = {s: noise for s in STAGES}
    for cfg in noise.values():
        cfg.validate()
    rng = np.random.default_rng([int(seed), 23])
    state = reset(instance, robot, task, seed)
    record = TrajectoryRecord(instance_id=instance.id, seed=int(seed))

    def snap(stage: str, k: int) -> Observation | None:
        if camera is None:
            return None
        if observe_filter is not None and not observe_filter(stage, k):
            return None
        return observe(instance, state, robot, camera, seed=seed * 5 + state.step_index)

    def run_one(stage: str, k: int) -> frozenset[str]:
        obs = snap(stage, k)
        controller = getattr(controllers, stage)
        rule = controller(instance, state, obs)
        executed = perturb_action(rule, noise.get(stage, NoiseConfig()), rng)
        result = step(state, executed, instance, robot, task)
        record.steps.append(TrajectoryStep(
            stage=stage, action=executed, rule_action=rule,
            d_theta_h=result.d_theta_h, d_theta_d=result.d_theta_d,
            events=result.events, observation=obs,
            state_vec=None if obs is None else obs.state))
        return result.events

    try:
        events = run_one("grasp", 0)
        if state.attached is not None:
            k = 0
            while (not state.unlocked and state.step_index < task.horizon
                   and k < task.stage2_budget and state.attached is not None):
                events = run_one("handle", k)
                k += 1
            k = 0
            while (not state.success and state.step_index < task.horizon
                   and state.attached is not None and state.unlocked):
                if task.terminate_on_collision and state.collided:
                    break
                events = run_one("door", k)
                k += 1
    except (InvalidStateError, ReachabilityError) as err:
        record.failure = f"{type(err).__name__}: {err}"

    record.final_theta_d = state.theta_d
    record.max_theta_d = state.max_theta_d
    record.success = state.success
    return record
