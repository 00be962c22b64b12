"""Stage policies and the closed-loop universal door-opening controller.

Stage 1 picks a grasp: a per-point affordance map selects the contact point,
an orientation sampler proposes candidate approaches in the plane orthogonal
to the handle axis, and a discriminator ranks them. Stages 2 and 3 each pair
a cVAE action generator with a residual-angle discriminator; the controller
runs them closed loop, re-observing before every action.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .assets import DoorInstance
from .errors import GenerationFailureError, InvalidArgumentError, ShapeError
from .expert import expert_door_action, expert_grasp_action, expert_handle_action
from .errors import InvalidStateError, ReachabilityError
from .geometry import unit
from .nets import CVAE, MLP, Module, PointEncoder, Tensor
from .nets import autodiff as ad
from .nets.rotations import matrix_to_rot6d, rot6d_to_matrix
from .percept import CLOUD_SIZE, CameraConfig, Observation, STATE_DIM, observe
from .sim import Action, RobotModel, SimState, TaskConfig, is_success, reset, step


@dataclass(frozen=True)
class NetworkConfig:
    """Frozen network/config constants shared by training and inference."""

    n_points: int = CLOUD_SIZE
    state_dim: int = STATE_DIM
    feature_dim: int = 128
    latent_dim: int = 32
    hidden: int = 128
    k_grasp: int = 100
    k_stage: int = 32
    n_encode: int = 1024      # leading FPS-ordered points used for the global feature

    @property
    def cond_dim(self) -> int:
        return self.feature_dim + self.state_dim

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class AblationFlags:
    no_disentangle: bool = False
    no_state: bool = False
    no_mobile: bool = False
    privileged_axis: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


class GraspPolicy(Module):
    """Affordance predictor, orientation sampler support and grasp discriminator."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.encoder = PointEncoder(rng, n_points=cfg.n_points)
        self.point_mlp = MLP([3, cfg.hidden, cfg.feature_dim], rng)
        self.score_head = MLP([2 * cfg.feature_dim, cfg.hidden, 1], rng)
        self.act_mlp = MLP([9, cfg.hidden, cfg.feature_dim], rng)
        self.d_head = MLP([2 * cfg.feature_dim, cfg.hidden, 1], rng)

    def affordance_tensors(self, cloud: np.ndarray) -> Tensor:
        """All 4096 points scored, each serving as its own contact query."""
        arr = np.asarray(cloud, dtype=np.float32)
        if arr.shape != (self.cfg.n_points, 3):
            raise ShapeError(f"expected ({self.cfg.n_points}, 3) cloud, got {arr.shape}")
        per_point, _ = self.encoder(Tensor(arr))
        emb = self.point_mlp(Tensor(arr))
        joint = ad.concat([per_point, emb], axis=1)
        return ad.sigmoid(ad.reshape(self.score_head(joint), (self.cfg.n_points,)))

    def affordance_at_t(self, cloud: np.ndarray, indices: np.ndarray) -> Tensor:
        """Affordance scores at selected contact indices (head applied only there)."""
        arr = np.asarray(cloud, dtype=np.float32)
        pre = self.encoder.prepool(Tensor(arr))
        gfeat = ad.tmax(pre, axis=0)
        chosen = pre[indices]
        k = len(indices)
        tiled = Tensor(np.broadcast_to(gfeat.data, (k, gfeat.data.shape[-1])).copy(), (gfeat,))

        def backward(g):
            gfeat.grad += g.sum(axis=0)

        tiled._backward = backward
        per_point = ad.relu(self.encoder.head(ad.concat([chosen, tiled], axis=1)))
        emb = self.point_mlp(Tensor(arr[indices]))
        return ad.sigmoid(ad.reshape(self.score_head(ad.concat([per_point, emb], axis=1)), (k,)))

    def global_feature_t(self, cloud: np.ndarray) -> Tensor:
        """Condition feature for the discriminator (leading FPS-ordered points)."""
        sub = np.asarray(cloud, dtype=np.float32)[: self.cfg.n_encode]
        return self.encoder.global_feature(Tensor(sub))

    def d_scores_t(self, global_feat: Tensor, actions9: np.ndarray) -> Tensor:
        acts = Tensor(np.asarray(actions9, dtype=np.float32))
        emb = self.act_mlp(acts)
        k = emb.data.shape[0]
        tiled = Tensor(np.broadcast_to(global_feat.data, (k, global_feat.data.shape[-1])).copy(),
                       (global_feat,))

        def backward(g):
            global_feat.grad += g.sum(axis=0)

        tiled._backward = backward
        return ad.sigmoid(ad.reshape(self.d_head(ad.concat([tiled, emb], axis=1)), (k,)))

    def d_scores(self, cloud: np.ndarray, actions9: np.ndarray) -> np.ndarray:
        return self.d_scores_t(self.global_feature_t(cloud), actions9).data.copy()


POS_DELTA_SCALE = 0.05   # meters per unit of the position channel in stage actions
ROT_DELTA_AMPLIFY = 6.0  # gain on rot6d deviations from identity in the representation
_ID6 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


class StagePolicy(Module):
    """cVAE action generator plus residual-angle discriminator for one stage.

    Actions are represented relative to a per-sample reference pose: position
    deltas in units of POS_DELTA_SCALE, and relative rotations whose rot6d
    deviation from identity is amplified by ROT_DELTA_AMPLIFY. Quasi-static
    per-step twists are small (0.1-0.15 rad), so without the gain their loss
    contribution vanishes next to the other terms; the amplification is
    exactly invertible (scaled deviation in, scaled deviation out).
    """

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, no_state: bool = False):
        self.cfg = cfg
        self.no_state = no_state
        self.encoder = PointEncoder(rng, n_points=cfg.n_points)
        self.cvae = CVAE(cfg.cond_dim, rng, latent_dim=cfg.latent_dim, hidden=cfg.hidden)
        self.d_act_mlp = MLP([9, cfg.hidden, cfg.feature_dim], rng)
        self.d_head = MLP([cfg.cond_dim + cfg.feature_dim, cfg.hidden, 1], rng)

    def condition_t(self, cloud: np.ndarray, state_vec: np.ndarray) -> Tensor:
        """Global cloud feature (from the leading FPS-ordered points) ++ robot state.

        Encoder coordinates are centered on the action reference point (the
        ee; cloud centroid under no_state), so nearby mechanism geometry
        dominates the pooled feature.
        """
        sub = np.asarray(cloud, dtype=np.float32)[: self.cfg.n_encode]
        base_pos, _ = self.action_base(cloud, state_vec)
        feat = self.encoder.global_feature(Tensor(sub - base_pos.astype(np.float32)))
        s = np.zeros(self.cfg.state_dim, dtype=np.float32) if self.no_state \
            else np.asarray(state_vec, dtype=np.float32)
        return ad.concat([feat, Tensor(s)], axis=0)

    def action_base(self, clouds: np.ndarray, state_vecs: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
        """(positions, rotations) the decoded action deltas are measured from.

        With robot state available: the current ee pose. The no_state variant
        falls back to the cloud centroid and the identity rotation, which is
        deliberately weaker.
        """
        clouds = np.asarray(clouds, dtype=np.float32)
        state_vecs = np.asarray(state_vecs, dtype=np.float32)
        batched = clouds.ndim == 3
        if self.no_state:
            sub = clouds[:, : self.cfg.n_encode] if batched else clouds[: self.cfg.n_encode]
            pos = sub.mean(axis=-2)
            rots = np.broadcast_to(np.eye(3, dtype=np.float64),
                                   pos.shape[:-1] + (3, 3)).copy()
            return pos, rots
        pos = state_vecs[..., 3:6]
        six = state_vecs[..., 6:12]
        if batched:
            rots = np.stack([rot6d_to_matrix(v) for v in six])
        else:
            rots = rot6d_to_matrix(six)
        return pos, rots

    def to_delta(self, actions9: np.ndarray, base_pos: np.ndarray,
                 base_rot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Absolute 9D actions -> (delta 9D, amplified-relative rotation targets).

        The returned matrices match the amplified rot6d channel and are the
        ground truth for the rotation-matrix loss.
        """
        arr = np.asarray(actions9, dtype=np.float64)
        batched = arr.ndim == 2
        out = arr.astype(np.float32).copy()
        out[..., :3] = (arr[..., :3] - base_pos) / POS_DELTA_SCALE
        if batched:
            rel6 = np.stack([matrix_to_rot6d(rot6d_to_matrix(v) @ b.T)
                             for v, b in zip(arr[..., 3:9], base_rot)])
        else:
            rel6 = matrix_to_rot6d(rot6d_to_matrix(arr[3:9]) @ base_rot.T)
        amp6 = _ID6 + (rel6 - _ID6) * ROT_DELTA_AMPLIFY
        out[..., 3:9] = amp6
        if batched:
            amp_mats = np.stack([rot6d_to_matrix(v) for v in amp6])
        else:
            amp_mats = rot6d_to_matrix(amp6)
        return out, amp_mats.astype(np.float32)

    def from_delta(self, action9: np.ndarray, base_pos: np.ndarray,
                   base_rot: np.ndarray) -> np.ndarray:
        """Decoded delta -> absolute 9D action (may raise on degenerate rot6d)."""
        out = np.asarray(action9, dtype=np.float64).copy()
        out[:3] = out[:3] * POS_DELTA_SCALE + base_pos
        rel6 = _ID6 + (out[3:9] - _ID6) / ROT_DELTA_AMPLIFY
        out[3:9] = matrix_to_rot6d(rot6d_to_matrix(rel6) @ base_rot)
        return out

    def condition_batch_t(self, clouds: np.ndarray, state_vecs: np.ndarray) -> Tensor:
        """(B, N, 3) clouds + (B, 16) states -> (B, cond_dim) conditions."""
        sub = np.asarray(clouds, dtype=np.float32)[:, : self.cfg.n_encode]
        base_pos, _ = self.action_base(clouds, state_vecs)
        feat = self.encoder.global_feature(
            Tensor(sub - base_pos.astype(np.float32)[:, None, :]), axis=1)
        s = np.asarray(state_vecs, dtype=np.float32)
        if self.no_state:
            s = np.zeros_like(s)
        return ad.concat([feat, Tensor(s)], axis=1)

    def d_scores_t(self, cond: Tensor, actions9: np.ndarray) -> Tensor:
        acts = Tensor(np.asarray(actions9, dtype=np.float32))
        emb = self.d_act_mlp(acts)
        if cond.data.ndim == 1:
            k = emb.data.shape[0]
            tiled = Tensor(np.broadcast_to(cond.data, (k, cond.data.shape[-1])).copy(), (cond,))

            def backward(g):
                cond.grad += g.sum(axis=0)

            tiled._backward = backward
            cond = tiled
        return ad.reshape(self.d_head(ad.concat([cond, emb], axis=1)), (emb.data.shape[0],))


def actions_to_array(actions: list[Action]) -> np.ndarray:
    """Pack actions into the 9D [position ++ rot6d] network representation."""
    return np.stack([np.concatenate([a.p, matrix_to_rot6d(a.r)]) for a in actions]).astype(np.float32)


def array_to_action(vec9: np.ndarray, gripper: str = "close") -> Action:
    return Action(vec9[:3], rot6d_to_matrix(vec9[3:9]), gripper)


def affordance_map(cloud: np.ndarray, grasp_policy: GraspPolicy) -> np.ndarray:
    """Per-point affordance scores over a 4096-point observation."""
    return grasp_policy.affordance_tensors(cloud).data.copy()


def sample_grasp_candidates(point: np.ndarray, handle_axis: np.ndarray, k: int,
                            seed: int) -> list[Action]:
    """k grasp poses at `point`: approach dirs uniform on the circle orthogonal
    to the handle axis, fingers straddling the axis, gripper closing."""
    axis = np.asarray(handle_axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm < 1e-9:
        raise InvalidArgumentError("handle axis must be non-zero")
    axis = axis / norm
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = unit(np.cross(axis, ref))
    v = np.cross(axis, u)
    rng = np.random.default_rng([int(seed), 31])
    out = []
    for _ in range(k):
        phi = rng.random() * 2.0 * np.pi
        approach = np.cos(phi) * u + np.sin(phi) * v
        y = axis
        x = np.cross(y, approach)
        out.append(Action(np.asarray(point, dtype=np.float64),
                          np.column_stack([x, y, approach]), "close"))
    return out


def select_grasp(obs: Observation, grasp_policy: GraspPolicy, handle_axis: np.ndarray,
                 seed: int, k: int | None = None) -> tuple[Action, int, np.ndarray]:
    """Affordance argmax -> candidate sampling -> discriminator argmax.

    Returns (action, contact point index, affordance scores). Ties break to
    the lowest index via numpy argmax semantics.
    """
    scores = affordance_map(obs.cloud, grasp_policy)
    idx = int(scores.argmax())
    point = obs.cloud[idx].astype(np.float64)
    cands = sample_grasp_candidates(point, handle_axis, k or grasp_policy.cfg.k_grasp, seed)
    d = grasp_policy.d_scores(obs.cloud, actions_to_array(cands))
    best = int(d.argmax())
    return cands[best], idx, scores


def estimate_handle_axis(cloud: np.ndarray, point: np.ndarray, k: int = 200) -> np.ndarray:
    """Principal direction of the k points nearest the grasp point."""
    pts = np.asarray(cloud, dtype=np.float64)
    d = ((pts - point) ** 2).sum(axis=1)
    near = pts[np.argsort(d)[:k]]
    centered = near - near.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return vt[0]


def propose_stage_action(policy: StagePolicy, obs: Observation, seed: int,
                         k: int | None = None) -> Action:
    """Decode k latents conditioned on (cloud feature, robot state), keep the
    discriminator argmax; degenerate rotations are discarded.

    Decoded positions are deltas from the policy's reference point; the
    returned Action is absolute.
    """
    k = k or policy.cfg.k_stage
    cond = policy.condition_t(obs.cloud, obs.state)
    rng = np.random.default_rng([int(seed), 37])
    raw = policy.cvae.sample_actions(cond.data, k, rng)
    base_pos, base_rot = policy.action_base(obs.cloud, obs.state)
    valid_idx = []
    actions = []
    for i, vec in enumerate(raw):
        try:
            actions.append(array_to_action(policy.from_delta(vec, base_pos, base_rot)))
            valid_idx.append(i)
        except Exception:
            continue
    if not actions:
        raise GenerationFailureError("all generated actions had degenerate rotations")
    scores = policy.d_scores_t(cond, raw[valid_idx]).data
    return actions[int(scores.argmax())]


@dataclass
class UniversalPolicy:
    """The three stage policies plus transition config and ablation switches."""

    grasp: GraspPolicy
    handle: StagePolicy
    door: StagePolicy               # the merged policy when no_disentangle
    cfg: NetworkConfig = field(default_factory=NetworkConfig)
    flags: AblationFlags = field(default_factory=AblationFlags)
    needs_observation: bool = True

    def grasp_action(self, obs: Observation, instance: DoorInstance,
                     state: SimState, seed: int) -> Action:
        if self.flags.privileged_axis:
            axis = instance.anchor_tangent_world(state.theta_d, state.theta_h)
            action, _, _ = select_grasp(obs, self.grasp, axis, seed)
        else:
            scores = affordance_map(obs.cloud, self.grasp)
            idx = int(scores.argmax())
            axis = estimate_handle_axis(obs.cloud, obs.cloud[idx].astype(np.float64))
            cands = sample_grasp_candidates(obs.cloud[idx].astype(np.float64), axis,
                                            self.cfg.k_grasp, seed)
            d = self.grasp.d_scores(obs.cloud, actions_to_array(cands))
            action = cands[int(d.argmax())]
        return action

    def stage_action(self, stage: str, obs: Observation, instance: DoorInstance,
                     state: SimState, seed: int) -> Action:
        policy = self.handle if (stage == "handle" and not self.flags.no_disentangle) \
            else self.door
        return propose_stage_action(policy, obs, seed)


class ExpertWiredPolicy:
    """Universal-policy interface backed by the privileged expert rules."""

    needs_observation = False

    def __init__(self, robot: RobotModel | None = None):
        self.robot = robot
        self.flags = AblationFlags()

    def grasp_action(self, obs, instance, state, seed) -> Action:
        return expert_grasp_action(instance, state, self.robot)

    def stage_action(self, stage, obs, instance, state, seed) -> Action:
        try:
            if stage == "handle" and not state.unlocked:
                return expert_handle_action(instance, state)
            return expert_door_action(instance, state)
        except InvalidStateError:
            return Action(state.ee_pose.pos, state.ee_pose.rot,
                          "close" if state.attached is not None else "open")


class RandomPolicy:
    """Uniform-random pose commands; the evaluation floor baseline."""

    needs_observation = False

    def __init__(self, seed: int = 0):
        self.flags = AblationFlags()
        self._base_seed = seed

    def _rng(self, seed: int) -> np.random.Generator:
        return np.random.default_rng([self._base_seed, int(seed), 41])

    def _random_rot(self, rng) -> np.ndarray:
        v = rng.standard_normal(6)
        return rot6d_to_matrix(v)

    def grasp_action(self, obs, instance, state, seed) -> Action:
        rng = self._rng(seed)
        lo = np.array([-instance.body.width, -0.2, 0.0])
        hi = np.array([instance.body.width, 1.2, instance.body.height + 0.2])
        return Action(lo + rng.random(3) * (hi - lo), self._random_rot(rng), "close")

    def stage_action(self, stage, obs, instance, state, seed) -> Action:
        rng = self._rng(seed + 1000)
        return Action(state.ee_pose.pos + (rng.random(3) - 0.5) * 0.2,
                      self._random_rot(rng) @ state.ee_pose.rot, "close")


@dataclass
class EpisodeResult:
    instance_id: str
    seed: int
    success: bool
    final_theta_d: float
    max_theta_d: float
    steps: int
    events: list
    actions: list      # executed Action dicts, for replay
    stage_tags: list

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id, "seed": self.seed, "success": self.success,
            "final_theta_d": self.final_theta_d, "max_theta_d": self.max_theta_d,
            "steps": self.steps, "events": self.events, "actions": self.actions,
            "stage_tags": self.stage_tags,
        }


def run_episode(policy, instance: DoorInstance, robot: RobotModel, task: TaskConfig,
                seed: int, camera: CameraConfig | None = None) -> EpisodeResult:
    """Closed-loop episode: one observation per executed action, staged
    grasp -> handle (until unlock or budget) -> door (until success/horizon)."""
    camera = camera or CameraConfig()
    state = reset(instance, robot, task, seed)
    actions: list[dict] = []
    events: list[list[str]] = []
    stage_tags: list[str] = []

    def observe_now() -> Observation | None:
        if not getattr(policy, "needs_observation", True):
            return None
        return observe(instance, state, robot, camera, seed=seed * 5 + state.step_index)

    def execute(stage: str, action: Action) -> frozenset:
        result = step(state, action, instance, robot, task)
        actions.append(action.to_dict())
        events.append(sorted(result.events))
        stage_tags.append(stage)
        return result.events

    try:
        if task.horizon > 0:
            obs = observe_now()
            execute("grasp", policy.grasp_action(obs, instance, state, seed))

            merged = getattr(policy, "flags", AblationFlags()).no_disentangle
            k = 0
            while (not state.unlocked and state.step_index < task.horizon
                   and k < task.stage2_budget and not state.success):
                if task.terminate_on_collision and state.collided:
                    break
                obs = observe_now()
                stage = "merged" if merged else "handle"
                execute(stage, policy.stage_action("handle", obs, instance, state,
                                                   seed * 7 + state.step_index))
                k += 1
            while state.step_index < task.horizon and not state.success:
                if task.terminate_on_collision and state.collided:
                    break
                obs = observe_now()
                stage = "merged" if merged else "door"
                execute(stage, policy.stage_action("door", obs, instance, state,
                                                   seed * 7 + state.step_index))
    except (InvalidStateError, ReachabilityError, GenerationFailureError):
        pass   # recorded as a failed episode

    return EpisodeResult(
        instance_id=instance.id, seed=int(seed), success=is_success(state, task),
        final_theta_d=state.theta_d, max_theta_d=state.max_theta_d,
        steps=state.step_index, events=events, actions=actions, stage_tags=stage_tags)


def replay_actions(instance: DoorInstance, robot: RobotModel, task: TaskConfig,
                   seed: int, action_dicts: list[dict]) -> EpisodeResult:
    """Re-execute a logged action script; outcomes must replay exactly."""
    state = reset(instance, robot, task, seed)
    events = []
    for d in action_dicts:
        result = step(state, Action.from_dict(d), instance, robot, task)
        events.append(sorted(result.events))
    return EpisodeResult(
        instance_id=instance.id, seed=int(seed), success=is_success(state, task),
        final_theta_d=state.theta_d, max_theta_d=state.max_theta_d,
        steps=state.step_index, events=events, actions=action_dicts, stage_tags=[])
