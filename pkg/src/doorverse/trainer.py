"""Reversed-order conditioned training pipeline.

The door-opening policy trains first on expert-driven rollouts; the handle
policy trains next on rollouts whose door segment is executed by the learned
door policy; the grasp affordance trains last, with sampled grasp actions
rolled out through both learned downstream policies and supervised by the
final door angle. Discriminator labels always come from executed simulator
steps, never from imputed values.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assets import AssetCatalog, DoorInstance
from .errors import DataError, ProvenanceError
from .expert import (NoiseConfig, StageControllers, TrajectoryRecord, collect_episode,
                     expert_door_action, expert_grasp_action, expert_handle_action)
from .geometry import points_scene_distance
from .nets import Adam, LossWeights, Tensor, l1_loss, load_checkpoint, save_checkpoint
from .nets.losses import cvae_loss_t
from .nets import autodiff as ad
from .percept import CameraConfig, observe
from .policies import (AblationFlags, GraspPolicy, NetworkConfig, StagePolicy,
                       UniversalPolicy, actions_to_array, propose_stage_action,
                       sample_grasp_candidates)
from .sim import RobotModel, TaskConfig, reset, step

ABLATIONS = ("full", "no_disentangle", "no_condition", "no_state", "no_mobile")
FIXED_BASE_STANDOFF = 0.6   # the frozen-base variant homes close enough to work


@dataclass(frozen=True)
class TrainConfig:
    episodes_door: int = 600
    episodes_handle: int = 600
    episodes_grasp: int = 800
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    noise_door: NoiseConfig = field(default_factory=lambda: NoiseConfig(0.008, 0.10, 0.5))
    noise_handle: NoiseConfig = field(default_factory=lambda: NoiseConfig(0.006, 0.12, 0.5))
    samples_per_episode: int = 3
    distill_clouds: int = 96
    distill_points: int = 64
    candidates_per_point: int = 50
    top_k: int = 10
    probe_size: int = 256
    probe_seed: int = 12345
    off_handle_fraction: float = 0.2
    ablation: str = "full"
    net: NetworkConfig = field(default_factory=NetworkConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    mobile: bool = True

    def validate(self) -> None:
        if min(self.episodes_door, self.episodes_handle, self.episodes_grasp,
               self.epochs, self.batch_size) <= 0:
            raise DataError("training budgets must be positive")
        if self.ablation not in ABLATIONS:
            raise DataError(f"unknown ablation {self.ablation!r}")

    @property
    def flags(self) -> AblationFlags:
        return AblationFlags(
            no_disentangle=self.ablation == "no_disentangle",
            no_state=self.ablation == "no_state",
            no_mobile=self.ablation == "no_mobile",
        )

    def robot(self) -> RobotModel:
        if self.ablation == "no_mobile" or not self.mobile:
            return RobotModel(mobile=False, base_standoff=FIXED_BASE_STANDOFF)
        return RobotModel()

    def config_hash(self) -> str:
        payload = {
            "net": self.net.config_hash(), "epochs": self.epochs, "batch": self.batch_size,
            "lr": self.lr, "weights": self.weights.to_dict(), "ablation": self.ablation,
            "episodes": [self.episodes_door, self.episodes_handle, self.episodes_grasp],
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "episodes_door": self.episodes_door, "episodes_handle": self.episodes_handle,
            "episodes_grasp": self.episodes_grasp, "epochs": self.epochs,
            "batch_size": self.batch_size, "lr": self.lr, "weights": self.weights.to_dict(),
            "seed": self.seed, "noise_door": self.noise_door.to_dict(),
            "noise_handle": self.noise_handle.to_dict(),
            "samples_per_episode": self.samples_per_episode,
            "distill_clouds": self.distill_clouds, "distill_points": self.distill_points,
            "candidates_per_point": self.candidates_per_point, "top_k": self.top_k,
            "probe_size": self.probe_size, "probe_seed": self.probe_seed,
            "off_handle_fraction": self.off_handle_fraction, "ablation": self.ablation,
            "mobile": self.mobile,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        kwargs = dict(d)
        if "weights" in kwargs:
            kwargs["weights"] = LossWeights.from_dict(kwargs["weights"])
        if "noise_door" in kwargs:
            kwargs["noise_door"] = NoiseConfig.from_dict(kwargs["noise_door"])
        if "noise_handle" in kwargs:
            kwargs["noise_handle"] = NoiseConfig.from_dict(kwargs["noise_handle"])
        return TrainConfig(**kwargs)


@dataclass
class StageDataset:
    """Rows for one stage: rendered observation, rule action, executed action, label."""

    clouds: np.ndarray        # (M, 4096, 3) f32
    states: np.ndarray        # (M, 16) f32
    rule_actions: np.ndarray  # (M, 9) f32
    rule_mats: np.ndarray     # (M, 3, 3) f32
    exec_actions: np.ndarray  # (M, 9) f32
    labels: np.ndarray        # (M,) f32 realized residual angle

    def __len__(self) -> int:
        return self.clouds.shape[0]


def _train_instance_cycle(catalog: AssetCatalog, seed: int, n: int) -> list[DoorInstance]:
    ids = sorted(catalog.split_ids("train"))
    if not ids:
        raise DataError("catalog has no train instances")
    rng = np.random.default_rng([seed, 53])
    order = [ids[i] for i in rng.permutation(len(ids))]
    return [catalog.instances[order[i % len(order)]] for i in range(n)]


def _sample_filter(stage: str, config: TrainConfig, ep_seed: int,
                   always_stages: tuple[str, ...] = ()) -> object:
    """Observe only `samples_per_episode` seeded step indices of `stage`
    (plus every step of stages a learned controller must see)."""
    rng = np.random.default_rng([ep_seed, 61])
    chosen = set(rng.choice(10, size=min(config.samples_per_episode, 10),
                            replace=False).tolist())

    def flt(s: str, k: int) -> bool:
        if s in always_stages:
            return True
        return s == stage and k in chosen

    return flt


def _rows_from_records(records: list[TrajectoryRecord], stage: str) -> StageDataset | None:
    clouds, states, rules, mats, execs, labels = [], [], [], [], [], []
    for rec in records:
        for st in rec.stage_steps(stage):
            if st.observation is None:
                continue
            clouds.append(st.observation.cloud)
            states.append(st.observation.state)
            rules.append(actions_to_array([st.rule_action])[0])
            mats.append(st.rule_action.r.astype(np.float32))
            execs.append(actions_to_array([st.action])[0])
            labels.append(st.d_theta_d if stage == "door" else st.d_theta_h)
    if not clouds:
        return None
    return StageDataset(
        clouds=np.stack(clouds), states=np.stack(states),
        rule_actions=np.stack(rules), rule_mats=np.stack(mats),
        exec_actions=np.stack(execs), labels=np.asarray(labels, dtype=np.float32))


def _merge_datasets(a: StageDataset, b: StageDataset) -> StageDataset:
    return StageDataset(*[np.concatenate([getattr(a, f), getattr(b, f)])
                          for f in ("clouds", "states", "rule_actions", "rule_mats",
                                    "exec_actions", "labels")])


def _policy_stage_controller(policy: StagePolicy, ep_seed: int):
    def controller(inst, state, obs):
        if obs is None:
            raise DataError("learned stage controller requires an observation")
        return propose_stage_action(policy, obs, seed=ep_seed * 7 + state.step_index)
    return controller


def collect_stage_records(catalog: AssetCatalog, config: TrainConfig, stage: str,
                          downstream_door: StagePolicy | None = None) -> list[TrajectoryRecord]:
    """Expert-driven rollouts, perturbing only the collected stage's actions."""
    robot = config.robot()
    n_eps = config.episodes_door if stage == "door" else config.episodes_handle
    instances = _train_instance_cycle(catalog, config.seed + (0 if stage == "door" else 1), n_eps)
    noise = {stage: config.noise_door if stage == "door" else config.noise_handle}
    records = []
    for ep, inst in enumerate(instances):
        ep_seed = config.seed * 100_000 + ep + (0 if stage == "door" else 50_000)
        if downstream_door is not None and stage == "handle":
            door_ctl = _policy_stage_controller(downstream_door, ep_seed)
            always = ("door",)
        else:
            door_ctl = lambda i, s, o: expert_door_action(i, s)
            always = ()
        controllers = StageControllers(
            grasp=lambda i, s, o: expert_grasp_action(i, s, robot),
            handle=lambda i, s, o: expert_handle_action(i, s),
            door=door_ctl,
        )
        rec = collect_episode(inst, controllers, noise, seed=ep_seed, robot=robot,
                              task=config.task, camera=config.camera,
                              observe_filter=_sample_filter(stage, config, ep_seed, always))
        records.append(rec)
    return records


def _probe_indices(n: int, probe_size: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 71])
    return rng.permutation(n)[: min(probe_size, n)]


def train_stage_policy(dataset: StageDataset, config: TrainConfig, stage: str
                       ) -> tuple[StagePolicy, list[dict]]:
    """Joint training of the stage cVAE (on rule actions) and discriminator
    (L1 to realized residual angles); the point encoder trunk is shared."""
    if dataset is None or len(dataset) < config.batch_size:
        raise DataError(f"not enough {stage} samples to train")
    rng = np.random.default_rng([config.seed, 83, hash(stage) % 1000])
    policy = StagePolicy(config.net, rng, no_state=config.flags.no_state)
    opt = Adam(policy.parameters(), lr=config.lr)
    m = len(dataset)
    probe = _probe_indices(m, config.probe_size, config.probe_seed)
    metrics: list[dict] = []
    # actions train in delta form: position offsets and relative rotations
    # measured from the policy's per-sample reference pose
    base_pos, base_rot = policy.action_base(dataset.clouds, dataset.states)
    rule_delta, rule_rel_mats = policy.to_delta(dataset.rule_actions, base_pos, base_rot)
    exec_delta, _ = policy.to_delta(dataset.exec_actions, base_pos, base_rot)

    def probe_loss() -> dict:
        prng = np.random.default_rng([config.probe_seed, 3])
        cond = policy.condition_batch_t(dataset.clouds[probe], dataset.states[probe])
        total, comps = cvae_loss_t(rule_delta[probe], rule_rel_mats[probe],
                                   cond, policy.cvae, config.weights, prng)
        return comps

    for epoch in range(config.epochs):
        order = rng.permutation(m)
        g_comps_acc = {"kl": 0.0, "pos": 0.0, "rot": 0.0, "total": 0.0}
        d_acc = 0.0
        n_batches = 0
        for lo in range(0, m - config.batch_size + 1, config.batch_size):
            idx = order[lo: lo + config.batch_size]
            cond = policy.condition_batch_t(dataset.clouds[idx], dataset.states[idx])
            g_loss, comps = cvae_loss_t(rule_delta[idx], rule_rel_mats[idx],
                                        cond, policy.cvae, config.weights, rng)
            d_pred = policy.d_scores_t(cond, exec_delta[idx])
            d_loss = l1_loss(d_pred, Tensor(dataset.labels[idx]))
            total = g_loss + d_loss
            total.backward()
            opt.step()
            for k in g_comps_acc:
                g_comps_acc[k] += comps[k]
            d_acc += d_loss.item()
            n_batches += 1
        row = {"stage": stage, "epoch": epoch + 1,
               **{f"g_{k}": v / n_batches for k, v in g_comps_acc.items()},
               "d_l1": d_acc / n_batches}
        if epoch == 0 or epoch == config.epochs - 1:
            row["probe_total"] = probe_loss()["total"]
        metrics.append(row)
    return policy, metrics


def train_door_stage(catalog: AssetCatalog, config: TrainConfig
                     ) -> tuple[StagePolicy, list[dict], StageDataset]:
    records = collect_stage_records(catalog, config, "door")
    dataset = _rows_from_records(records, "door")
    if dataset is None:
        raise DataError("door-stage collection yielded no samples")
    policy, metrics = train_stage_policy(dataset, config, "door")
    return policy, metrics, dataset


def train_handle_stage(catalog: AssetCatalog, door_policy: StagePolicy | None,
                       config: TrainConfig) -> tuple[StagePolicy, list[dict], StageDataset]:
    """Handle policy conditioned on the learned door policy downstream.

    `door_policy=None` is only legal for the no_condition ablation, which
    substitutes the expert door rule during collection.
    """
    if door_policy is None and config.ablation != "no_condition":
        raise ProvenanceError("handle stage requires the trained door policy")
    records = collect_stage_records(catalog, config, "handle", downstream_door=door_policy)
    dataset = _rows_from_records(records, "handle")
    if dataset is None:
        raise DataError("handle-stage collection yielded no samples")
    policy, metrics = train_stage_policy(dataset, config, "handle")
    return policy, metrics, dataset


@dataclass
class GraspDataset:
    clouds: np.ndarray       # (M, 4096, 3)
    actions: np.ndarray      # (M, 9)
    labels: np.ndarray       # (M,) normalized final door angle
    tangents: np.ndarray     # (M, 3) privileged handle axis used by the sampler


def _handle_point_indices(instance: DoorInstance, cloud: np.ndarray,
                          tol: float = 0.005) -> np.ndarray:
    prims = instance.handle_prims(0.0, 0.0)
    d = points_scene_distance(cloud.astype(np.float64), prims)
    return np.nonzero(d < tol)[0]


def collect_grasp_records(catalog: AssetCatalog, handle_policy: StagePolicy,
                          door_policy: StagePolicy, config: TrainConfig
                          ) -> GraspDataset:
    """Per episode: one sampled grasp executes, learned stage-2/3 policies run
    downstream, and the normalized final door angle becomes the D label."""
    robot = config.robot()
    task = config.task
    instances = _train_instance_cycle(catalog, config.seed + 2, config.episodes_grasp)
    use_expert_downstream = config.ablation == "no_condition"
    clouds, acts, labels, tangents = [], [], [], []
    for ep, inst in enumerate(instances):
        ep_seed = config.seed * 100_000 + 200_000 + ep
        rng = np.random.default_rng([ep_seed, 91])
        state = reset(inst, robot, task, ep_seed)
        obs0 = observe(inst, state, robot, config.camera, seed=ep_seed * 5)
        handle_idx = _handle_point_indices(inst, obs0.cloud)
        if handle_idx.size > 0 and rng.random() >= config.off_handle_fraction:
            pi = int(handle_idx[rng.integers(handle_idx.size)])
        else:
            pi = int(rng.integers(obs0.cloud.shape[0]))
        point = obs0.cloud[pi].astype(np.float64)
        axis = inst.anchor_tangent_world(0.0, 0.0)
        action = sample_grasp_candidates(point, axis, 1, seed=ep_seed)[0]
        try:
            step(state, action, inst, robot, task)
            k = 0
            while (not state.unlocked and state.step_index < task.horizon
                   and k < task.stage2_budget and not state.success
                   and not (task.terminate_on_collision and state.collided)):
                if use_expert_downstream:
                    try:
                        a = expert_handle_action(inst, state)
                    except Exception:
                        break
                else:
                    ob = observe(inst, state, robot, config.camera,
                                 seed=ep_seed * 5 + state.step_index)
                    a = propose_stage_action(handle_policy, ob, seed=ep_seed * 7 + state.step_index)
                step(state, a, inst, robot, task)
                k += 1
            while (state.step_index < task.horizon and not state.success
                   and not (task.terminate_on_collision and state.collided)):
                if use_expert_downstream:
                    try:
                        a = expert_door_action(inst, state)
                    except Exception:
                        break
                else:
                    ob = observe(inst, state, robot, config.camera,
                                 seed=ep_seed * 5 + state.step_index)
                    a = propose_stage_action(door_policy, ob, seed=ep_seed * 7 + state.step_index)
                step(state, a, inst, robot, task)
        except Exception:
            pass   # failures keep their (low) final angle as the label
        label = float(np.clip(state.theta_d, 0.0, task.thre_door) / task.thre_door)
        clouds.append(obs0.cloud)
        acts.append(actions_to_array([action])[0])
        labels.append(label)
        tangents.append(axis.astype(np.float32))
    return GraspDataset(clouds=np.stack(clouds), actions=np.stack(acts),
                        labels=np.asarray(labels, dtype=np.float32),
                        tangents=np.stack(tangents))


def train_grasp_stage(catalog: AssetCatalog, handle_policy: StagePolicy | None,
                      door_policy: StagePolicy | None, config: TrainConfig
                      ) -> tuple[GraspPolicy, list[dict]]:
    """Grasp discriminator on executed episode outcomes, then affordance
    distillation to the mean of the top-10 discriminator scores."""
    if (handle_policy is None or door_policy is None) and config.ablation != "no_condition":
        raise ProvenanceError("grasp stage requires both downstream policies")
    data = collect_grasp_records(catalog, handle_policy, door_policy, config)
    rng = np.random.default_rng([config.seed, 97])
    policy = GraspPolicy(config.net, rng)
    metrics: list[dict] = []

    # -- discriminator ------------------------------------------------------
    opt_d = Adam([t for name, t in policy.named_parameters().items()
                  if name.split(".")[0] in ("encoder", "act_mlp", "d_head")], lr=config.lr)
    m = len(data.labels)
    bs = config.batch_size
    for epoch in range(config.epochs):
        order = rng.permutation(m)
        acc = 0.0
        n_b = 0
        for lo in range(0, m - bs + 1, bs):
            idx = order[lo: lo + bs]
            sub = data.clouds[idx][:, : config.net.n_encode]
            feats = policy.encoder.global_feature(Tensor(sub.astype(np.float32)), axis=1)
            emb = policy.act_mlp(Tensor(data.actions[idx]))
            pred = ad.sigmoid(ad.reshape(policy.d_head(ad.concat([feats, emb], axis=1)), (len(idx),)))
            loss = l1_loss(pred, Tensor(data.labels[idx]))
            loss.backward()
            opt_d.step()
            acc += loss.item()
            n_b += 1
        metrics.append({"stage": "grasp_d", "epoch": epoch + 1, "d_l1": acc / max(n_b, 1)})

    # -- affordance distillation -------------------------------------------
    # Contact points are sampled uniformly over each cloud; per point, 50
    # candidates scored by the frozen discriminator give the mean-top-10 target.
    n_clouds = min(config.distill_clouds, m)
    targets_all = []
    points_all = []
    for ci in range(n_clouds):
        cloud = data.clouds[ci]
        crng = np.random.default_rng([config.seed, 101, ci])
        pts_idx = crng.choice(cloud.shape[0], size=config.distill_points, replace=False)
        feat = policy.global_feature_t(cloud)
        per_cloud_targets = np.empty(config.distill_points, dtype=np.float32)
        for k, pi in enumerate(pts_idx):
            cands = sample_grasp_candidates(cloud[pi].astype(np.float64),
                                            data.tangents[ci].astype(np.float64),
                                            config.candidates_per_point,
                                            seed=config.seed * 999 + ci * 131 + int(pi))
            scores = policy.d_scores_t(feat, actions_to_array(cands)).data
            top = np.sort(scores)[-config.top_k:]
            per_cloud_targets[k] = float(top.mean())
        targets_all.append(per_cloud_targets)
        points_all.append(pts_idx)

    opt_e = Adam([t for name, t in policy.named_parameters().items()
                  if name.split(".")[0] in ("encoder", "point_mlp", "score_head")], lr=config.lr)
    for epoch in range(config.epochs):
        acc = 0.0
        for ci in range(n_clouds):
            pred = policy.affordance_at_t(data.clouds[ci], points_all[ci])
            loss = l1_loss(pred, Tensor(targets_all[ci]))
            loss.backward()
            opt_e.step()
            acc += loss.item()
        metrics.append({"stage": "grasp_e", "epoch": epoch + 1, "e_l1": acc / n_clouds})
    return policy, metrics


def _weights_hash(module) -> str:
    h = hashlib.sha256()
    for name, arr in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr, dtype=np.float32).tobytes())
    return h.hexdigest()[:16]


@dataclass
class CheckpointBundle:
    grasp: GraspPolicy
    handle: StagePolicy
    door: StagePolicy
    config: TrainConfig
    catalog_hash: str
    provenance: dict
    metrics: list[dict] = field(default_factory=list)

    @property
    def flags(self) -> AblationFlags:
        return self.config.flags

    def policy(self) -> UniversalPolicy:
        return UniversalPolicy(self.grasp, self.handle, self.door,
                               cfg=self.config.net, flags=self.flags)

    def robot(self) -> RobotModel:
        return self.config.robot()

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        chash = self.config.config_hash()
        for name, module in (("grasp", self.grasp), ("handle", self.handle),
                             ("door", self.door)):
            save_checkpoint(out / f"{name}.ckpt", module.state_dict(), chash,
                            self.config.seed, meta={"role": name})
        manifest = {
            "schema": "doorverse-bundle-v1",
            "config_hash": chash,
            "catalog_hash": self.catalog_hash,
            "train_config": self.config.to_dict(),
            "provenance": self.provenance,
        }
        (out / "bundle.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
        with open(out / "metrics.csv", "w") as fh:
            keys = sorted({k for row in self.metrics for k in row})
            fh.write(",".join(keys) + "\n")
            for row in self.metrics:
                fh.write(",".join(str(row.get(k, "")) for k in keys) + "\n")

    @staticmethod
    def load(in_dir: str | Path) -> "CheckpointBundle":
        src = Path(in_dir)
        manifest = json.loads((src / "bundle.json").read_text())
        config = TrainConfig.from_dict(manifest["train_config"])
        chash = manifest["config_hash"]
        rng = np.random.default_rng(0)
        grasp = GraspPolicy(config.net, rng)
        handle = StagePolicy(config.net, rng, no_state=config.flags.no_state)
        door = StagePolicy(config.net, rng, no_state=config.flags.no_state)
        for name, module in (("grasp", grasp), ("handle", handle), ("door", door)):
            arrays, _ = load_checkpoint(src / f"{name}.ckpt", expect_config_hash=chash)
            module.load_state_dict(arrays)
        metrics = []
        return CheckpointBundle(grasp=grasp, handle=handle, door=door, config=config,
                                catalog_hash=manifest["catalog_hash"],
                                provenance=manifest["provenance"], metrics=metrics)


def train_full(catalog: AssetCatalog, config: TrainConfig) -> CheckpointBundle:
    """Stages in reversed inference order: door -> handle -> grasp."""
    config.validate()
    metrics: list[dict] = []
    provenance: dict = {"ablation": config.ablation}

    if config.ablation == "no_disentangle":
        records_d = collect_stage_records(catalog, config, "door")
        door_data = _rows_from_records(records_d, "door")
        records_h = collect_stage_records(catalog, config, "handle", downstream_door=None)
        handle_data = _rows_from_records(records_h, "handle")
        if door_data is None or handle_data is None:
            raise DataError("no rows for the merged policy")
        merged_data = _merge_datasets(door_data, handle_data)
        merged, m_merged = train_stage_policy(merged_data, config, "merged")
        door_policy = merged
        handle_policy = merged
        metrics.extend(m_merged)
        provenance["merged"] = {"weights": _weights_hash(merged),
                                "data": "concatenated handle+door rows"}
    else:
        door_policy, m_door, _ = train_door_stage(catalog, config)
        metrics.extend(m_door)
        provenance["door"] = {"weights": _weights_hash(door_policy), "conditioned_on": "expert"}
        downstream = None if config.ablation == "no_condition" else door_policy
        handle_policy, m_handle, _ = train_handle_stage(catalog, downstream, config)
        metrics.extend(m_handle)
        provenance["handle"] = {
            "weights": _weights_hash(handle_policy),
            "conditioned_on": "expert-rule" if config.ablation == "no_condition"
            else provenance["door"]["weights"],
        }

    down_h = None if config.ablation == "no_condition" else handle_policy
    down_d = None if config.ablation == "no_condition" else door_policy
    grasp_policy, m_grasp = train_grasp_stage(catalog, down_h, down_d, config)
    metrics.extend(m_grasp)
    provenance["grasp"] = {
        "weights": _weights_hash(grasp_policy),
        "conditioned_on": "expert-rule" if config.ablation == "no_condition" else [
            provenance.get("handle", {}).get("weights", provenance.get("merged", {}).get("weights")),
            provenance.get("door", {}).get("weights", provenance.get("merged", {}).get("weights")),
        ],
    }
    return CheckpointBundle(grasp=grasp_policy, handle=handle_policy, door=door_policy,
                            config=config, catalog_hash=catalog.content_hash(),
                            provenance=provenance, metrics=metrics)
