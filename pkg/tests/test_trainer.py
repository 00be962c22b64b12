import numpy as np
import pytest

from doorverse import trainer
from doorverse.assets import build_catalog
from doorverse.errors import ProvenanceError
from doorverse.expert import DELTA_D, NoiseConfig
from doorverse.sim import reset, step

TINY = dict(episodes_door=10, episodes_handle=10, episodes_grasp=10, epochs=3,
            batch_size=8, distill_clouds=4, distill_points=8, probe_size=16,
            samples_per_episode=3)


@pytest.fixture(scope="module")
def catalog():
    return build_catalog(3, 0.34, seed=7)


@pytest.fixture(scope="module")
def tiny_bundle(catalog):
    return trainer.train_full(catalog, trainer.TrainConfig(seed=1, **TINY))


class TestReversedOrder:
    def test_handle_stage_requires_door_policy(self, catalog):
        config = trainer.TrainConfig(seed=1, **TINY)
        with pytest.raises(ProvenanceError):
            trainer.train_handle_stage(catalog, None, config)

    def test_grasp_stage_requires_both_downstream(self, catalog):
        config = trainer.TrainConfig(seed=1, **TINY)
        with pytest.raises(ProvenanceError):
            trainer.train_grasp_stage(catalog, None, None, config)

    def test_provenance_chain(self, tiny_bundle):
        prov = tiny_bundle.provenance
        assert prov["handle"]["conditioned_on"] == prov["door"]["weights"]
        assert prov["grasp"]["conditioned_on"] == [prov["handle"]["weights"],
                                                   prov["door"]["weights"]]


class TestCollection:
    def test_zero_perturbation_door_labels_equal_step_size(self, catalog):
        config = trainer.TrainConfig(seed=3, noise_door=NoiseConfig(), **TINY)
        records = trainer.collect_stage_records(catalog, config, "door")
        labels = [s.d_theta_d for r in records for s in r.stage_steps("door")]
        assert labels, "no door steps collected"
        # every unperturbed opening step realizes exactly the expert advance
        assert np.allclose(labels, DELTA_D, atol=1e-6)

    def test_label_provenance_replays_exactly(self, catalog):
        config = trainer.TrainConfig(seed=5, **TINY)
        records = trainer.collect_stage_records(catalog, config, "door")
        rng = np.random.default_rng(0)
        robot = config.robot()
        checked = 0
        for rec in records:
            if checked >= 50:
                break
            inst = catalog.instances[rec.instance_id]
            state = reset(inst, robot, config.task, rec.seed)
            for s in rec.steps:
                result = step(state, s.action, inst, robot, config.task)
                assert abs(result.d_theta_h - s.d_theta_h) < 1e-9
                assert abs(result.d_theta_d - s.d_theta_d) < 1e-9
                checked += 1
        assert checked >= 50

    def test_handle_rows_have_observations_only_at_sampled_steps(self, catalog):
        config = trainer.TrainConfig(seed=2, **TINY)
        records = trainer.collect_stage_records(catalog, config, "handle",
                                                downstream_door=None)
        for rec in records:
            per_stage = rec.stage_steps("handle")
            n_obs = sum(1 for s in per_stage if s.observation is not None)
            assert n_obs <= config.samples_per_episode


class TestDiscriminatorQuality:
    def test_door_discriminator_beats_constant_zero(self, catalog):
        config = trainer.TrainConfig(seed=4, epochs=12, episodes_door=30,
                                     episodes_handle=10, episodes_grasp=10,
                                     batch_size=16, distill_clouds=4, distill_points=8,
                                     probe_size=16, samples_per_episode=3)
        records = trainer.collect_stage_records(catalog, config, "door")
        data = trainer._rows_from_records(records, "door")
        n = len(data)
        split = int(0.8 * n)
        train_ds = trainer.StageDataset(*[getattr(data, f)[:split] for f in (
            "clouds", "states", "rule_actions", "rule_mats", "exec_actions", "labels")])
        policy, _ = trainer.train_stage_policy(train_ds, config, "door")
        cond = policy.condition_batch_t(data.clouds[split:], data.states[split:])
        base_pos, base_rot = policy.action_base(data.clouds[split:], data.states[split:])
        exec_delta, _ = policy.to_delta(data.exec_actions[split:], base_pos, base_rot)
        pred = policy.d_scores_t(cond, exec_delta).data
        held = data.labels[split:]
        l1_model = np.abs(pred - held).mean()
        l1_zero = np.abs(held).mean()
        assert l1_model < l1_zero


class TestGeneratorProgress:
    def test_probe_loss_halves(self, catalog):
        config = trainer.TrainConfig(seed=6, epochs=20, episodes_door=30,
                                     episodes_handle=10, episodes_grasp=10,
                                     batch_size=16, distill_clouds=4, distill_points=8,
                                     probe_size=32, samples_per_episode=3)
        _, metrics, _ = trainer.train_door_stage(catalog, config)
        probes = [m["probe_total"] for m in metrics if "probe_total" in m]
        assert len(probes) == 2
        assert probes[-1] <= 0.5 * probes[0]


class TestAblationsRouting:
    def test_no_disentangle_bundle_is_merged(self, catalog):
        config = trainer.TrainConfig(seed=1, ablation="no_disentangle", **TINY)
        bundle = trainer.train_full(catalog, config)
        assert bundle.handle is bundle.door
        assert "merged" in bundle.provenance

    def test_no_condition_uses_expert_rule_downstream(self, catalog):
        config = trainer.TrainConfig(seed=1, ablation="no_condition", **TINY)
        bundle = trainer.train_full(catalog, config)
        assert bundle.provenance["handle"]["conditioned_on"] == "expert-rule"
        assert bundle.provenance["grasp"]["conditioned_on"] == "expert-rule"

    def test_no_state_routes_flag_into_policies(self, catalog):
        config = trainer.TrainConfig(seed=1, ablation="no_state", **TINY)
        bundle = trainer.train_full(catalog, config)
        assert bundle.handle.no_state and bundle.door.no_state

    def test_no_mobile_freezes_base(self, catalog):
        config = trainer.TrainConfig(seed=1, ablation="no_mobile", **TINY)
        assert not config.robot().mobile
        assert config.robot().base_standoff == trainer.FIXED_BASE_STANDOFF


class TestDeterminism:
    def test_same_seed_same_metrics(self, catalog):
        config = trainer.TrainConfig(seed=9, episodes_door=8, episodes_handle=8,
                                     episodes_grasp=8, epochs=2, batch_size=8,
                                     distill_clouds=2, distill_points=8, probe_size=8)
        a = trainer.train_full(catalog, config)
        b = trainer.train_full(catalog, config)
        assert a.metrics == b.metrics
        assert a.provenance == b.provenance


class TestBundleIO:
    def test_save_load_roundtrip(self, tiny_bundle, tmp_path):
        tiny_bundle.save(tmp_path)
        back = trainer.CheckpointBundle.load(tmp_path)
        for name in ("grasp", "handle", "door"):
            s1 = getattr(tiny_bundle, name).state_dict()
            s2 = getattr(back, name).state_dict()
            assert set(s1) == set(s2)
            assert all(np.array_equal(s1[k], s2[k]) for k in s1)
        assert back.catalog_hash == tiny_bundle.catalog_hash
        assert (tmp_path / "metrics.csv").exists()
