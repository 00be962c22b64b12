import json
import math

import numpy as np
import pytest

from doorverse import bench, trainer
from doorverse.assets import build_catalog
from doorverse.errors import CompatibilityError, DataError, InvalidArgumentError
from doorverse.policies import ExpertWiredPolicy, RandomPolicy
from doorverse.sim import Action, RobotModel, TaskConfig


class IdlePolicy:
    """Holds the home pose with an open gripper; never opens anything."""

    needs_observation = False

    def grasp_action(self, obs, instance, state, seed):
        return Action(state.ee_pose.pos, state.ee_pose.rot, "open")

    def stage_action(self, stage, obs, instance, state, seed):
        return Action(state.ee_pose.pos, state.ee_pose.rot, "open")


@pytest.fixture(scope="module")
def catalog():
    return build_catalog(4, 0.25, seed=11)


class TestEvaluate:
    def test_idle_policy_scores_zero_everywhere(self, catalog):
        report = bench.evaluate(IdlePolicy(), catalog, "test_shape", n_per_category=2,
                                seeds=(1, 2), check_compatibility=False)
        for cat, stats in report.categories.items():
            assert stats["mean"] == 0.0
            assert stats["variance"] == 0.0   # identical per-seed results
        assert report.overall_mean == 0.0

    def test_expert_rule_policy_on_train_split(self, catalog):
        policy = ExpertWiredPolicy(RobotModel())
        report = bench.evaluate(policy, catalog, "train", n_per_category=3,
                                seeds=(1,), check_compatibility=False)
        assert report.overall_mean >= 0.95

    def test_three_seed_protocol_recorded(self, catalog):
        report = bench.evaluate(IdlePolicy(), catalog, "test_shape", n_per_category=1,
                                seeds=(1, 2, 3), check_compatibility=False)
        assert report.seeds == (1, 2, 3)
        for stats in report.categories.values():
            assert len(stats["per_seed"]) == 3

    def test_catalog_mismatch_rejected(self, catalog):
        config = trainer.TrainConfig(episodes_door=8, episodes_handle=8, episodes_grasp=8,
                                     epochs=2, batch_size=8, distill_clouds=2,
                                     distill_points=8, probe_size=8, seed=1)
        bundle = trainer.train_full(catalog, config)
        other = build_catalog(4, 0.25, seed=99)
        with pytest.raises(CompatibilityError):
            bench.evaluate(bundle, other, "test_shape", n_per_category=1, seeds=(1,))

    def test_report_save(self, catalog, tmp_path):
        report = bench.evaluate(IdlePolicy(), catalog, "test_shape", n_per_category=1,
                                seeds=(1,), check_compatibility=False)
        report.save(tmp_path, name="r")
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["n_episodes"] == len(report.episodes)
        lines = (tmp_path / "r_episodes.jsonl").read_text().splitlines()
        assert len(lines) == len(report.episodes)


class TestReplayVerification:
    def test_expert_episodes_replay_exactly(self, catalog):
        policy = ExpertWiredPolicy(RobotModel())
        report = bench.evaluate(policy, catalog, "train", n_per_category=2,
                                seeds=(1,), check_compatibility=False)
        assert bench.verify_replays(report, catalog, RobotModel(), TaskConfig(), n=10)

    def test_empty_log_rejected(self, catalog):
        report = bench.evaluate(IdlePolicy(), catalog, "test_shape", n_per_category=1,
                                seeds=(1,), check_compatibility=False)
        report.episodes = []
        with pytest.raises(DataError):
            bench.verify_replays(report, catalog, RobotModel(), TaskConfig())


class TestThresholdCurve:
    def _episodes(self, maxes):
        return [{"max_theta_d": m} for m in maxes]

    def test_monotone_non_increasing(self):
        rng = np.random.default_rng(0)
        eps = self._episodes(rng.random(200) * 1.2)
        ts = [math.radians(d) for d in range(0, 50, 5)]
        curve = bench.threshold_curve(eps, ts)
        s = curve["success"]
        assert all(b <= a for a, b in zip(s, s[1:]))

    def test_zero_threshold_counts_any_motion(self):
        eps = self._episodes([0.0, 0.3, 0.0, 0.9])
        curve = bench.threshold_curve(eps, [0.0, 0.5])
        assert curve["success"][0] == pytest.approx(0.5)

    def test_consistency_with_success_rate_at_45(self, catalog):
        policy = ExpertWiredPolicy(RobotModel())
        report = bench.evaluate(policy, catalog, "train", n_per_category=2,
                                seeds=(1,), check_compatibility=False)
        curve = bench.threshold_curve(report.episodes, [TaskConfig().thre_door])
        overall = np.mean([ep["success"] for ep in report.episodes])
        assert curve["success"][0] == pytest.approx(overall)

    def test_empty_and_unsorted_rejected(self):
        with pytest.raises(DataError):
            bench.threshold_curve([], [0.1])
        with pytest.raises(InvalidArgumentError):
            bench.threshold_curve(self._episodes([0.1]), [0.5, 0.2])

    def test_csv_and_svg_emission(self, tmp_path):
        eps = self._episodes(np.linspace(0, 1.0, 50).tolist())
        ts = [math.radians(d) for d in range(0, 50, 5)]
        curves = {"full": bench.threshold_curve(eps, ts),
                  "no_state": bench.threshold_curve(eps[:25], ts)}
        bench.write_curve_csv(tmp_path / "c.csv", curves)
        bench.write_curve_svg(tmp_path / "c.svg", curves)
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "threshold_rad,full,no_state"
        assert len(lines) == 1 + len(ts)
        svg = (tmp_path / "c.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg


class TestRandomBaseline:
    def test_random_policy_floor(self, catalog):
        report = bench.evaluate(RandomPolicy(seed=3), catalog, "test_shape",
                                n_per_category=4, seeds=(1, 2), check_compatibility=False)
        for stats in report.categories.values():
            assert stats["mean"] <= 0.05


class TestAblationTable:
    def test_structure_and_shared_instances(self, catalog):
        config = trainer.TrainConfig(episodes_door=8, episodes_handle=8, episodes_grasp=8,
                                     epochs=2, batch_size=8, distill_clouds=2,
                                     distill_points=8, probe_size=8, seed=1)
        specs = [bench.AblationSpec("full"), bench.AblationSpec("no_mobile")]
        table = bench.ablation_run(catalog, specs, config, n_per_category=1, seeds=(1,))
        assert table.variants == ["full", "no_mobile"]
        assert len(table.columns) == 6
        for variant in table.variants:
            assert set(table.rates[variant]) == set(table.columns)
        # identical evaluation instance lists across variants
        for variant in table.variants:
            rep = table.reports[variant]["test_shape"]
            for cat, ids in rep.instance_ids.items():
                assert ids == table.instance_ids[f"{cat}/test_shape"]

    def test_unknown_variant_rejected(self):
        with pytest.raises(InvalidArgumentError):
            bench.AblationSpec("no_such_thing")
