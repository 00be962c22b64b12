"""Evaluation protocol, ablation matrix, threshold curves and reports.

Every reported number derives from logged episodes: logs carry the executed
action scripts, so any episode can be replayed through the simulator and must
reproduce its outcome exactly.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assets import AssetCatalog, CATEGORIES, TEST_CATEGORIES, TRAIN_CATEGORIES
from .errors import CompatibilityError, DataError, InvalidArgumentError
from .percept import CameraConfig
from .policies import EpisodeResult, RandomPolicy, replay_actions, run_episode
from .sim import RobotModel, TaskConfig
from .trainer import ABLATIONS, CheckpointBundle, TrainConfig, train_full

DEFAULT_SEEDS = (1, 2, 3)


@dataclass(frozen=True)
class AblationSpec:
    """One ablation-matrix entry; flags route through trainer, policies, robot."""

    name: str

    def __post_init__(self):
        if self.name not in ABLATIONS:
            raise InvalidArgumentError(f"unknown ablation {self.name!r}")


@dataclass
class EvalReport:
    split: str
    seeds: tuple[int, ...]
    n_per_category: int
    categories: dict             # category -> {mean, variance, per_seed}
    overall_mean: float
    overall_variance: float
    episodes: list[dict]         # replayable logs
    instance_ids: dict           # category -> evaluated ids
    config_snapshot: dict
    runtime_s: float

    def to_dict(self) -> dict:
        return {
            "split": self.split, "seeds": list(self.seeds),
            "n_per_category": self.n_per_category, "categories": self.categories,
            "overall_mean": self.overall_mean, "overall_variance": self.overall_variance,
            "instance_ids": self.instance_ids, "config_snapshot": self.config_snapshot,
            "runtime_s": self.runtime_s, "n_episodes": len(self.episodes),
        }

    def save(self, out_dir: str | Path, name: str = "report") -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))
        with open(out / f"{name}_episodes.jsonl", "w") as fh:
            for ep in self.episodes:
                fh.write(json.dumps(ep, sort_keys=True) + "\n")


def _resolve_policy(bundle_or_policy):
    """(policy, robot, task, camera, snapshot) from a bundle or raw policy."""
    if isinstance(bundle_or_policy, CheckpointBundle):
        b = bundle_or_policy
        snap = {"config_hash": b.config.config_hash(), "catalog_hash": b.catalog_hash,
                "ablation": b.config.ablation}
        return b.policy(), b.robot(), b.config.task, b.config.camera, snap
    policy = bundle_or_policy
    return (policy, getattr(policy, "robot", None) or RobotModel(), TaskConfig(),
            CameraConfig(), {"policy": type(policy).__name__})


def eval_instances(catalog: AssetCatalog, split: str, n_per_category: int,
                   categories: tuple[str, ...] | None = None) -> dict[str, list[str]]:
    """Deterministic per-category instance lists (sorted ids, first n)."""
    if categories is None:
        categories = TRAIN_CATEGORIES if split == "test_shape" else (
            TEST_CATEGORIES if split == "test_category" else CATEGORIES)
    out = {}
    for cat in categories:
        ids = sorted(catalog.ids_for(split, cat))[:n_per_category]
        if ids:
            out[cat] = ids
    if not out:
        raise DataError(f"no instances in split {split!r}")
    return out


def evaluate(bundle_or_policy, catalog: AssetCatalog, split: str = "test_shape",
             n_per_category: int = 50, seeds: tuple[int, ...] = DEFAULT_SEEDS,
             check_compatibility: bool = True,
             categories: tuple[str, ...] | None = None) -> EvalReport:
    """Success rate per category: mean and variance over evaluation seeds."""
    t0 = time.time()
    policy, robot, task, camera, snapshot = _resolve_policy(bundle_or_policy)
    if (check_compatibility and isinstance(bundle_or_policy, CheckpointBundle)
            and bundle_or_policy.catalog_hash != catalog.content_hash()):
        raise CompatibilityError("bundle was trained against a different catalog")
    ids_by_cat = eval_instances(catalog, split, n_per_category, categories)
    episodes: list[dict] = []
    cat_stats: dict[str, dict] = {}
    for cat, ids in ids_by_cat.items():
        per_seed = []
        for seed in seeds:
            wins = 0
            for k, iid in enumerate(ids):
                ep_seed = int(seed) * 100_000 + k
                res = run_episode(policy, catalog.instances[iid], robot, task,
                                  seed=ep_seed, camera=camera)
                episodes.append(res.to_dict())
                wins += int(res.success)
            per_seed.append(wins / len(ids))
        arr = np.asarray(per_seed)
        cat_stats[cat] = {"mean": float(arr.mean()), "variance": float(arr.var()),
                          "per_seed": per_seed}
    means = np.asarray([cat_stats[c]["mean"] for c in cat_stats])
    seed_means = np.asarray([[cat_stats[c]["per_seed"][i] for c in cat_stats]
                             for i in range(len(seeds))]).mean(axis=1)
    return EvalReport(
        split=split, seeds=tuple(int(s) for s in seeds), n_per_category=n_per_category,
        categories=cat_stats, overall_mean=float(means.mean()),
        overall_variance=float(seed_means.var()), episodes=episodes,
        instance_ids=ids_by_cat, config_snapshot=snapshot, runtime_s=time.time() - t0)


def verify_replays(report: EvalReport, catalog: AssetCatalog, robot: RobotModel,
                   task: TaskConfig, n: int = 10, seed: int = 0) -> bool:
    """Replay n randomly chosen logged episodes; outcomes must match exactly."""
    if not report.episodes:
        raise DataError("empty episode log")
    rng = np.random.default_rng([seed, 113])
    idx = rng.choice(len(report.episodes), size=min(n, len(report.episodes)), replace=False)
    for i in idx:
        ep = report.episodes[int(i)]
        res = replay_actions(catalog.instances[ep["instance_id"]], robot, task,
                             ep["seed"], ep["actions"])
        if res.success != ep["success"] or abs(res.final_theta_d - ep["final_theta_d"]) > 1e-12:
            return False
    return True


@dataclass
class AblationTable:
    variants: list[str]
    columns: list[str]                       # category labels (split-qualified)
    rates: dict                              # variant -> {column -> rate}
    instance_ids: dict                       # column -> ids (shared by all variants)
    reports: dict = field(default_factory=dict)       # variant -> {split -> EvalReport}
    episode_logs: dict = field(default_factory=dict)  # variant -> replay-light logs

    def category_average(self, variant: str) -> float:
        vals = [self.rates[variant][c] for c in self.columns]
        return float(np.mean(vals))

    def to_dict(self) -> dict:
        return {"variants": self.variants, "columns": self.columns, "rates": self.rates,
                "instance_ids": self.instance_ids,
                "category_average": {v: self.category_average(v) for v in self.variants}}

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("variant," + ",".join(self.columns) + ",average\n")
            for v in self.variants:
                row = [f"{self.rates[v][c]:.4f}" for c in self.columns]
                fh.write(f"{v}," + ",".join(row) + f",{self.category_average(v):.4f}\n")


def ablation_run(catalog: AssetCatalog, specs: list[AblationSpec],
                 base_config: TrainConfig, n_per_category: int = 6,
                 seeds: tuple[int, ...] = DEFAULT_SEEDS) -> AblationTable:
    """Train and evaluate each variant under identical seeds and instance lists.

    Columns follow the paper-style layout: unseen shapes of the four train
    categories plus the two unseen categories.
    """
    from dataclasses import replace as dc_replace
    variants = [s.name for s in specs]
    columns = [f"{c}/test_shape" for c in TRAIN_CATEGORIES] + \
              [f"{c}/test_category" for c in TEST_CATEGORIES]
    rates: dict[str, dict] = {}
    reports: dict[str, dict] = {}
    ids_shape = eval_instances(catalog, "test_shape", n_per_category)
    ids_cat = eval_instances(catalog, "test_category", n_per_category)
    instance_ids = {f"{c}/test_shape": ids_shape.get(c, []) for c in TRAIN_CATEGORIES}
    instance_ids.update({f"{c}/test_category": ids_cat.get(c, []) for c in TEST_CATEGORIES})

    for spec in specs:
        config = dc_replace(base_config, ablation=spec.name)
        bundle = train_full(catalog, config)
        rep_shape = evaluate(bundle, catalog, "test_shape", n_per_category, seeds)
        rep_cat = evaluate(bundle, catalog, "test_category", n_per_category, seeds)
        reports[spec.name] = {"test_shape": rep_shape, "test_category": rep_cat}
        row = {}
        for c in TRAIN_CATEGORIES:
            row[f"{c}/test_shape"] = rep_shape.categories.get(c, {"mean": 0.0})["mean"]
        for c in TEST_CATEGORIES:
            row[f"{c}/test_category"] = rep_cat.categories.get(c, {"mean": 0.0})["mean"]
        rates[spec.name] = row
    return AblationTable(variants=variants, columns=columns, rates=rates,
                         instance_ids=instance_ids, reports=reports)


def threshold_curve(episodes: list[dict], thresholds: list[float]) -> dict:
    """Success-vs-threshold data: success(t) = fraction with max theta_d > t."""
    if not episodes:
        raise DataError("empty episode log")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidArgumentError("thresholds must be strictly ascending")
    maxes = np.asarray([ep["max_theta_d"] for ep in episodes])
    return {"thresholds": [float(t) for t in thresholds],
            "success": [float((maxes > t).mean()) for t in thresholds]}


def write_curve_csv(path, curves: dict[str, dict]) -> None:
    names = sorted(curves)
    thresholds = curves[names[0]]["thresholds"]
    with open(path, "w") as fh:
        fh.write("threshold_rad," + ",".join(names) + "\n")
        for i, t in enumerate(thresholds):
            fh.write(f"{t:.6f}," + ",".join(f"{curves[n]['success'][i]:.4f}" for n in names) + "\n")


def write_curve_svg(path, curves: dict[str, dict], width: int = 640, height: int = 420) -> None:
    """Minimal standalone SVG line plot of success rate vs door-angle threshold."""
    pad = 50.0
    names = sorted(curves)
    tmax = max(max(c["thresholds"]) for c in curves.values())
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

    def sx(t):
        return pad + (t / tmax) * (width - 2 * pad)

    def sy(s):
        return height - pad - s * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{pad - 34}" y="{sy(frac) + 4}" font-size="11">{frac:.2f}</text>')
        parts.append(f'<line x1="{pad - 4}" y1="{sy(frac)}" x2="{pad}" y2="{sy(frac)}" stroke="black"/>')
    for i, name in enumerate(names):
        c = curves[name]
        pts = " ".join(f"{sx(t):.1f},{sy(s):.1f}" for t, s in zip(c["thresholds"], c["success"]))
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad - 130}" y="{pad + 16 * i + 8}" font-size="12" '
                     f'fill="{color}">{name}</text>')
    parts.append(f'<text x="{width / 2 - 70}" y="{height - 12}" font-size="12">'
                 'door angle threshold (rad)</text>')
    parts.append('</svg>')
    Path(path).write_text("\n".join(parts))


def random_baseline_report(catalog: AssetCatalog, split: str = "test_shape",
                           n_per_category: int = 10,
                           seeds: tuple[int, ...] = DEFAULT_SEEDS,
                           robot: RobotModel | None = None) -> EvalReport:
    policy = RandomPolicy(seed=7)
    if robot is not None:
        policy.robot = robot
    return evaluate(policy, catalog, split, n_per_category, seeds, check_compatibility=False)
