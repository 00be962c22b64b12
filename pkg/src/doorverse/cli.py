"""Command-line entry point: forge, sim, collect, train, eval, ablate, curve, render-cloud."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import bench, trainer
from .assets import AssetCatalog, DoorInstance, build_catalog
from .errors import DoorverseError
from .expert import NoiseConfig, collect_episode, expert_controllers
from .percept import CameraConfig, render_depth, depth_to_cloud, write_ply
from .policies import replay_actions
from .sim import RobotModel, TaskConfig, reset
from .trainer import CheckpointBundle, TrainConfig


def _parse_counts(text: str) -> int | dict[str, int]:
    if "=" not in text:
        return int(text)
    out = {}
    for part in text.split(","):
        key, val = part.split("=")
        out[key.strip()] = int(val)
    return out


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def cmd_forge(args) -> int:
    catalog = build_catalog(_parse_counts(args.counts), args.holdout, args.seed)
    catalog.save(args.out)
    print(json.dumps({"instances": len(catalog.instances), "out": str(args.out)}))
    return 0


def cmd_sim(args) -> int:
    instance = DoorInstance.from_json(Path(args.asset).read_text())
    robot = RobotModel()
    task = TaskConfig()
    actions = [json.loads(line) for line in Path(args.script).read_text().splitlines() if line.strip()]
    result = replay_actions(instance, robot, task, args.seed, actions)
    for i, ev in enumerate(result.events):
        print(json.dumps({"step": i, "events": ev}))
    print(json.dumps({"success": result.success, "final_theta_d": result.final_theta_d,
                      "max_theta_d": result.max_theta_d, "steps": result.steps}))
    return 0


def cmd_collect(args) -> int:
    catalog = AssetCatalog.load(args.catalog)
    noise = NoiseConfig.from_dict(_load_json(args.noise)) if args.noise else NoiseConfig()
    robot = RobotModel()
    task = TaskConfig()
    camera = CameraConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clouds_dir = out / "clouds"
    clouds_dir.mkdir(exist_ok=True)
    ids = sorted(catalog.instances)
    counts: dict[str, dict[str, int]] = {}
    with open(out / "episodes.jsonl", "w") as fh:
        for ep in range(args.episodes):
            inst = catalog.instances[ids[ep % len(ids)]]
            rec = collect_episode(inst, expert_controllers(robot), noise,
                                  seed=args.seed + ep, robot=robot, task=task, camera=camera)
            row = rec.to_dict()
            for k, step_row in enumerate(row["steps"]):
                obs = rec.steps[k].observation
                if obs is not None:
                    ref = f"clouds/ep{ep:05d}_step{k:02d}.ply"
                    write_ply(out / ref, obs.cloud)
                    step_row["cloud"] = ref
                cat = inst.body.category
                stage = step_row["stage"]
                counts.setdefault(stage, {}).setdefault(cat, 0)
                counts[stage][cat] += 1
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    (out / "manifest.json").write_text(json.dumps(
        {"episodes": args.episodes, "counts": counts, "seed": args.seed}, sort_keys=True, indent=1))
    print(json.dumps({"episodes": args.episodes, "out": str(out)}))
    return 0


def cmd_train(args) -> int:
    catalog = AssetCatalog.load(args.catalog)
    cfg_dict = _load_json(args.config)
    if args.ablation:
        cfg_dict["ablation"] = args.ablation
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    config = TrainConfig.from_dict(cfg_dict)
    bundle = trainer.train_full(catalog, config)
    bundle.save(args.out)
    print(json.dumps({"out": str(args.out), "config_hash": config.config_hash(),
                      "ablation": config.ablation}))
    return 0


def cmd_eval(args) -> int:
    catalog = AssetCatalog.load(args.catalog)
    bundle = CheckpointBundle.load(args.bundle)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    report = bench.evaluate(bundle, catalog, args.split, args.n_per_category, seeds)
    out = Path(args.out)
    report.save(out)
    print(json.dumps({"overall_mean": report.overall_mean,
                      "overall_variance": report.overall_variance,
                      "categories": {c: report.categories[c]["mean"] for c in report.categories}}))
    return 0


def cmd_ablate(args) -> int:
    catalog = AssetCatalog.load(args.catalog)
    config = TrainConfig.from_dict(_load_json(args.config))
    variants = args.variants.split(",") if args.variants else list(trainer.ABLATIONS)
    specs = [bench.AblationSpec(v) for v in variants]
    table = bench.ablation_run(catalog, specs, config, n_per_category=args.n_per_category,
                               seeds=tuple(int(s) for s in args.seeds.split(",")))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "ablation_table.csv")
    (out / "ablation_table.json").write_text(json.dumps(table.to_dict(), sort_keys=True, indent=1))
    curves = {}
    for variant in table.variants:
        eps = table.reports[variant]["test_shape"].episodes
        curves[variant] = bench.threshold_curve(eps, [math.radians(d) for d in range(0, 50, 5)])
        table.reports[variant]["test_shape"].save(out, name=f"{variant}_test_shape")
        table.reports[variant]["test_category"].save(out, name=f"{variant}_test_category")
    bench.write_curve_csv(out / "threshold_curves.csv", curves)
    bench.write_curve_svg(out / "threshold_curves.svg", curves)
    print(json.dumps(table.to_dict()["category_average"]))
    return 0


def cmd_curve(args) -> int:
    curves = {}
    for pair in args.episodes.split(","):
        name, path = pair.split("=")
        eps = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        thresholds = [math.radians(float(d)) for d in args.thresholds_deg.split(",")]
        curves[name] = bench.threshold_curve(eps, thresholds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_curve_csv(out / "curve.csv", curves)
    bench.write_curve_svg(out / "curve.svg", curves)
    print(json.dumps(curves))
    return 0


def cmd_render_cloud(args) -> int:
    instance = DoorInstance.from_json(Path(args.asset).read_text())
    robot = RobotModel()
    state_dict = _load_json(args.state) if args.state else {}
    state = reset(instance, robot, TaskConfig(), seed=args.seed)
    state.theta_d = state_dict.get("theta_d", 0.0)
    state.theta_h = state_dict.get("theta_h", 0.0)
    camera = CameraConfig()
    depth = render_depth(instance, state, robot, camera)
    pts = depth_to_cloud(depth)
    write_ply(args.out, pts)
    print(json.dumps({"points": int(pts.shape[0]), "out": str(args.out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doorverse",
                                     description="Deterministic door-manipulation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forge", help="generate a door asset catalog")
    p.add_argument("--counts", default="10", help='per-category count, e.g. "10" or "Interior=10,Safe=5"')
    p.add_argument("--holdout", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("sim", help="replay an action script against an asset")
    p.add_argument("--asset", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("collect", help="record expert episodes as dataset shards")
    p.add_argument("--catalog", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--noise", default=None, help="NoiseConfig JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="run the reversed-order training pipeline")
    p.add_argument("--catalog", required=True)
    p.add_argument("--config", default=None, help="TrainConfig JSON file")
    p.add_argument("--ablation", default=None, choices=list(trainer.ABLATIONS))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--split", default="test_shape",
                   choices=["train", "test_shape", "test_category"])
    p.add_argument("--n-per-category", type=int, default=50)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train + evaluate the ablation matrix")
    p.add_argument("--catalog", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--variants", default=None, help="comma list; default: all")
    p.add_argument("--n-per-category", type=int, default=6)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("curve", help="threshold curves from episode logs")
    p.add_argument("--episodes", required=True, help='name=path pairs, comma separated')
    p.add_argument("--thresholds-deg", default="0,5,10,15,20,25,30,35,40,45")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("render-cloud", help="render one observation to a PLY cloud")
    p.add_argument("--asset", required=True)
    p.add_argument("--state", default=None, help="JSON with theta_d/theta_h")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_cloud)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DoorverseError as err:
        sys.stderr.write(json.dumps({"error": err.code, "message": str(err)}) + "\n")
        return 2
    except Exception as err:  # noqa: BLE001
        sys.stderr.write(json.dumps({"error": "internal", "message": str(err)}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
