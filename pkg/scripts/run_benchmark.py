#!/usr/bin/env python3
"""End-to-end demo at a small budget: forge, train, evaluate, plot curves.

Writes everything under the given output directory (default ./benchmark_out).
Small budgets keep this to roughly half an hour on one core; pass --episodes /
--epochs to scale up toward the full protocol.
"""
import argparse
import json
import math
import sys
from pathlib import Path

from doorverse import bench, trainer
from doorverse.assets import build_catalog


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="benchmark_out")
    parser.add_argument("--counts", type=int, default=12)
    parser.add_argument("--episodes", type=int, default=150)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--n-eval", type=int, default=3)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    catalog = build_catalog(args.counts, 0.25, seed=7)
    catalog.save(out / "catalog")

    config = trainer.TrainConfig(
        episodes_door=args.episodes, episodes_handle=args.episodes,
        episodes_grasp=int(args.episodes * 4 / 3), epochs=args.epochs, seed=args.seed)
    print("training (reversed order: door -> handle -> grasp) ...", flush=True)
    bundle = trainer.train_full(catalog, config)
    bundle.save(out / "bundle")

    print("evaluating ...", flush=True)
    report = bench.evaluate(bundle, catalog, "test_shape", n_per_category=args.n_eval,
                            seeds=(1, 2, 3))
    report.save(out, name="test_shape")
    print(json.dumps({c: report.categories[c]["mean"] for c in report.categories}, indent=1))
    print(f"overall: {report.overall_mean:.3f} (variance {report.overall_variance:.4f})")

    thresholds = [math.radians(d) for d in range(0, 50, 5)]
    curves = {"policy": bench.threshold_curve(report.episodes, thresholds)}
    bench.write_curve_csv(out / "curve.csv", curves)
    bench.write_curve_svg(out / "curve.svg", curves)
    print(f"artifacts in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
