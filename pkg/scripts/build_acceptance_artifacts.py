#!/usr/bin/env python3
"""Build (or refresh) the cached artifacts behind the slow acceptance tests.

Run this once before `pytest`; the suite then reuses the cache. On a single
core expect a few hours: the default-budget training pipeline dominates,
followed by the five-variant ablation grid at reduced budgets.
"""
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import _acceptance_helpers as helpers  # noqa: E402


def main() -> int:
    t0 = time.time()
    print("catalog ...", flush=True)
    catalog = helpers.acceptance_catalog()
    print(f"default-budget training ({helpers.default_config().config_hash()}) ...", flush=True)
    bundle = helpers.build_default_bundle(catalog)
    print(f"  done at {time.time() - t0:.0f}s", flush=True)
    print("default evaluation report ...", flush=True)
    report = helpers.build_default_report(bundle, catalog)
    print(f"  overall={report.overall_mean:.3f} at {time.time() - t0:.0f}s", flush=True)
    print("ablation grid ...", flush=True)
    table = helpers.build_ablation_table(catalog)
    for variant in table.variants:
        print(f"  {variant}: category average {table.category_average(variant):.3f}", flush=True)
    print(f"all artifacts ready in {time.time() - t0:.0f}s "
          f"(cache: {helpers.cache_dir()})", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
