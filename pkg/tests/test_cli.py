import json
import subprocess
import sys

import pytest

from doorverse.cli import main


def run_cli(*args):
    import io
    from contextlib import redirect_stdout, redirect_stderr
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(args))
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def catalog_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("catalog")
    code, out, _ = run_cli("forge", "--counts", "2", "--holdout", "0.5",
                           "--seed", "3", "--out", str(d))
    assert code == 0
    return d


def test_forge_creates_assets_and_manifest(catalog_dir):
    manifest = json.loads((catalog_dir / "catalog.json").read_text())
    assert len(manifest["instances"]) == 12
    first = manifest["instances"][0]
    asset = json.loads((catalog_dir / f"{first['id']}.json").read_text())
    assert asset["schema"] == "doorverse-asset-v1"


def test_forge_rejects_unknown_category(tmp_path):
    code, _, err = run_cli("forge", "--counts", "Bogus=3", "--out", str(tmp_path / "x"))
    assert code == 2
    payload = json.loads(err.strip())
    assert payload["error"] == "invalid-argument"


def test_render_cloud(catalog_dir, tmp_path):
    manifest = json.loads((catalog_dir / "catalog.json").read_text())
    asset = catalog_dir / f"{manifest['instances'][0]['id']}.json"
    out = tmp_path / "cloud.ply"
    code, stdout, _ = run_cli("render-cloud", "--asset", str(asset), "--out", str(out))
    assert code == 0
    assert out.read_text().startswith("ply")
    assert json.loads(stdout)["points"] > 1000


def test_sim_replay_script(catalog_dir, tmp_path):
    manifest = json.loads((catalog_dir / "catalog.json").read_text())
    asset = catalog_dir / f"{manifest['instances'][0]['id']}.json"
    script = tmp_path / "script.jsonl"
    script.write_text("")
    code, stdout, _ = run_cli("sim", "--asset", str(asset), "--script", str(script))
    assert code == 0
    summary = json.loads(stdout.strip().splitlines()[-1])
    assert summary["success"] is False and summary["steps"] == 0


def test_curve_from_episode_log(tmp_path):
    log = tmp_path / "eps.jsonl"
    rows = [json.dumps({"max_theta_d": v}) for v in (0.0, 0.2, 0.5, 0.9)]
    log.write_text("\n".join(rows) + "\n")
    out = tmp_path / "curves"
    code, stdout, _ = run_cli("curve", "--episodes", f"run={log}",
                              "--thresholds-deg", "0,20,45", "--out", str(out))
    assert code == 0
    assert (out / "curve.csv").exists() and (out / "curve.svg").exists()
    curve = json.loads(stdout)["run"]
    assert curve["success"] == [0.75, 0.5, 0.25]


def test_console_entry_point_installed():
    result = subprocess.run([sys.executable, "-m", "doorverse.cli", "--help"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    for sub in ("forge", "sim", "collect", "train", "eval", "ablate", "curve", "render-cloud"):
        assert sub in result.stdout
