import json

import pytest

from stoplab.cli import main
from stoplab.distributions import fingerprint


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and fingerprint() in out


def test_solve_critical_stdout(capsys):
    code, out, _ = run(capsys, "solve-critical", "--t-max", 3)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "t,z,p0" and len(lines) == 4
    assert lines[2].startswith("2,0.5")


def test_solve_classical_file(capsys, tmp_path):
    path = tmp_path / "c.csv"
    code, _, _ = run(capsys, "solve-classical", "--t-max", 4, "--out", path)
    assert code == 0
    assert path.read_text().splitlines()[1:3] == ["1,0,1.0", "2,1,0.5"]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--policy", "lp", "--boxes", "5", "--players", "60",
                 "--games", "3", "--seed", "7", "--out-dir", str(out)]) == 0
    return out


def test_simulate_outputs(sim_dir):
    names = {p.name for p in sim_dir.iterdir()}
    assert names == {"decisions.csv", "outcomes.csv", "learning_curve.csv", "manifest.json"}
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["schema_version"] == 1 and manifest["distributions"] == fingerprint()
    assert len((sim_dir / "learning_curve.csv").read_text().splitlines()) == 4


def test_simulate_is_byte_deterministic(sim_dir, tmp_path):
    assert main(["simulate", "--policy", "lp", "--boxes", "5", "--players", "60",
                 "--games", "3", "--seed", "7", "--out-dir", str(tmp_path)]) == 0
    for name in ("decisions.csv", "outcomes.csv", "learning_curve.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


def test_simulate_requires_seed(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--out-dir", tmp_path)
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_simulate_policy_file_and_config(capsys, tmp_path):
    pol = tmp_path / "pol.json"
    pol.write_text(json.dumps({"model": "single_threshold", "horizon": 4, "tau": [0.6],
                               "lam": 20.0}))
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"boxes": 4, "players": 10, "games": 2, "seed": 3,
                               "dist": "high", "policy": str(pol)}))
    out = tmp_path / "o"
    code, _, err = run(capsys, "--config", cfg, "simulate", "--out-dir", out)
    assert code == 0, err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["policy"]["model"] == "single_threshold"
    assert manifest["distribution"]["label"] == "high"


def test_bad_config_and_policy(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"boxes": 4, "speed": 3}))
    code, _, err = run(capsys, "--config", cfg, "simulate", "--seed", 1)
    assert code == 4 and "speed" in json.loads(err)["message"]
    pol = tmp_path / "pol.json"
    pol.write_text(json.dumps({"model": "single_threshold", "horizon": 9, "tau": [0.6],
                               "lam": 1.0}))
    code, _, err = run(capsys, "simulate", "--seed", 1, "--policy", pol, "--out-dir", tmp_path)
    assert code == 4
    code, _, _ = run(capsys, "simulate", "--seed", 1, "--policy", tmp_path / "missing.json",
                     "--out-dir", tmp_path)
    assert code == 3


def test_fit_writes_posterior(capsys, sim_dir, tmp_path):
    code, _, err = run(capsys, "fit", "--model", "single_threshold", "--data",
                       sim_dir / "decisions.csv", "--boxes", 5, "--seed", 1, "--draws", 200,
                       "--burn", 50, "--out-dir", tmp_path)
    assert code == 0, err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [p["parameter"] for p in summary["parameters"]] == ["tau", "lam"]
    assert len((tmp_path / "posterior.csv").read_text().splitlines()) == 151


def test_fit_empty_dataset(capsys, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("player_id,game_number,box_index,nondominated_count,box_value,"
                     "percentile,stopped,forced\n")
    code, _, err = run(capsys, "fit", "--model", "viable_k", "--data", empty, "--seed", 1)
    assert code == 5 and json.loads(err)["error"] == "empty_dataset"
    assert "empty dataset" in json.loads(err)["message"]


def test_fit_game_without_decisions(capsys, sim_dir, tmp_path):
    code, _, err = run(capsys, "fit", "--model", "viable_k", "--data", sim_dir / "decisions.csv",
                       "--game", 99, "--seed", 1, "--out-dir", tmp_path)
    assert code == 5


def test_fit_bad_and_missing_files(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    code, _, err = run(capsys, "fit", "--model", "viable_k", "--data", bad, "--seed", 1)
    assert code == 4 and json.loads(err)["error"] == "schema_invalid"
    code, _, _ = run(capsys, "fit", "--model", "viable_k", "--data", tmp_path / "none.csv",
                     "--seed", 1)
    assert code == 3


def test_compare_outputs(capsys, sim_dir, tmp_path):
    out = tmp_path / "cmp.json"
    code, _, err = run(capsys, "compare", "--data", sim_dir / "decisions.csv", "--models",
                       "value_oblivious,single_threshold", "--game", 3, "--draws", 150,
                       "--burn", 50, "--splits", 2, "--out", out)
    assert code == 0, err
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1 and len(report["rows"]) == 2
    assert out.with_suffix(".csv").read_text().startswith("game_number,model,")
    code, _, _ = run(capsys, "compare", "--data", sim_dir / "decisions.csv", "--models",
                     "value_oblivious,bogus")
    assert code == 4


def test_curves(capsys, sim_dir, tmp_path):
    out = tmp_path / "curves.csv"
    code, _, err = run(capsys, "curves", "--data", sim_dir / "decisions.csv", "--outcomes",
                       sim_dir / "outcomes.csv", "--out", out)
    assert code == 0, err
    assert len(out.read_text().splitlines()) == 1 + 3 * 40
    assert (tmp_path / "curves_learning.csv").exists()


def test_calibrate_single_gap(capsys):
    code, out, _ = run(capsys, "calibrate-dist", "--gap", 2e6, "--replicates", 20000)
    assert code == 0 and json.loads(out)["shape"] > 1
    code, _, err = run(capsys, "calibrate-dist", "--gap", 9e7, "--replicates", 1000)
    assert code == 6 and json.loads(err)["error"] == "calibration_failed"


def test_missing_subcommand_and_unknown_flag(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "solve-critical", "--bogus")[0] == 2
