import json

import pytest

from dmgplan.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from dmgplan.config import ENV_VAR, Config, load_config

RES = ["--r-area", "0.01", "--r-angle", "10"]


@pytest.fixture(scope="module")
def plate_dmg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "plate.json"
    assert main(["generate", "fixture:plate", "-o", str(path), "--audit", *RES]) == EXIT_OK
    return path


TOP = json.dumps({"p1": [0.01, 0.01, 0.005], "angle_deg": 0})
TOP_FAR = json.dumps({"p1": [0.05, 0.05, 0.005], "angle_deg": 90})
BOTTOM = json.dumps({"p1": [0.05, 0.05, 0.0], "angle_deg": 90})


def test_generate_reports_summary(plate_dmg, capsys):
    data = json.loads(plate_dmg.read_text())
    assert data["kind"] == "dmg" and data["schema_version"] == 1
    main(["generate", "fixture:box", "-o", str(plate_dmg.with_name("box.json")), "--audit", *RES])
    out = json.loads(capsys.readouterr().out)
    assert out["audit_violations"] == 0 and out["nodes"] == 164


def test_plan_and_simulate(plate_dmg, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    assert main(["plan", str(plate_dmg), "--start", TOP, "--goal", TOP_FAR, "-o", str(plan)]) == 0
    assert json.loads(capsys.readouterr().out)["phases"] == ["inhand"]
    traj = tmp_path / "traj.jsonl"
    assert main(["simulate", str(plan), "-o", str(traj), "--ply-dir", str(tmp_path / "ply")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["final_position_error_m"] <= 0.01
    assert traj.read_text().count("\n") == out["states"]
    assert list((tmp_path / "ply").glob("*.ply"))


def test_regrasp_plan(plate_dmg, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    assert main(["plan", str(plate_dmg), "--start", TOP, "--goal", BOTTOM, "-o", str(plan)]) == 0
    assert len(json.loads(capsys.readouterr().out)["phases"]) == 6


def test_infeasible_exit_code(plate_dmg, tmp_path, capsys):
    code = main(["plan", str(plate_dmg), "--start", TOP, "--goal", BOTTOM, "--inhand-only",
                 "-o", str(tmp_path / "p.json")])
    assert code == EXIT_INFEASIBLE
    assert "inhand" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["generate", "no_such_mesh.obj"],
    ["generate", "fixture:nope"],
    ["plan", "missing.json", "--start", "{}", "--goal", "{}"],
    ["simulate", "missing.json"],
    ["generate", "fixture:box", "--r-angle", "7"],
])
def test_bad_input_exit_code(argv, tmp_path):
    assert main(argv + ["-o", str(tmp_path / "x")]) == EXIT_INPUT


def test_bad_grasp(plate_dmg, tmp_path):
    far = json.dumps({"p1": [1, 1, 1]})
    assert main(["plan", str(plate_dmg), "--start", far, "--goal", TOP,
                 "-o", str(tmp_path / "p.json")]) == EXIT_INPUT
    assert main(["plan", str(plate_dmg), "--start", "not json", "--goal", TOP,
                 "-o", str(tmp_path / "p.json")]) == EXIT_INPUT


def test_grasp_from_file(plate_dmg, tmp_path):
    f = tmp_path / "start.json"
    f.write_text(TOP)
    assert main(["plan", str(plate_dmg), "--start", f"@{f}", "--goal", TOP_FAR,
                 "-o", str(tmp_path / "p.json")]) == EXIT_OK


def test_export(plate_dmg, tmp_path):
    assert main(["export", str(plate_dmg), "-o", str(tmp_path / "dmg.ply")]) == EXIT_OK
    plan = tmp_path / "plan.json"
    main(["plan", str(plate_dmg), "--start", TOP, "--goal", BOTTOM, "-o", str(plan)])
    assert main(["export", str(plan), "-o", str(tmp_path / "plan.ply")]) == EXIT_INPUT
    assert main(["export", str(plan), "--dmg", str(plate_dmg),
                 "-o", str(tmp_path / "plan.ply")]) == EXIT_OK
    assert (tmp_path / "plan.ply").stat().st_size > 0


def test_benchmark(capsys):
    assert main(["benchmark", "--mesh", "fixture:plate", "--r-areas", "0.02",
                 "--r-angles", "20"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["r_area"] == 0.02 and rows[0]["total"] > 0


def test_config_file_and_env(tmp_path, monkeypatch):
    f = tmp_path / "cfg.yaml"
    f.write_text("r-area: 0.02\nr_angle: 20\nmax_primitives: inf\n")
    assert load_config(f).r_area == 0.02
    monkeypatch.setenv(ENV_VAR, str(f))
    assert load_config().r_angle == 20
    out = tmp_path / "d.json"
    assert main(["generate", "fixture:plate", "-o", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["params"]["r_angle"] == 20
    # command-line flags beat the file
    assert main(["generate", "fixture:plate", "-o", str(out), "--r-angle", "10"]) == EXIT_OK
    assert json.loads(out.read_text())["params"]["r_angle"] == 10


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        Config(alpha=2.0)
    f = tmp_path / "cfg.yaml"
    f.write_text("bogus: 1\n")
    with pytest.raises(ValueError):
        load_config(f)
    assert main(["generate", "fixture:plate", "--config", str(f),
                 "-o", str(tmp_path / "d.json")]) == EXIT_INPUT
