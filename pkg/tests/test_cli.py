import subprocess
import sys

import pytest

from dnbv.cli import main
from dnbv.objective import ObjectiveWeights


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(out / "desk"), "--pole", "edge", "--gt"]) == 0
    assert main(["synth", "--out", str(out / "empty"), "--pole", "edge", "--empty"]) == 0
    return out


def manifest(synth_dir, name="desk"):
    return str(synth_dir / name / "scenario.txt")


def test_dome_build(tmp_path, capsys):
    assert main(["dome", "build", "--pole", "edge", "--out", str(tmp_path)]) == 0
    assert "44 allowed viewpoints" in capsys.readouterr().out
    assert len((tmp_path / "faces.csv").read_text().splitlines()) == 45
    assert main(["dome", "build", "--out", str(tmp_path / "v")]) == 0
    assert len((tmp_path / "v" / "faces.csv").read_text().splitlines()) == 46


def test_project_and_export(synth_dir, tmp_path, capsys):
    assert main(["project", "--config", manifest(synth_dir), "--frame", "1", "--obj", str(tmp_path / "d.obj")]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "index,count,occluded" and len(rows) == 45
    assert any(r.endswith(",1") for r in rows[1:])
    assert (tmp_path / "d.obj").exists() and (tmp_path / "d.csv").exists()


def test_score(synth_dir, capsys):
    assert main(["score", "--config", manifest(synth_dir), "--current", "11"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "index,p_vis,p_nocc,p_dist,p_jt,p_total" and len(rows) == 42


def test_plan_step_from_frame_and_from_ply(synth_dir, tmp_path, capsys):
    m = manifest(synth_dir)
    assert main(["plan", "step", "--config", m, "--current", "1", "--frame", "0",
                 "--breakdown", str(tmp_path / "b.csv")]) == 0
    record = capsys.readouterr().out
    assert record.startswith("from_index: 1\n") and "to_index: " in record
    plys = sorted(str(p) for p in (synth_dir / "desk").glob("frame000_sensor*.ply"))
    assert main(["plan", "step", "--config", m, "--current", "1", "--ply", *plys]) == 0
    assert capsys.readouterr().out == record
    assert (tmp_path / "b.csv").read_text().startswith("index,")
    assert main(["plan", "step", "--config", m, "--current", "1", "--ply", plys[0]]) == 1


def test_replay_writes_trajectory(synth_dir, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["replay", "--config", manifest(synth_dir), "--start", "22", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "frame,from,to,geodesic_moved,joint_moved,all_occluded" and len(lines) == 6
    assert main(["replay", "--config", manifest(synth_dir, "empty"), "--start", "22", "--out", str(out)]) == 0
    assert all(r.split(",")[1] == r.split(",")[2] == "22" for r in out.read_text().splitlines()[1:])


def test_train_and_eval(synth_dir, tmp_path, capsys):
    listing = tmp_path / "set.txt"
    listing.write_text(f"{manifest(synth_dir)}\n{manifest(synth_dir, 'empty')}\n")
    out = tmp_path / "train"
    assert main(["train", "--set", str(listing), "--out", str(out)]) == 0
    w = ObjectiveWeights.load(out / "weights.txt")
    assert abs(w.as_array().sum() - 1) < 1e-9
    assert len((out / "cv.csv").read_text().splitlines()) == 3
    assert "cross-validation: 2 splits" in capsys.readouterr().out
    assert main(["eval", "--config", manifest(synth_dir), "--out", str(tmp_path / "mm.csv")]) == 0
    text = capsys.readouterr().out
    assert "total: 41\n" in text and "matches: 41\n" in text
    assert main(["eval", "--config", manifest(synth_dir), "--weights", str(out / "weights.txt")]) == 0


def test_train_explore_writes_behavior_table(synth_dir, tmp_path):
    out = tmp_path / "explore"
    assert main(["train", "--config", manifest(synth_dir), "--explore", "--out", str(out)]) == 0
    assert len((out / "behavior.csv").read_text().splitlines()) == 65


def test_jointtable_synth(tmp_path, capsys):
    out = tmp_path / "j.csv"
    assert main(["jointtable", "synth", "--pole", "edge", "--out", str(out)]) == 0
    assert "41 reachable of 44" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 45


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nope"],
        ["replay", "--start", "3"],
        ["score", "--config", "/no/such/manifest.txt", "--current", "1"],
        ["synth", "--script", "other", "--out", "/tmp/x"],
        ["train", "--out", "/tmp/x"],
    ],
)
def test_validation_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_bad_start_and_bad_weights_exit_1(synth_dir, tmp_path):
    assert main(["replay", "--config", manifest(synth_dir), "--start", "7"]) == 1
    (tmp_path / "w.txt").write_text("w_vis = 1\n")
    assert main(["replay", "--config", manifest(synth_dir), "--start", "3", "--weights", str(tmp_path / "w.txt")]) == 1


def test_runtime_error_exit_2(synth_dir, tmp_path):
    # the output path is a directory
    assert main(["replay", "--config", manifest(synth_dir), "--start", "3", "--out", str(tmp_path)]) == 2


def test_console_entry_point_runs(tmp_path):
    cmd = [sys.executable, "-m", "dnbv.cli", "dome", "build", "--pole", "edge", "--out", str(tmp_path)]
    r = subprocess.run(cmd, capture_output=True, text=True)
    assert r.returncode == 0 and "44" in r.stdout
