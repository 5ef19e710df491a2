"""CLI subcommands: run, eval, formation, worldgen."""

import json
import math
import os

import pytest

from swarmsim import cli
from swarmsim.camera import load_landmarks
from swarmsim.config import hover_config, save_config
from swarmsim.evaluation import Pose, Trajectory, write_tum
from swarmsim.geometry import quat_from_yaw


def run_cli(capsys, *argv):
    rc = cli.main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_run_preset_writes_logs(tmp_path, capsys):
    rc, out, _ = run_cli(
        capsys, "run", "--preset", "hover", "--duration", "1", "--log-dir", str(tmp_path / "logs")
    )
    assert rc == 0
    assert "ran 1000 ticks" in out and "1.000 sim-s" in out
    assert os.path.exists(tmp_path / "logs" / "veh0_imu.csv")
    assert os.path.exists(tmp_path / "logs" / "config.json")


def test_run_config_file_with_overrides(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    save_config(str(path), hover_config(seed=1, duration_s=5.0))
    rc, out, _ = run_cli(
        capsys, "run", "--config", str(path), "--steps", "250", "--seed", "9", "--rtf", "unbounded"
    )
    assert rc == 0 and "ran 250 ticks" in out


def test_run_requires_exactly_one_source(tmp_path, capsys):
    rc, _, err = run_cli(capsys, "run", "--preset", "hover", "--config", "x.json")
    assert rc == 2 and "error:" in err
    rc, _, err = run_cli(capsys, "run")
    assert rc == 2 and "error:" in err


def test_run_replays_transcript(tmp_path, capsys):
    log_a = tmp_path / "a"
    rc, _, _ = run_cli(
        capsys, "run", "--preset", "hover", "--duration", "1", "--log-dir", str(log_a)
    )
    assert rc == 0
    rc, out, _ = run_cli(
        capsys,
        "run",
        "--preset",
        "hover",
        "--duration",
        "1",
        "--log-dir",
        str(tmp_path / "b"),
        "--transcript",
        str(log_a / "commands.jsonl"),
    )
    assert rc == 0 and "ran 1000 ticks" in out


def line_traj(n, drift=0.0):
    samples = []
    q = quat_from_yaw(0.0)
    for i in range(n):
        x = 0.1 * i
        samples.append(Pose(t=0.1 * i, p=(x + drift * x, 0.0, 1.0), q=q))
    return Trajectory(tuple(samples))


def test_eval_ape_report(tmp_path, capsys):
    ref, est = tmp_path / "ref.tum", tmp_path / "est.tum"
    write_tum(str(ref), line_traj(80))
    write_tum(str(est), line_traj(80, drift=0.1))
    out_path = tmp_path / "report.json"
    rc, out, _ = run_cli(
        capsys, "eval", "--mode", "ape", "--ref", str(ref), "--est", str(est),
        "--out", str(out_path),
    )
    assert rc == 0
    doc = json.loads(out)
    assert doc["mode"] == "ape" and doc["translation"]["rmse"] > 0.0
    assert json.loads(out_path.read_text()) == doc


def test_eval_rpe_report(tmp_path, capsys):
    ref, est = tmp_path / "ref.tum", tmp_path / "est.tum"
    write_tum(str(ref), line_traj(80))
    write_tum(str(est), line_traj(80, drift=0.1))
    rc, out, _ = run_cli(
        capsys, "eval", "--mode", "rpe", "--ref", str(ref), "--est", str(est), "--delta", "0.5"
    )
    assert rc == 0
    doc = json.loads(out)
    assert doc["mode"] == "rpe" and doc["delta"] == 0.5
    assert math.isclose(doc["translation"]["mean"], 0.05, rel_tol=0.05)


def test_eval_missing_file_is_reported(tmp_path, capsys):
    rc, _, err = run_cli(
        capsys, "eval", "--mode", "ape", "--ref", str(tmp_path / "no.tum"),
        "--est", str(tmp_path / "no.tum"),
    )
    assert rc == 2 and "error:" in err


def test_formation_fast_demo(capsys):
    rc, out, _ = run_cli(
        capsys, "formation", "--sim", "fast", "--switch-every", "10",
        "--shape-seq", "cube,pyramid,triangle",
    )
    assert rc == 0
    lines = [l for l in out.splitlines() if "max follower error" in l]
    assert [l.split(":")[0] for l in lines] == ["cube", "pyramid", "triangle"]
    errs = [float(l.split("error")[1].split("m")[0]) for l in lines]
    assert all(e < 0.1 for e in errs)


def test_formation_fast_benchmark(capsys):
    rc, out, _ = run_cli(
        capsys, "formation", "--sim", "fast", "--agents", "100", "--switch-every", "5",
        "--shape-seq", "cube", "--benchmark",
    )
    assert rc == 0
    bench = [l for l in out.splitlines() if l.startswith("100 agents:")]
    assert len(bench) == 1
    mult = float(bench[0].split("(")[1].split("x")[0])
    assert mult > 1.0


def test_formation_rejects_unknown_shape(capsys):
    rc, _, err = run_cli(capsys, "formation", "--shape-seq", "cube,dodecahedron")
    assert rc == 2 and "dodecahedron" in err


def test_worldgen(tmp_path, capsys):
    out_path = tmp_path / "world.csv"
    rc, out, _ = run_cli(
        capsys, "worldgen", "--landmarks", "50", "--box=-5,-5,0,5,5,4",
        "--seed", "3", "--out", str(out_path),
    )
    assert rc == 0 and "wrote 50 landmarks" in out
    lms = load_landmarks(str(out_path))
    assert len(lms) == 50
    assert [i for i, _ in lms] == list(range(50))
    assert all(-5 <= x <= 5 and -5 <= y <= 5 and 0 <= z <= 4 for _, (x, y, z) in lms)


def test_worldgen_rejects_bad_box(tmp_path, capsys):
    rc, _, err = run_cli(
        capsys, "worldgen", "--landmarks", "5", "--box", "1,2,3", "--out", str(tmp_path / "w.json")
    )
    assert rc == 2 and "error:" in err
